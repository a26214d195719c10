"""Optional numba kernel for the radial ray sampling pass.

Semantics mirror the numpy path in energy._region_pass_numpy exactly; the
kernel only removes array-construction overhead.  Import failures fall back
to numpy transparently.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*a, **k):
        def deco(fn):
            return fn
        return deco


@njit(cache=True)
def ray_pass(data, dims, spacing, origin, psi, rhat, nu, delta, rfloor, need_grad):
    nx, ny, nz = dims[0], dims[1], dims[2]
    sx, sy, sz = spacing[0], spacing[1], spacing[2]
    n = psi.shape[0]
    u = np.zeros(n)
    v = np.zeros(n)
    du = np.zeros(n)
    dv = np.zeros(n)
    for s in range(n):
        rx, ry, rz = rhat[s, 0], rhat[s, 1], rhat[s, 2]
        ps = psi[s]
        au = 0.0
        av = 0.0
        adu = 0.0
        adv = 0.0
        for i in range(1, nu + 1):
            for side in range(2):
                if side == 0:
                    r = ps - i * delta
                else:
                    r = ps + i * delta
                moving = r > rfloor
                if not moving:
                    r = rfloor
                px = origin[0] + r * rx
                py = origin[1] + r * ry
                pz = origin[2] + r * rz
                tx = px / sx - 0.5
                ty = py / sy - 0.5
                tz = pz / sz - 0.5
                ix = int(np.floor(tx))
                iy = int(np.floor(ty))
                iz = int(np.floor(tz))
                fx = tx - ix
                fy = ty - iy
                fz = tz - iz
                c = np.zeros((2, 2, 2))
                for a in range(2):
                    xa = ix + a
                    if xa < 0 or xa >= nx:
                        continue
                    for b in range(2):
                        yb = iy + b
                        if yb < 0 or yb >= ny:
                            continue
                        for cc in range(2):
                            zc = iz + cc
                            if zc < 0 or zc >= nz:
                                continue
                            c[a, b, cc] = data[zc, yb, xa]
                wx0 = 1.0 - fx
                wy0 = 1.0 - fy
                wz0 = 1.0 - fz
                c00 = c[0, 0, 0] * wx0 + c[1, 0, 0] * fx
                c10 = c[0, 1, 0] * wx0 + c[1, 1, 0] * fx
                c01 = c[0, 0, 1] * wx0 + c[1, 0, 1] * fx
                c11 = c[0, 1, 1] * wx0 + c[1, 1, 1] * fx
                c0 = c00 * wy0 + c10 * fy
                c1 = c01 * wy0 + c11 * fy
                val = c0 * wz0 + c1 * fz
                dd = 0.0
                if need_grad and moving:
                    gx = (((c[1, 0, 0] - c[0, 0, 0]) * wy0
                           + (c[1, 1, 0] - c[0, 1, 0]) * fy) * wz0
                          + ((c[1, 0, 1] - c[0, 0, 1]) * wy0
                             + (c[1, 1, 1] - c[0, 1, 1]) * fy) * fz)
                    gy = ((c10 - c00) * wz0 + (c11 - c01) * fz)
                    gz = (c1 - c0)
                    dd = gx / sx * rx + gy / sy * ry + gz / sz * rz
                if side == 0:
                    au += val
                    adu += dd
                else:
                    av += val
                    adv += dd
        u[s] = au / nu
        v[s] = av / nu
        du[s] = adu / nu
        dv[s] = adv / nu
    return u, v, du, dv
