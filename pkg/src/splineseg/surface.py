"""Spherical explicit B-spline surface.

The surface radius is an explicit tensor-product B-spline of the spherical
angles: rho = psi(theta, phi).  Coefficients live on an (n_theta x n_phi)
lattice; the azimuth is periodic, the zenith lattice is clamped at the poles.
The scale s widens the knot spacing to h = 2**s lattice units, so the angle
maps to the continuous knot index

    u = theta * n_theta / (2*pi*h)        (periodic, period n_theta/h)
    v = phi * (n_phi - 1) / (pi*h)        (clamped to the lattice edge)

and psi = sum_k c[k] * basis(u - k_theta) * basis(v - k_phi).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .volume import VoxelVolume


class SurfaceError(ValueError):
    pass


class PoleDegenerateError(SurfaceError):
    """First fundamental form is numerically singular (zenith pole)."""


# ---------------------------------------------------------------------------
# Centered uniform B-spline basis
# ---------------------------------------------------------------------------

def _basis0(t: np.ndarray) -> np.ndarray:
    return ((t >= -0.5) & (t < 0.5)).astype(np.float64)


def _basis_rec(t: np.ndarray, d: int) -> np.ndarray:
    if d == 0:
        return _basis0(t)
    half = 0.5 * (d + 1)
    return ((t + half) * _basis_rec(t + 0.5, d - 1)
            + (half - t) * _basis_rec(t - 0.5, d - 1)) / d


def basis(t, d: int = 3):
    """Centered uniform B-spline of degree d; support |t| <= (d+1)/2."""
    t = np.asarray(t, dtype=np.float64)
    if d < 0:
        raise SurfaceError("degree must be >= 0")
    if d == 3:
        a = np.abs(t)
        inner = 2.0 / 3.0 - a * a + 0.5 * a * a * a
        outer = (2.0 - a) ** 3 / 6.0
        out = np.where(a < 1.0, inner, np.where(a < 2.0, outer, 0.0))
    else:
        out = _basis_rec(t, d)
    return out if out.ndim else float(out)


def basis_d1(t, d: int = 3):
    """First derivative of the centered basis."""
    t = np.asarray(t, dtype=np.float64)
    if d < 1:
        return np.zeros_like(t) if t.ndim else 0.0
    if d == 3:
        a = np.abs(t)
        inner = 1.5 * a * a - 2.0 * a
        outer = -0.5 * (2.0 - a) ** 2
        mag = np.where(a < 1.0, inner, np.where(a < 2.0, outer, 0.0))
        out = np.sign(t) * mag
    else:
        out = _basis_rec(t + 0.5, d - 1) - _basis_rec(t - 0.5, d - 1)
    return out if out.ndim else float(out)


def basis_d2(t, d: int = 3):
    """Second derivative of the centered basis."""
    t = np.asarray(t, dtype=np.float64)
    if d < 2:
        return np.zeros_like(t) if t.ndim else 0.0
    if d == 3:
        a = np.abs(t)
        out = np.where(a < 1.0, 3.0 * a - 2.0, np.where(a < 2.0, 2.0 - a, 0.0))
    else:
        out = (_basis_rec(t + 1.0, d - 2) - 2.0 * _basis_rec(t, d - 2)
               + _basis_rec(t - 1.0, d - 2))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Mesh parameters and surface state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeshParams:
    n_theta: int = 12
    n_phi: int = 16
    scale: int = 0
    degree: int = 3

    def __post_init__(self):
        if self.n_theta < 4 or self.n_phi < 4:
            raise SurfaceError("mesh needs at least 4 knots per direction")
        if self.scale < 0:
            raise SurfaceError("scale must be >= 0")
        if self.degree < 1:
            raise SurfaceError("degree must be >= 1")
        if self.n_theta % self.h != 0:
            raise SurfaceError(
                f"knot spacing h={self.h} must divide n_theta={self.n_theta} "
                "to keep the azimuth periodic"
            )

    @property
    def h(self) -> int:
        return 2 ** self.scale

    @property
    def n_knots(self) -> int:
        return self.n_theta * self.n_phi

    @property
    def knot_spacing_rad(self) -> tuple[float, float]:
        """Angular distance between neighboring knots (azimuth, zenith)."""
        return (2.0 * np.pi * self.h / self.n_theta,
                np.pi * self.h / (self.n_phi - 1))


@dataclass(frozen=True)
class SplineSurface:
    origin: np.ndarray                 # (3,) mm
    params: MeshParams
    coeffs: np.ndarray                 # (n_theta, n_phi) mm, radial control values

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3).copy()
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if coeffs.shape != (self.params.n_theta, self.params.n_phi):
            raise SurfaceError(
                f"coefficient grid {coeffs.shape} does not match mesh "
                f"({self.params.n_theta}, {self.params.n_phi})"
            )
        if not np.all(np.isfinite(coeffs)):
            raise SurfaceError("non-finite coefficients")
        coeffs = coeffs.copy()
        origin.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "coeffs", coeffs)

    def with_coeffs(self, coeffs: np.ndarray) -> "SplineSurface":
        return SplineSurface(self.origin, self.params, coeffs)


def init_sphere(origin, radius: float, params: MeshParams) -> SplineSurface:
    """Sphere of the given radius: every control value equals the radius."""
    if radius <= 0:
        raise SurfaceError(f"non-positive radius {radius}")
    coeffs = np.full((params.n_theta, params.n_phi), float(radius))
    return SplineSurface(np.asarray(origin, dtype=np.float64), params, coeffs)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _support_offsets(x: np.ndarray, d: int):
    """Integer lattice indices whose basis support contains x (d+1 of them)."""
    kmin = np.floor(x - 0.5 * (d + 1)).astype(np.int64) + 1
    return kmin[..., None] + np.arange(d + 1)


def _angle_to_index(params: MeshParams, theta, phi):
    h = params.h
    theta = np.mod(np.asarray(theta, dtype=np.float64), 2.0 * np.pi)
    phi = np.clip(np.asarray(phi, dtype=np.float64), 0.0, np.pi)
    u = theta * params.n_theta / (2.0 * np.pi * h)
    v = phi * (params.n_phi - 1) / (np.pi * h)
    return u, v


def basis_design(params: MeshParams, theta, phi, du: int = 0, dv: int = 0):
    """Flat coefficient indices and tensor weights for a set of angles.

    du/dv select the derivative order of each factor (0..2); weights include
    the chain-rule factors so they differentiate w.r.t. theta/phi directly.
    """
    d = params.degree
    h = params.h
    period = params.n_theta // h
    u, v = _angle_to_index(params, theta, phi)
    ku = _support_offsets(u, d)
    kv = _support_offsets(v, d)
    tu = u[..., None] - ku
    tv = v[..., None] - kv
    fns = (basis, basis_d1, basis_d2)
    cu = params.n_theta / (2.0 * np.pi * h)
    cv = (params.n_phi - 1) / (np.pi * h)
    bu = fns[du](tu, d) * cu ** du
    bv = fns[dv](tv, d) * cv ** dv
    iu = np.mod(ku, period)
    iv = np.clip(kv, 0, params.n_phi - 1)
    flat = iu[..., :, None] * params.n_phi + iv[..., None, :]
    w = bu[..., :, None] * bv[..., None, :]
    n = d + 1
    return flat.reshape(*u.shape, n * n), w.reshape(*u.shape, n * n)


def evaluate_many(surface: SplineSurface, theta, phi) -> np.ndarray:
    flat, w = basis_design(surface.params, theta, phi)
    return (surface.coeffs.reshape(-1)[flat] * w).sum(axis=-1)


def evaluate(surface: SplineSurface, theta: float, phi: float) -> float:
    """psi(theta, phi); angles are normalized internally."""
    return float(evaluate_many(surface, np.float64(theta), np.float64(phi)))


def partials_many(surface: SplineSurface, theta, phi):
    """(psi, psi_t, psi_p, psi_tt, psi_tp, psi_pp), vectorized."""
    c = surface.coeffs.reshape(-1)
    out = []
    for du, dv in ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)):
        flat, w = basis_design(surface.params, theta, phi, du, dv)
        out.append((c[flat] * w).sum(axis=-1))
    return tuple(out)


def partials(surface: SplineSurface, theta: float, phi: float):
    """Analytic derivatives (psi_t, psi_p, psi_tt, psi_tp, psi_pp)."""
    res = partials_many(surface, np.float64(theta), np.float64(phi))
    return tuple(float(x) for x in res[1:])


# ---------------------------------------------------------------------------
# Embedding, samples, curvature
# ---------------------------------------------------------------------------

def _frame(theta, phi):
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    rhat = np.stack([sp * ct, sp * st, cp], axis=-1)
    that = np.stack([-st, ct, np.zeros_like(st)], axis=-1)       # unit azimuth
    phat = np.stack([cp * ct, cp * st, -sp], axis=-1)            # unit zenith
    return rhat, that, phat


def embed(origin, rho, theta, phi) -> np.ndarray:
    """Cartesian point(s) of spherical coordinates about the origin."""
    rhat, _, _ = _frame(np.asarray(theta, dtype=np.float64),
                        np.asarray(phi, dtype=np.float64))
    return np.asarray(origin, dtype=np.float64) + np.asarray(rho)[..., None] * rhat


def spherical_of(origin, p) -> tuple[float, float, float]:
    """Inverse of the embedding: (r, theta in [0,2pi), phi in [0,pi])."""
    d = np.asarray(p, dtype=np.float64) - np.asarray(origin, dtype=np.float64)
    r = float(np.linalg.norm(d))
    if r == 0.0:
        raise SurfaceError("point coincides with the surface origin")
    theta = float(np.mod(np.arctan2(d[1], d[0]), 2.0 * np.pi))
    phi = float(np.arccos(np.clip(d[2] / r, -1.0, 1.0)))
    return r, theta, phi


@dataclass(frozen=True)
class AngularSample:
    theta: float
    phi: float
    rho: float
    position: np.ndarray    # (3,) mm
    normal: np.ndarray      # unit outward


def surface_samples(surface: SplineSurface, theta, phi) -> list[AngularSample]:
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    phi = np.atleast_1d(np.asarray(phi, dtype=np.float64))
    psi, psi_t, psi_p, *_ = partials_many(surface, theta, phi)
    rhat, that, phat = _frame(theta, phi)
    sp = np.sin(phi)[..., None]
    x_t = psi_t[..., None] * rhat + psi[..., None] * sp * that
    x_p = psi_p[..., None] * rhat + psi[..., None] * phat
    n = np.cross(x_p, x_t)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    # at the poles the chart degenerates; fall back to the radial direction
    n = np.where(norm > 1e-12, n / np.maximum(norm, 1e-300), rhat)
    pos = surface.origin + psi[..., None] * rhat
    return [
        AngularSample(float(t), float(p), float(r), pos[i], n[i])
        for i, (t, p, r) in enumerate(zip(theta, phi, psi))
    ]


def gaussian_curvature_many(surface: SplineSurface, theta, phi) -> np.ndarray:
    """Gaussian curvature from the fundamental forms; NaN where degenerate."""
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    psi, ps_t, ps_p, ps_tt, ps_tp, ps_pp = partials_many(surface, theta, phi)
    rhat, that, phat = _frame(theta, phi)
    sp = np.sin(phi)[..., None]
    cp = np.cos(phi)[..., None]
    st, ct = np.sin(theta)[..., None], np.cos(theta)[..., None]
    that_t = np.concatenate([-ct, -st, np.zeros_like(ct)], axis=-1).reshape(that.shape)

    x_t = ps_t[..., None] * rhat + psi[..., None] * sp * that
    x_p = ps_p[..., None] * rhat + psi[..., None] * phat
    x_tt = (ps_tt[..., None] * rhat + 2.0 * ps_t[..., None] * sp * that
            + psi[..., None] * sp * that_t)
    x_tp = (ps_tp[..., None] * rhat + ps_t[..., None] * phat
            + (ps_p[..., None] * sp + psi[..., None] * cp) * that)
    x_pp = (ps_pp[..., None] * rhat + 2.0 * ps_p[..., None] * phat
            - psi[..., None] * rhat)

    E = (x_t * x_t).sum(-1)
    F = (x_t * x_p).sum(-1)
    G = (x_p * x_p).sum(-1)
    nvec = np.cross(x_p, x_t)
    nn = np.linalg.norm(nvec, axis=-1)
    denom = E * G - F * F
    bad = denom <= 1e-12 * np.maximum(E + G, 1e-300) ** 2
    nhat = nvec / np.maximum(nn, 1e-300)[..., None]
    L = (x_tt * nhat).sum(-1)
    M = (x_tp * nhat).sum(-1)
    N = (x_pp * nhat).sum(-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        K = (L * N - M * M) / denom
    return np.where(bad, np.nan, K)


def gaussian_curvature(surface: SplineSurface, theta: float, phi: float) -> float:
    k = float(gaussian_curvature_many(surface, np.float64(theta), np.float64(phi)))
    if np.isnan(k):
        raise PoleDegenerateError(f"metric degenerate at phi={phi}")
    return k


def pole_cap_angle(params: MeshParams) -> float:
    """Zenith band excluded from curvature statistics near each pole."""
    return np.pi / (2.0 * params.n_phi)


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------

def rasterize(surface: SplineSurface, dims, spacing) -> VoxelVolume:
    """Mask of voxels whose center lies radially inside the surface."""
    nx, ny, nz = (int(d) for d in dims)
    sx, sy, sz = (float(s) for s in spacing)
    ox, oy, oz = surface.origin
    if not (0.0 <= ox <= nx * sx and 0.0 <= oy <= ny * sy and 0.0 <= oz <= nz * sz):
        raise SurfaceError("surface origin lies outside the voxel grid")
    x = (np.arange(nx) + 0.5) * sx - ox
    y = (np.arange(ny) + 0.5) * sy - oy
    z = (np.arange(nz) + 0.5) * sz - oz
    dx = np.broadcast_to(x[None, None, :], (nz, ny, nx)).reshape(-1)
    dy = np.broadcast_to(y[None, :, None], (nz, ny, nx)).reshape(-1)
    dz = np.broadcast_to(z[:, None, None], (nz, ny, nx)).reshape(-1)
    r = np.sqrt(dx * dx + dy * dy + dz * dz)
    mask = np.zeros(r.shape, dtype=np.float32)
    chunk = 1 << 17
    for lo in range(0, r.size, chunk):
        hi = min(lo + chunk, r.size)
        rc = r[lo:hi]
        theta = np.mod(np.arctan2(dy[lo:hi], dx[lo:hi]), 2.0 * np.pi)
        with np.errstate(invalid="ignore", divide="ignore"):
            phi = np.arccos(np.clip(dz[lo:hi] / np.maximum(rc, 1e-300), -1.0, 1.0))
        psi = evaluate_many(surface, theta, phi)
        mask[lo:hi] = (rc <= psi).astype(np.float32)
    return VoxelVolume((nx, ny, nz), (sx, sy, sz), mask.reshape(nz, ny, nx), "mask")


# ---------------------------------------------------------------------------
# Triangle mesh export
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray   # (V, 3) mm
    faces: np.ndarray      # (F, 3) int, outward winding


def to_mesh(surface: SplineSurface, n_samples: tuple[int, int] = (64, 32)) -> TriMesh:
    """Lat-long triangulation with shared pole vertices; watertight."""
    nt, np_ = (int(n) for n in n_samples)
    if nt < 8 or np_ < 8:
        raise SurfaceError("mesh sampling needs at least (8, 8)")
    thetas = np.arange(nt) * 2.0 * np.pi / nt
    phis = np.arange(np_) * np.pi / (np_ - 1)

    tt, pp = np.meshgrid(thetas, phis[1:-1], indexing="ij")
    psi = evaluate_many(surface, tt.ravel(), pp.ravel())
    rhat, _, _ = _frame(tt.ravel(), pp.ravel())
    ring_pts = surface.origin + psi[:, None] * rhat

    r_north = float(np.mean(evaluate_many(surface, thetas, np.zeros(nt))))
    r_south = float(np.mean(evaluate_many(surface, thetas, np.full(nt, np.pi))))
    north = surface.origin + np.array([0.0, 0.0, r_north])
    south = surface.origin + np.array([0.0, 0.0, -r_south])

    verts = np.vstack([north[None, :], ring_pts, south[None, :]])
    n_rings = np_ - 2

    def vid(i_theta: int, j_ring: int) -> int:
        return 1 + (i_theta % nt) * n_rings + j_ring

    faces = []
    for i in range(nt):
        faces.append((0, vid(i, 0), vid(i + 1, 0)))
    for j in range(n_rings - 1):
        for i in range(nt):
            a = vid(i, j)
            b = vid(i + 1, j)
            c = vid(i + 1, j + 1)
            d = vid(i, j + 1)
            faces.append((a, c, b))
            faces.append((a, d, c))
    last = n_rings - 1
    s_idx = len(verts) - 1
    for i in range(nt):
        faces.append((s_idx, vid(i + 1, last), vid(i, last)))
    return TriMesh(verts, np.asarray(faces, dtype=np.int64))


def mesh_volume(mesh: TriMesh) -> float:
    """Signed volume by the divergence theorem (positive for outward winding)."""
    v0 = mesh.vertices[mesh.faces[:, 0]]
    v1 = mesh.vertices[mesh.faces[:, 1]]
    v2 = mesh.vertices[mesh.faces[:, 2]]
    return float(np.einsum("ij,ij->i", np.cross(v0, v1), v2).sum() / 6.0)


def to_obj(mesh: TriMesh) -> str:
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def surface_to_dict(surface: SplineSurface) -> dict:
    return {
        "origin_mm": [float(x) for x in surface.origin],
        "n_theta": surface.params.n_theta,
        "n_phi": surface.params.n_phi,
        "scale": surface.params.scale,
        "degree": surface.params.degree,
        "coeffs": [float(c) for c in surface.coeffs.reshape(-1)],
    }


def surface_to_json(surface: SplineSurface) -> str:
    return json.dumps(surface_to_dict(surface), sort_keys=True)


def surface_from_dict(d: dict) -> SplineSurface:
    params = MeshParams(int(d["n_theta"]), int(d["n_phi"]),
                        int(d["scale"]), int(d.get("degree", 3)))
    coeffs = np.asarray(d["coeffs"], dtype=np.float64).reshape(
        params.n_theta, params.n_phi
    )
    return SplineSurface(np.asarray(d["origin_mm"], dtype=np.float64), params, coeffs)


def surface_from_json(s: str) -> SplineSurface:
    return surface_from_dict(json.loads(s))
