"""Surface energies and the descent loop.

Three terms drive the surface: localized region separation on the raw image,
the same on the probability map, and the squared radial misfit of user
boundary points.  Region terms sample the volume along the radial ray just
inside and outside each surface point; their coefficient gradients are the
exact derivatives of the sampled energy, so finite differences agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import _fastpath
from .surface import (
    MeshParams,
    SplineSurface,
    _frame,
    basis_design,
    pole_cap_angle,
)
from .volume import VoxelVolume, sample_with_radial_deriv

if TYPE_CHECKING:
    from .session import UserPoint


class EnergyError(ValueError):
    pass


# a step must beat this relative energy gain to be accepted; below it the
# descent is grinding voxel-staircase noise and counts as converged
_MIN_GAIN_RTOL = 1e-4


@dataclass(frozen=True)
class EnergyConfig:
    alpha: float = 1.0        # image region weight
    eta: float = 0.3          # probability-map region weight
    gamma: float = 1.0        # user-point weight
    nu_prob: int = 100        # ray half-length (voxels) for the probability map
    nu_img: int = 10          # ray half-length for the image / interactive phase
    step: float = 0.5         # max coefficient move per iteration, mm
    max_iters: int = 200
    tol: float = 0.01         # convergence threshold on coefficient change, mm
    samples: tuple[int, int] = (64, 32)   # angular sample grid (theta, phi)

    def __post_init__(self):
        if min(self.alpha, self.eta, self.gamma) < 0:
            raise EnergyError("energy weights must be >= 0")
        if self.nu_prob < 1 or self.nu_img < 1:
            raise EnergyError("localization half-length must be >= 1 voxel")
        if self.step <= 0 or self.tol <= 0:
            raise EnergyError("step and tol must be positive")
        if min(self.samples) < 4:
            raise EnergyError("sample grid too coarse")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "eta": self.eta, "gamma": self.gamma,
            "nu_prob": self.nu_prob, "nu_img": self.nu_img,
            "step": self.step, "max_iters": self.max_iters, "tol": self.tol,
            "samples": list(self.samples),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyConfig":
        d = dict(d)
        if "samples" in d:
            d["samples"] = tuple(d["samples"])
        return cls(**d)


@dataclass(frozen=True)
class EvolutionResult:
    surface: SplineSurface
    iterations: int
    converged: bool
    trace: tuple[float, ...]   # total energy after each accepted iteration


# ---------------------------------------------------------------------------
# Angular sample grid (cached per mesh + resolution)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _grid(params: MeshParams, m_theta: int, m_phi: int):
    eps = pole_cap_angle(params)
    dtheta = 2.0 * np.pi / m_theta
    dphi = (np.pi - 2.0 * eps) / m_phi
    theta = (np.arange(m_theta) + 0.5) * dtheta
    phi = eps + (np.arange(m_phi) + 0.5) * dphi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    tt = tt.ravel()
    pp = pp.ravel()
    w = np.sin(pp) * dtheta * dphi
    rhat, _, _ = _frame(tt, pp)
    flat_idx, bw = basis_design(params, tt, pp)
    for a in (tt, pp, w, rhat, flat_idx, bw):
        a.setflags(write=False)
    return tt, pp, w, rhat, flat_idx, bw


def localized_means(vol: VoxelVolume, sample, nu: int):
    """Interior/exterior ray means at one surface sample.

    Samples at position -/+ i*delta along the radial direction for
    i = 1..nu (delta = min voxel spacing); off-grid samples read 0, and
    interior samples never cross the origin (their radius is clamped at a
    quarter voxel, where they stop moving with the surface).
    Returns (u, v_ext, count_in, count_out).
    """
    if nu < 1:
        raise EnergyError("nu must be >= 1")
    rhat, _, _ = _frame(np.array([sample.theta]), np.array([sample.phi]))
    pos = np.asarray(sample.position, dtype=np.float64)
    origin = pos - sample.rho * rhat[0]
    u, v, _, _ = _region_pass(vol, origin, np.array([float(sample.rho)]), rhat,
                              nu, need_grad=False)
    return float(u[0]), float(v[0]), nu, nu


def _region_pass(vol, origin, psi, rhat, nu, need_grad):
    """Ray means around each sample; returns (u, v, du_dpsi, dv_dpsi)."""
    if _fastpath.HAVE_NUMBA:
        delta = min(vol.spacing)
        u, v, du, dv = _fastpath.ray_pass(
            vol.data64(),
            np.asarray(vol.dims, dtype=np.int64),
            np.asarray(vol.spacing, dtype=np.float64),
            np.ascontiguousarray(origin, dtype=np.float64),
            np.ascontiguousarray(psi, dtype=np.float64),
            np.ascontiguousarray(rhat, dtype=np.float64),
            nu, delta, 0.25 * delta, need_grad,
        )
        return u, v, (du if need_grad else None), (dv if need_grad else None)
    return _region_pass_numpy(vol, origin, psi, rhat, nu, need_grad)


def _region_pass_numpy(vol, origin, psi, rhat, nu, need_grad):
    delta = min(vol.spacing)
    offs = np.concatenate([-np.arange(1, nu + 1), np.arange(1, nu + 1)]) * delta
    radii = psi[:, None] + offs[None, :]
    # keep interior samples on this side of the origin; clamped samples sit
    # still, so they contribute value but no derivative
    unclamped = radii > 0.25 * delta
    radii = np.maximum(radii, 0.25 * delta)
    pts = origin[None, None, :] + radii[..., None] * rhat[:, None, :]
    dirs = np.broadcast_to(rhat[:, None, :], pts.shape)
    if need_grad:
        val, ddr = sample_with_radial_deriv(vol, pts.reshape(-1, 3),
                                            dirs.reshape(-1, 3))
        ddr = ddr.reshape(radii.shape) * unclamped
        du = ddr[:, :nu].mean(axis=1)
        dv = ddr[:, nu:].mean(axis=1)
    else:
        from .volume import sample_trilinear
        val = sample_trilinear(vol, pts.reshape(-1, 3))
        du = dv = None
    val = val.reshape(radii.shape)
    u = val[:, :nu].mean(axis=1)
    v = val[:, nu:].mean(axis=1)
    return u, v, du, dv


class _Objective:
    """Weighted total energy/gradient for a fixed mesh, origin and inputs."""

    def __init__(self, surface: SplineSurface, image, prob,
                 points: Sequence["UserPoint"], cfg: EnergyConfig):
        self.params = surface.params
        self.origin = surface.origin
        self.cfg = cfg
        _, _, self.w, self.rhat, self.flat_idx, self.bw = _grid(
            surface.params, cfg.samples[0], cfg.samples[1]
        )
        self.terms = []
        if cfg.alpha > 0:
            if image is None:
                raise EnergyError("alpha > 0 requires an image volume")
            self.terms.append((cfg.alpha, image, cfg.nu_img))
        if cfg.eta > 0:
            if prob is None:
                raise EnergyError("eta > 0 requires a probability volume")
            self.terms.append((cfg.eta, prob, cfg.nu_prob))
        self.points = list(points) if cfg.gamma > 0 else []
        if self.points:
            pt_theta = np.array([p.theta_u for p in self.points])
            pt_phi = np.array([p.phi_u for p in self.points])
            self.pt_rho = np.array([p.rho_u for p in self.points])
            self.pt_idx, self.pt_bw = basis_design(self.params, pt_theta, pt_phi)

    def mass(self) -> np.ndarray:
        """Per-coefficient solid-angle basis mass, normalized to max 1.

        Dividing a region gradient by this turns it into an average normal
        velocity over the coefficient's support, so pole coefficients (tiny
        solid angle) move as readily as equatorial ones.
        """
        m = np.bincount(self.flat_idx.reshape(-1),
                        weights=(self.bw * self.w[:, None]).reshape(-1),
                        minlength=self.params.n_knots)
        m /= m.max()
        return np.maximum(m, 1e-3).reshape(self.params.n_theta, self.params.n_phi)

    def _psi(self, coeffs: np.ndarray) -> np.ndarray:
        return (coeffs.reshape(-1)[self.flat_idx] * self.bw).sum(axis=1)

    def energy(self, coeffs: np.ndarray) -> float:
        e, _ = self._eval(coeffs, need_grad=False)
        return e

    def energy_grad(self, coeffs: np.ndarray) -> tuple[float, np.ndarray]:
        return self._eval(coeffs, need_grad=True)

    def _eval(self, coeffs, need_grad):
        total = 0.0
        gsum = np.zeros(self.params.n_knots) if need_grad else None
        if self.terms:
            psi = self._psi(coeffs)
            for weight, vol, nu in self.terms:
                u, v, du, dv = _region_pass(vol, self.origin, psi, self.rhat,
                                            nu, need_grad)
                diff = u - v
                total += weight * (-0.5) * float((self.w * diff * diff).sum())
                if need_grad:
                    g_s = -diff * (du - dv) * self.w * weight
                    gsum += np.bincount(
                        self.flat_idx.reshape(-1),
                        weights=(self.bw * g_s[:, None]).reshape(-1),
                        minlength=self.params.n_knots,
                    )
        if self.points:
            psi_u = (coeffs.reshape(-1)[self.pt_idx] * self.pt_bw).sum(axis=1)
            resid = psi_u - self.pt_rho
            total += self.cfg.gamma * float((resid * resid).sum())
            if need_grad:
                gsum += self.cfg.gamma * np.bincount(
                    self.pt_idx.reshape(-1),
                    weights=(2.0 * resid[:, None] * self.pt_bw).reshape(-1),
                    minlength=self.params.n_knots,
                )
        grad = gsum.reshape(self.params.n_theta, self.params.n_phi) if need_grad else None
        return total, grad


# ---------------------------------------------------------------------------
# Public gradient operations
# ---------------------------------------------------------------------------

def yezzi_energy(surface: SplineSurface, vol: VoxelVolume, nu: int,
                 samples: tuple[int, int] = (64, 32)) -> float:
    """Localized region energy -1/2 sum w (u - v)^2 over the sample grid."""
    cfg = EnergyConfig(alpha=0.0, eta=1.0, gamma=0.0, nu_prob=nu, samples=samples)
    return _Objective(surface, None, vol, [], cfg).energy(surface.coeffs)


def yezzi_gradient(surface: SplineSurface, vol: VoxelVolume, nu: int,
                   samples: tuple[int, int] = (64, 32)) -> np.ndarray:
    """Exact coefficient gradient of the localized region energy."""
    cfg = EnergyConfig(alpha=0.0, eta=1.0, gamma=0.0, nu_prob=nu, samples=samples)
    _, g = _Objective(surface, None, vol, [], cfg).energy_grad(surface.coeffs)
    return g


def interaction_energy(surface: SplineSurface, points: Sequence["UserPoint"]) -> float:
    """Sum of squared radial residuals at the user points."""
    total = 0.0
    for p in points:
        flat, w = basis_design(surface.params, np.float64(p.theta_u),
                               np.float64(p.phi_u))
        psi = float((surface.coeffs.reshape(-1)[flat] * w).sum())
        total += (psi - p.rho_u) ** 2
    return total


def interaction_gradient(surface: SplineSurface,
                         points: Sequence["UserPoint"]) -> np.ndarray:
    """Closed-form gradient: per point 2*(psi - rho_u) times the basis tensor."""
    g = np.zeros(surface.params.n_knots)
    c = surface.coeffs.reshape(-1)
    for p in points:
        flat, w = basis_design(surface.params, np.float64(p.theta_u),
                               np.float64(p.phi_u))
        resid = float((c[flat] * w).sum()) - p.rho_u
        np.add.at(g, flat, 2.0 * resid * w)
    return g.reshape(surface.params.n_theta, surface.params.n_phi)


def total_gradient(surface: SplineSurface, image, prob,
                   points: Sequence["UserPoint"], cfg: EnergyConfig) -> np.ndarray:
    """alpha * region(image) + eta * region(prob) + gamma * interaction."""
    _, g = _Objective(surface, image, prob, points, cfg).energy_grad(surface.coeffs)
    return g


def total_energy(surface: SplineSurface, image, prob,
                 points: Sequence["UserPoint"], cfg: EnergyConfig) -> float:
    return _Objective(surface, image, prob, points, cfg).energy(surface.coeffs)


# ---------------------------------------------------------------------------
# Descent loop
# ---------------------------------------------------------------------------

def _radius_floor(image, prob) -> float:
    for vol in (prob, image):
        if vol is not None:
            return 0.25 * min(vol.spacing)
    return 1e-3


def evolve(surface: SplineSurface, image, prob,
           points: Sequence["UserPoint"], cfg: EnergyConfig) -> EvolutionResult:
    """Backtracking normalized gradient descent on the weighted total energy.

    The gradient is divided by the per-knot solid-angle mass, then scaled so
    its largest entry steps by cfg.step mm; the step is halved until the
    energy drops by at least a small relative margin.  Converged when no such
    move of at least cfg.tol exists.
    """
    obj = _Objective(surface, image, prob, points, cfg)
    floor = _radius_floor(image, prob)
    mass = obj.mass()
    c = np.maximum(surface.coeffs, floor)
    trace: list[float] = []
    converged = False
    iterations = 0
    lam_start = 1.0
    for _ in range(cfg.max_iters):
        e_cur, g = obj.energy_grad(c)
        if not np.all(np.isfinite(g)) or not np.isfinite(e_cur):
            raise EnergyError("non-finite energy gradient (corrupt input volume?)")
        g = g / mass
        gmax = float(np.abs(g).max())
        if gmax == 0.0:
            converged = True
            break
        direction = g / gmax
        min_gain = _MIN_GAIN_RTOL * (1.0 + abs(e_cur))
        lam = lam_start
        accepted = False
        while lam * cfg.step >= cfg.tol:
            c_try = np.maximum(c - lam * cfg.step * direction, floor)
            move = float(np.abs(c_try - c).max())
            if move < cfg.tol:
                break
            e_try = obj.energy(c_try)
            if e_try < e_cur - min_gain:
                c = c_try
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            converged = True
            break
        lam_start = min(1.0, 2.0 * lam)   # warm-start the next line search
        iterations += 1
        trace.append(e_try)
    return EvolutionResult(surface.with_coeffs(c), iterations, converged,
                           tuple(trace))
