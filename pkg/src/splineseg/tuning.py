"""Mesh/scale selection by simulated interaction.

Each candidate mesh is fitted to a training label, probed with randomly
simulated boundary clicks at a 10-20% radial offset, and scored by

    E = 1/DSC + HD + 2 * dK_fg + dr_bg

where dK_fg is the mean absolute Gaussian-curvature change near the click
and dr_bg the mean absolute radial change far from it (both per click,
averaged; voxel units).  A coarse grid search over one label is refined on
further labels within a 10% energy band, and the smallest mesh wins.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .energy import EnergyConfig, evolve
from .metrics import metric_pair
from .session import INTERACTIVE_ITERS, UserPoint
from .surface import (
    MeshParams,
    SplineSurface,
    SurfaceError,
    embed,
    evaluate,
    evaluate_many,
    gaussian_curvature_many,
    init_sphere,
    pole_cap_angle,
    rasterize,
)
from .volume import VoxelVolume, VolumeError, center_of_mass, equivalent_radius

RESPONSE_SAMPLES = (64, 32)


class TuningError(ValueError):
    pass


@dataclass(frozen=True)
class TuningProtocol:
    n_points: int = 5
    offset_lo: float = 0.10
    offset_hi: float = 0.20
    tau_fg: float | None = None      # geodesic foreground radius; None = from mesh
    tau_bg: float | None = None      # background starts here; None = 2 * tau_fg
    seed: int = 0
    theta_range: tuple[int, int, int] = (6, 24, 2)   # (lo, hi, step)
    phi_range: tuple[int, int, int] = (6, 24, 2)
    scales: tuple[int, ...] = (0, 1)
    refine_threshold: float = 0.10
    fidelity_after_interaction: bool = False

    def __post_init__(self):
        if not 0.0 < self.offset_lo < self.offset_hi < 1.0:
            raise TuningError("need 0 < offset_lo < offset_hi < 1")
        if self.n_points < 1:
            raise TuningError("n_points must be >= 1")
        if self.tau_fg is not None and self.tau_bg is not None:
            if not self.tau_fg < self.tau_bg:
                raise TuningError("tau_fg must be smaller than tau_bg")


@dataclass(frozen=True)
class TuningCandidate:
    params: MeshParams
    dsc: float
    hd: float
    dk_fg: float
    dr_bg: float
    energy: float
    ok: bool = True
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "n_theta": self.params.n_theta,
            "n_phi": self.params.n_phi,
            "scale": self.params.scale,
            "dsc": self.dsc,
            "hd": self.hd,
            "dk_fg": self.dk_fg,
            "dr_bg": self.dr_bg,
            "energy": self.energy,
            "ok": self.ok,
            "note": self.note,
        }


@dataclass(frozen=True)
class TuningReport:
    coarse: tuple[TuningCandidate, ...]
    global_min: MeshParams
    refined: tuple[TuningCandidate, ...]   # averaged over refinement labels
    refined_set: tuple[MeshParams, ...]
    chosen: MeshParams
    seed: int
    protocol: dict

    def to_dict(self) -> dict:
        def p(mp: MeshParams) -> list[int]:
            return [mp.n_theta, mp.n_phi, mp.scale]

        return {
            "coarse": [c.to_dict() for c in self.coarse],
            "global_min": p(self.global_min),
            "refined": [c.to_dict() for c in self.refined],
            "refined_set": [p(m) for m in self.refined_set],
            "chosen": p(self.chosen),
            "seed": self.seed,
            "protocol": self.protocol,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# Simulated clicks and their response
# ---------------------------------------------------------------------------

def simulate_points(surface: SplineSurface, proto: TuningProtocol) -> list[UserPoint]:
    """Points uniform on the sphere, pushed 10-20% off the current surface."""
    rng = np.random.default_rng(proto.seed)
    pts = []
    for i in range(proto.n_points):
        theta = float(rng.uniform(0.0, 2.0 * np.pi))
        phi = float(np.arccos(rng.uniform(-1.0, 1.0)))
        sign = 1.0 if rng.integers(0, 2) else -1.0
        mag = float(rng.uniform(proto.offset_lo, proto.offset_hi))
        psi = evaluate(surface, theta, phi)
        rho = psi * (1.0 + sign * mag)
        cart = embed(surface.origin, rho, theta, phi)
        pts.append(UserPoint(f"sim{i}", cart, theta, phi, rho))
    return pts


def _tau_angles(params: MeshParams, proto: TuningProtocol) -> tuple[float, float]:
    if proto.tau_fg is not None:
        tau_f = proto.tau_fg
    else:
        # two knot spacings around the click, capped so a background remains
        tau_f = min(2.0 * max(params.knot_spacing_rad), np.pi / 3.0)
    tau_b = proto.tau_bg if proto.tau_bg is not None else 2.0 * tau_f
    return tau_f, min(tau_b, 0.9 * np.pi)


def interaction_response(before: SplineSurface, after: SplineSurface,
                         point: UserPoint, proto: TuningProtocol) -> tuple[float, float]:
    """(curvature change near the click, radial change far from it), mm units."""
    if before.params != after.params or not np.allclose(before.origin, after.origin):
        raise TuningError("surfaces differ in mesh or origin")
    params = before.params
    tau_f, tau_b = _tau_angles(params, proto)
    m_t, m_p = RESPONSE_SAMPLES
    eps = pole_cap_angle(params)
    theta = (np.arange(m_t) + 0.5) * 2.0 * np.pi / m_t
    phi = eps + (np.arange(m_p) + 0.5) * (np.pi - 2.0 * eps) / m_p
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    tt, pp = tt.ravel(), pp.ravel()
    cosg = (np.sin(pp) * np.sin(point.phi_u) * np.cos(tt - point.theta_u)
            + np.cos(pp) * np.cos(point.phi_u))
    geo = np.arccos(np.clip(cosg, -1.0, 1.0))

    fg = geo <= tau_f
    if not fg.any():
        fg = geo <= geo.min() + 1e-9
    k_before = gaussian_curvature_many(before, tt[fg], pp[fg])
    k_after = gaussian_curvature_many(after, tt[fg], pp[fg])
    valid = np.isfinite(k_before) & np.isfinite(k_after)
    dk = float(np.abs(k_after[valid] - k_before[valid]).mean()) if valid.any() else 0.0

    bg = geo >= tau_b
    if not bg.any():
        bg = geo >= geo.max() - 1e-9
    dr = float(np.abs(evaluate_many(after, tt[bg], pp[bg])
                      - evaluate_many(before, tt[bg], pp[bg])).mean())
    return dk, dr


def tuning_energy(dsc: float, hd: float, dk_fg: float, dr_bg: float) -> float:
    """1/DSC + HD + 2*dK + dr; curvature is double-weighted."""
    if dsc <= 0.0:
        raise TuningError("DSC must be positive")
    return 1.0 / dsc + hd + 2.0 * dk_fg + dr_bg


# ---------------------------------------------------------------------------
# Candidate evaluation
# ---------------------------------------------------------------------------

def _failed(params: MeshParams, note: str) -> TuningCandidate:
    nan = float("nan")
    return TuningCandidate(params, nan, nan, nan, nan, nan, ok=False, note=note)


def evaluate_candidate(label: VoxelVolume, params: MeshParams,
                       proto: TuningProtocol, cfg: EnergyConfig) -> TuningCandidate:
    """Fit the mesh to one label, probe it with simulated clicks, score Eq. energy."""
    if label.kind != "mask":
        raise TuningError(f"labels must be masks, got {label.kind!r}")
    prob = label.with_kind("probability")
    try:
        origin = center_of_mass(label)
        radius = equivalent_radius(label)
        sphere = init_sphere(origin, radius, params)
        fit = evolve(sphere, None, prob, [],
                     replace(cfg, alpha=0.0, gamma=0.0, eta=1.0)).surface
        fitted_mask = rasterize(fit, label.dims, label.spacing)
        fidelity = metric_pair(label, fitted_mask, units="voxel")
    except (SurfaceError, VolumeError, ValueError) as e:
        return _failed(params, f"fit failed: {e}")
    if fidelity.dice <= 0.0:
        return _failed(params, "fit diverged: zero overlap")

    icfg = replace(cfg, alpha=0.0, eta=0.3, gamma=1.0,
                   nu_prob=cfg.nu_img, max_iters=INTERACTIVE_ITERS)
    points = simulate_points(fit, proto)
    current = fit
    dks, drs = [], []
    active: list[UserPoint] = []
    for pt in points:
        active.append(pt)
        before = current
        current = evolve(current, None, prob, active, icfg).surface
        dk, dr = interaction_response(before, current, pt, proto)
        dks.append(dk)
        drs.append(dr)

    if proto.fidelity_after_interaction:
        fidelity = metric_pair(label, rasterize(current, label.dims, label.spacing),
                               units="voxel")
    unit = min(label.spacing)
    dk_vox = float(np.mean(dks)) * unit * unit
    dr_vox = float(np.mean(drs)) / unit
    energy = tuning_energy(fidelity.dice, fidelity.hausdorff, dk_vox, dr_vox)
    return TuningCandidate(params, fidelity.dice, fidelity.hausdorff,
                           dk_vox, dr_vox, energy)


def _mesh_grid(proto: TuningProtocol):
    t_lo, t_hi, t_step = proto.theta_range
    p_lo, p_hi, p_step = proto.phi_range
    for s in proto.scales:
        for nt in range(t_lo, t_hi + 1, t_step):
            for nphi in range(p_lo, p_hi + 1, p_step):
                yield MeshParams(nt, nphi, s)


def _rank_key(c: TuningCandidate):
    return (c.energy, c.params.n_knots, c.params.n_theta, c.params.n_phi,
            c.params.scale)


def _eval_star(args):
    return evaluate_candidate(*args)


def _eval_all(jobs, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_eval_star, jobs))
    return [_eval_star(j) for j in jobs]


def brute_force_search(label: VoxelVolume, proto: TuningProtocol,
                       cfg: EnergyConfig, workers: int = 1
                       ) -> tuple[list[TuningCandidate], MeshParams]:
    """Exhaustive coarse search; returns all candidates and the energy minimum."""
    grid = list(_mesh_grid(proto))
    if not grid:
        raise TuningError("empty search grid")
    candidates = _eval_all([(label, p, proto, cfg) for p in grid], workers)
    ok = [c for c in candidates if c.ok]
    if not ok:
        raise TuningError("all candidates diverged")
    return candidates, min(ok, key=_rank_key).params


def refined_search(labels: list[VoxelVolume],
                   coarse: tuple[list[TuningCandidate], MeshParams],
                   proto: TuningProtocol, cfg: EnergyConfig,
                   workers: int = 1) -> TuningReport:
    """Average the within-band meshes over new labels; pick the smallest mesh."""
    coarse_cands, winner = coarse
    ok = [c for c in coarse_cands if c.ok]
    e_min = min(c.energy for c in ok)
    band = 1.0 + proto.refine_threshold
    combos = [c.params for c in ok
              if c.params.scale == winner.scale and c.energy <= band * e_min]

    refined: list[TuningCandidate] = []
    if labels and combos:
        jobs = [(label, p, proto, cfg) for p in combos for label in labels]
        results = _eval_all(jobs, workers)
        per_combo = [results[i * len(labels):(i + 1) * len(labels)]
                     for i in range(len(combos))]
        for params, cands in zip(combos, per_combo):
            if all(c.ok for c in cands):
                refined.append(TuningCandidate(
                    params,
                    float(np.mean([c.dsc for c in cands])),
                    float(np.mean([c.hd for c in cands])),
                    float(np.mean([c.dk_fg for c in cands])),
                    float(np.mean([c.dr_bg for c in cands])),
                    float(np.mean([c.energy for c in cands])),
                ))

    if refined:
        e_ref = min(c.energy for c in refined)
        refined_set = [c.params for c in refined if c.energy <= band * e_ref]
        chosen = min(refined_set,
                     key=lambda p: (p.n_knots, p.n_theta, p.n_phi))
    else:
        refined_set = [winner]
        chosen = winner

    return TuningReport(tuple(coarse_cands), winner, tuple(refined),
                        tuple(refined_set), chosen, proto.seed, asdict(proto))


def landscape_csv(candidates: list[TuningCandidate]) -> str:
    lines = ["n_theta,n_phi,scale,dsc,hd,dk_fg,dr_bg,energy,ok"]
    for c in candidates:
        lines.append(
            f"{c.params.n_theta},{c.params.n_phi},{c.params.scale},"
            f"{c.dsc:.6g},{c.hd:.6g},{c.dk_fg:.6g},{c.dr_bg:.6g},"
            f"{c.energy:.6g},{int(c.ok)}"
        )
    return "\n".join(lines) + "\n"
