"""Stateful editing sessions: fit a surface to a probability map, then refine
it through user boundary points with undo history and deterministic replay."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .energy import EnergyConfig, EvolutionResult, evolve
from .surface import (
    MeshParams,
    SplineSurface,
    TriMesh,
    evaluate,
    init_sphere,
    rasterize,
    spherical_of,
    surface_to_dict,
    to_mesh,
)
from .volume import VoxelVolume, VolumeError, center_of_mass, equivalent_radius, threshold

HISTORY_DEPTH = 32
INTERACTIVE_ITERS = 50
FOREGROUND_THRESHOLD = 0.5


class SessionError(ValueError):
    pass


@dataclass(frozen=True)
class UserPoint:
    id: str
    cartesian: np.ndarray   # (3,) mm, as clicked
    theta_u: float
    phi_u: float
    rho_u: float


@dataclass(frozen=True)
class ExportBundle:
    mask: VoxelVolume
    mesh: TriMesh
    surface: dict


def _interactive_cfg(cfg: EnergyConfig, has_image: bool) -> EnergyConfig:
    # interaction phase: short rays on both volumes, bounded iteration budget
    return replace(
        cfg,
        alpha=cfg.alpha if has_image else 0.0,
        nu_prob=cfg.nu_img,
        max_iters=INTERACTIVE_ITERS,
    )


@dataclass
class Session:
    id: str
    prob: VoxelVolume
    surface: SplineSurface
    cfg: EnergyConfig
    image: VoxelVolume | None = None
    points: list[UserPoint] = field(default_factory=list)
    history: list[tuple[SplineSurface, tuple[UserPoint, ...], int]] = field(
        default_factory=list
    )
    oplog: list[dict] = field(default_factory=list)
    _next_point: int = 0

    @property
    def origin(self) -> np.ndarray:
        return self.surface.origin

    def _push_history(self):
        self.history.append((self.surface, tuple(self.points), self._next_point))
        if len(self.history) > HISTORY_DEPTH:
            self.history.pop(0)

    def _reconverge(self) -> EvolutionResult:
        result = evolve(self.surface, self.image, self.prob, self.points,
                        _interactive_cfg(self.cfg, self.image is not None))
        self.surface = result.surface
        return result

    def add_point(self, cartesian) -> tuple[UserPoint, EvolutionResult]:
        cartesian = np.asarray(cartesian, dtype=np.float64).reshape(3)
        try:
            rho, theta, phi = spherical_of(self.origin, cartesian)
        except Exception as e:
            raise SessionError(str(e)) from e
        point = UserPoint(f"p{self._next_point}", cartesian, theta, phi, rho)
        self._push_history()
        self._next_point += 1
        self.points.append(point)
        result = self._reconverge()
        self.oplog.append({"op": "add", "xyz": [float(c) for c in cartesian]})
        return point, result

    def remove_point(self, point_id: str) -> EvolutionResult:
        idx = next((i for i, p in enumerate(self.points) if p.id == point_id), None)
        if idx is None:
            raise SessionError(f"unknown point id {point_id!r}")
        self._push_history()
        self.points.pop(idx)
        result = self._reconverge()
        self.oplog.append({"op": "remove", "id": point_id})
        return result

    def undo(self):
        if not self.history:
            raise SessionError("nothing to undo")
        self.surface, points, self._next_point = self.history.pop()
        self.points = list(points)
        self.oplog.append({"op": "undo"})

    def residual(self, point: UserPoint) -> float:
        return abs(evaluate(self.surface, point.theta_u, point.phi_u) - point.rho_u)

    def residuals(self) -> dict[str, float]:
        return {p.id: self.residual(p) for p in self.points}

    def export(self, mesh_samples: tuple[int, int] = (64, 32)) -> ExportBundle:
        grid = self.image if self.image is not None else self.prob
        mask = rasterize(self.surface, grid.dims, grid.spacing)
        mesh = to_mesh(self.surface, mesh_samples)
        return ExportBundle(mask, mesh, surface_to_dict(self.surface))

    def apply_ops(self, ops: list[dict]):
        """Replay a recorded operation log (add/remove/undo)."""
        for op in ops:
            kind = op.get("op")
            if kind == "add":
                self.add_point(op["xyz"])
            elif kind == "remove":
                self.remove_point(op["id"])
            elif kind == "undo":
                self.undo()
            else:
                raise SessionError(f"unknown op {op!r}")

    def state_dict(self, prob_ref: str = "", image_ref: str = "") -> dict:
        """JSON-ready session state; volumes are referenced, never inlined."""
        return {
            "id": self.id,
            "prob": prob_ref,
            "image": image_ref or None,
            "surface": surface_to_dict(self.surface),
            "points": [
                {"id": p.id, "xyz": [float(c) for c in p.cartesian]}
                for p in self.points
            ],
            "cfg": self.cfg.to_dict(),
            "ops": list(self.oplog),
            "history_depth": len(self.history),
        }


def create_session(prob: VoxelVolume, params: MeshParams, cfg: EnergyConfig,
                   image: VoxelVolume | None = None,
                   session_id: str = "session") -> Session:
    """Initialize from the probability map: sphere at its center of mass with
    its equivalent radius, then fit with the probability term alone."""
    if prob.kind != "probability":
        raise SessionError(f"need a probability volume, got {prob.kind!r}")
    if image is not None and (image.dims != prob.dims or image.spacing != prob.spacing):
        raise SessionError("image and probability grids differ")
    fg = threshold(prob, FOREGROUND_THRESHOLD)
    try:
        origin = center_of_mass(fg)
        radius = equivalent_radius(fg)
    except VolumeError as e:
        raise SessionError(f"empty foreground: {e}") from e
    if radius < 0.5 * min(prob.spacing):
        raise SessionError(f"degenerate foreground radius {radius:.3g} mm")
    sphere = init_sphere(origin, radius, params)
    fit_cfg = replace(cfg, alpha=0.0, gamma=0.0, eta=1.0)
    result = evolve(sphere, None, prob, [], fit_cfg)
    return Session(id=session_id, prob=prob, surface=result.surface,
                   cfg=cfg, image=image)
