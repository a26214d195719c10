"""Synthetic phantoms: analytic star-convex shapes rasterized to truth masks,
blurred into probability maps, and noised into images.  Stands in for the
upstream segmentation network so the engine can be exercised deterministically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .volume import VoxelVolume, VolumeError

SHAPES = ("sphere", "ellipsoid", "lobed-blob")

# Intensity band the truth mask is mapped into for the synthetic image.
_IMG_LO, _IMG_HI = 0.2, 0.8


@dataclass(frozen=True)
class PhantomSpec:
    shape: str = "sphere"
    dims: tuple[int, int, int] = (64, 64, 64)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    center: tuple[float, float, float] = (32.0, 32.0, 32.0)   # mm
    radii: tuple[float, float, float] = (10.0, 10.0, 10.0)    # mm
    lobe_amplitude: float = 0.0       # fraction of local radius, [0, 0.5]
    lobe_waves: tuple[int, int] = (6, 5)   # angular wave counts (azimuth, zenith)
    lobe_ratio: float = 0.7           # zenith ripple strength relative to lobes
    blur_sigma: float = 0.0           # mm
    noise_sigma: float = 0.0          # intensity units
    seed: int = 0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise VolumeError(f"unknown phantom shape {self.shape!r}")
        if min(self.radii) <= 0:
            raise VolumeError("phantom radii must be positive")
        if not 0.0 <= self.lobe_amplitude <= 0.5:
            raise VolumeError("lobe amplitude outside [0, 0.5]")
        if self.lobe_amplitude * (1.0 + self.lobe_ratio) >= 0.6:
            raise VolumeError("lobe modulation too strong for a positive radius")

    @property
    def modulation_bound(self) -> float:
        return self.lobe_amplitude * (1.0 + self.lobe_ratio)

    @classmethod
    def from_json(cls, path: str | Path) -> "PhantomSpec":
        raw = json.loads(Path(path).read_text())
        for key in ("dims", "spacing", "center", "radii", "lobe_waves"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _voxel_centers(dims, spacing):
    nx, ny, nz = dims
    sx, sy, sz = spacing
    x = (np.arange(nx) + 0.5) * sx
    y = (np.arange(ny) + 0.5) * sy
    z = (np.arange(nz) + 0.5) * sz
    # broadcast to (nz, ny, nx) per-axis coordinates
    return (
        x[None, None, :],
        y[None, :, None],
        z[:, None, None],
    )


def shape_radius(spec: PhantomSpec, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Analytic boundary radius of the phantom along direction (theta, phi)."""
    rx, ry, rz = spec.radii
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    if spec.shape == "sphere":
        base = np.full(np.broadcast(theta, phi).shape, rx, dtype=np.float64)
    else:
        inv = (sp * ct / rx) ** 2 + (sp * st / ry) ** 2 + (cp / rz) ** 2
        base = 1.0 / np.sqrt(np.maximum(inv, 1e-300))
    if spec.shape == "lobed-blob" and spec.lobe_amplitude > 0:
        wt, wp = spec.lobe_waves
        mod = sp**2 * (np.cos(wt * theta) + spec.lobe_ratio * np.cos(wp * phi + 0.3))
        base = base * (1.0 + spec.lobe_amplitude * mod)
    return base


def generate_phantom(spec: PhantomSpec) -> tuple[VoxelVolume, VoxelVolume, VoxelVolume]:
    """Return (image, prob, truth) for the spec; bit-deterministic in the seed."""
    reach = max(spec.radii) * (1.0 + spec.modulation_bound)
    for c, ext in zip(spec.center, (d * s for d, s in zip(spec.dims, spec.spacing))):
        if c - reach < 0 or c + reach > ext:
            raise VolumeError("phantom radii exceed the volume extent")

    x, y, z = _voxel_centers(spec.dims, spec.spacing)
    dx = x - spec.center[0]
    dy = y - spec.center[1]
    dz = z - spec.center[2]
    r = np.sqrt(dx**2 + dy**2 + dz**2)
    if spec.shape == "sphere":
        inside = r <= spec.radii[0]
    else:
        with np.errstate(invalid="ignore"):
            theta = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
            phi = np.arccos(np.clip(np.divide(dz, np.maximum(r, 1e-300)), -1.0, 1.0))
        inside = r <= shape_radius(spec, theta, phi)
    truth_data = inside.astype(np.float32)

    if spec.blur_sigma > 0:
        sig_vox = [spec.blur_sigma / s for s in spec.spacing[::-1]]  # (z, y, x)
        prob_data = gaussian_filter(truth_data.astype(np.float64), sigma=sig_vox)
        prob_data = np.clip(prob_data, 0.0, 1.0).astype(np.float32)
    else:
        prob_data = truth_data.copy()

    rng = np.random.default_rng(spec.seed)
    img_data = _IMG_LO + (_IMG_HI - _IMG_LO) * truth_data.astype(np.float64)
    if spec.noise_sigma > 0:
        img_data = img_data + spec.noise_sigma * rng.standard_normal(img_data.shape)
    img_data = img_data.astype(np.float32)

    image = VoxelVolume(spec.dims, spec.spacing, img_data, "image")
    prob = VoxelVolume(spec.dims, spec.spacing, prob_data, "probability")
    truth = VoxelVolume(spec.dims, spec.spacing, truth_data, "mask")
    return image, prob, truth
