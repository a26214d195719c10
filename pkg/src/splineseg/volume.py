"""Voxel volumes: container, JSON+raw file I/O, reductions, trilinear sampling.

Physical convention: a voxel at index (ix, iy, iz) has its center at
((ix + 0.5) * sx, (iy + 0.5) * sy, (iz + 0.5) * sz) mm.  Data is stored
z-major, i.e. ``data[iz, iy, ix]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KINDS = ("image", "probability", "mask")


class VolumeError(ValueError):
    """Malformed volume data, header, or payload."""


@dataclass(frozen=True)
class VoxelVolume:
    dims: tuple[int, int, int]            # (nx, ny, nz)
    spacing: tuple[float, float, float]   # mm per voxel along (x, y, z)
    data: np.ndarray                      # float32, shape (nz, ny, nx)
    kind: str
    _f64: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        nx, ny, nz = (int(d) for d in self.dims)
        if min(nx, ny, nz) < 1:
            raise VolumeError(f"non-positive dims {self.dims}")
        if min(self.spacing) <= 0:
            raise VolumeError(f"non-positive spacing {self.spacing}")
        if self.kind not in KINDS:
            raise VolumeError(f"unknown kind {self.kind!r}")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.size != nx * ny * nz:
            raise VolumeError(
                f"payload has {data.size} values, dims {self.dims} need {nx * ny * nz}"
            )
        data = data.reshape(nz, ny, nx)
        if self.kind == "probability":
            if data.min() < 0.0 or data.max() > 1.0:
                raise VolumeError("probability values outside [0, 1]")
        elif self.kind == "mask":
            if not np.all((data == 0.0) | (data == 1.0)):
                raise VolumeError("mask values not in {0, 1}")
        data.setflags(write=False)
        object.__setattr__(self, "dims", (nx, ny, nz))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "data", data)

    @property
    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    @property
    def extent_mm(self) -> tuple[float, float, float]:
        return tuple(d * s for d, s in zip(self.dims, self.spacing))

    def data64(self) -> np.ndarray:
        """Float64 view of the payload, cached (sampling runs in float64)."""
        if self._f64 is None:
            object.__setattr__(self, "_f64", self.data.astype(np.float64))
        return self._f64

    def with_kind(self, kind: str) -> "VoxelVolume":
        return VoxelVolume(self.dims, self.spacing, self.data, kind)


def load_volume(path: str | Path) -> VoxelVolume:
    """Load a `<name>.json` + `<name>.raw` pair.

    The header carries dims, spacing_mm, kind, dtype ("f32le") and the raw
    file name; the payload is little-endian float32, z-major.
    """
    path = Path(path)
    try:
        header = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise VolumeError(f"cannot read header {path}: {e}") from e
    try:
        dims = tuple(int(d) for d in header["dims"])
        spacing = tuple(float(s) for s in header["spacing_mm"])
        kind = header["kind"]
        dtype = header["dtype"]
        data_name = header["data"]
    except (KeyError, TypeError, ValueError) as e:
        raise VolumeError(f"garbled header {path}: {e}") from e
    if len(dims) != 3 or len(spacing) != 3:
        raise VolumeError(f"garbled header {path}: dims/spacing_mm must be triples")
    if dtype != "f32le":
        raise VolumeError(f"unsupported dtype {dtype!r}")
    raw_path = path.parent / data_name
    try:
        payload = raw_path.read_bytes()
    except OSError as e:
        raise VolumeError(f"cannot read payload {raw_path}: {e}") from e
    n = dims[0] * dims[1] * dims[2]
    if len(payload) != 4 * n:
        raise VolumeError(
            f"payload {raw_path} holds {len(payload) // 4} floats, dims {dims} need {n}"
        )
    data = np.frombuffer(payload, dtype="<f4")
    return VoxelVolume(dims, spacing, data, kind)


def save_volume(vol: VoxelVolume, path: str | Path) -> Path:
    """Write the `<name>.json` + `<name>.raw` pair; returns the header path."""
    path = Path(path)
    if path.suffix != ".json":
        path = path.with_name(path.name + ".json")
    raw_name = path.stem + ".raw"
    header = {
        "dims": list(vol.dims),
        "spacing_mm": list(vol.spacing),
        "kind": vol.kind,
        "dtype": "f32le",
        "data": raw_name,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(header, sort_keys=True) + "\n")
    (path.parent / raw_name).write_bytes(
        np.ascontiguousarray(vol.data, dtype="<f4").tobytes()
    )
    return path


def threshold(vol: VoxelVolume, t: float) -> VoxelVolume:
    """Binarize a probability volume: voxel = 1 iff value >= t."""
    if vol.kind != "probability":
        raise VolumeError(f"threshold needs a probability volume, got {vol.kind!r}")
    if not 0.0 < t < 1.0:
        raise VolumeError(f"threshold {t} outside (0, 1)")
    mask = (vol.data >= t).astype(np.float32)
    return VoxelVolume(vol.dims, vol.spacing, mask, "mask")


def _foreground_indices(mask: VoxelVolume) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    iz, iy, ix = np.nonzero(mask.data)
    if ix.size == 0:
        raise VolumeError("empty mask")
    return ix, iy, iz


def center_of_mass(mask: VoxelVolume) -> np.ndarray:
    """Mean of foreground voxel centers, in mm."""
    ix, iy, iz = _foreground_indices(mask)
    sx, sy, sz = mask.spacing
    return np.array(
        [(ix.mean() + 0.5) * sx, (iy.mean() + 0.5) * sy, (iz.mean() + 0.5) * sz]
    )


def equivalent_radius(mask: VoxelVolume) -> float:
    """Radius of the sphere whose volume matches the foreground volume."""
    ix, _, _ = _foreground_indices(mask)
    v = ix.size * mask.voxel_volume_mm3
    return float((3.0 * v / (4.0 * np.pi)) ** (1.0 / 3.0))


def _gather_corners(vol: VoxelVolume, pts: np.ndarray):
    """Shared trilinear setup: corner indices, fractions, flat data."""
    sx, sy, sz = vol.spacing
    t = pts / np.array([sx, sy, sz]) - 0.5
    i0 = np.floor(t).astype(np.int64)
    f = t - i0
    return i0, f


def _corner_values(vol: VoxelVolume, i0: np.ndarray, a: int, b: int, c: int) -> np.ndarray:
    nx, ny, nz = vol.dims
    ix = i0[..., 0] + a
    iy = i0[..., 1] + b
    iz = i0[..., 2] + c
    valid = (
        (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny) & (iz >= 0) & (iz < nz)
    )
    flat = (np.clip(iz, 0, nz - 1) * ny + np.clip(iy, 0, ny - 1)) * nx + np.clip(
        ix, 0, nx - 1
    )
    vals = vol.data64().reshape(-1)[flat]
    vals[~valid] = 0.0
    return vals


def sample_trilinear(vol: VoxelVolume, p) -> float | np.ndarray:
    """Trilinear interpolation at physical point(s) p (mm); 0 outside the grid.

    The grid is treated as zero-padded, so values taper to 0 across the
    half-voxel band beyond the outermost voxel centers.
    """
    pts = np.asarray(p, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    i0, f = _gather_corners(vol, pts)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    wx = (1.0 - fx, fx)
    wy = (1.0 - fy, fy)
    wz = (1.0 - fz, fz)
    out = np.zeros(pts.shape[:-1])
    for a in (0, 1):
        for b in (0, 1):
            for c in (0, 1):
                out += _corner_values(vol, i0, a, b, c) * wx[a] * wy[b] * wz[c]
    return float(out[0]) if single else out


def sample_with_radial_deriv(
    vol: VoxelVolume, pts: np.ndarray, dirs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Values and directional derivatives along unit directions `dirs`.

    Exact derivative of the zero-padded trilinear interpolant; used by the
    energy gradients so finite differences of the sampled energy agree.
    """
    i0, f = _gather_corners(vol, pts)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    wx = (1.0 - fx, fx)
    wy = (1.0 - fy, fy)
    wz = (1.0 - fz, fz)
    sgn = (-1.0, 1.0)
    val = np.zeros(pts.shape[:-1])
    gx = np.zeros_like(val)
    gy = np.zeros_like(val)
    gz = np.zeros_like(val)
    for a in (0, 1):
        for b in (0, 1):
            for c in (0, 1):
                v = _corner_values(vol, i0, a, b, c)
                val += v * wx[a] * wy[b] * wz[c]
                gx += v * sgn[a] * wy[b] * wz[c]
                gy += v * wx[a] * sgn[b] * wz[c]
                gz += v * wx[a] * wy[b] * sgn[c]
    sx, sy, sz = vol.spacing
    d = gx / sx * dirs[..., 0] + gy / sy * dirs[..., 1] + gz / sz * dirs[..., 2]
    return val, d
