"""Volumetric overlap and distance metrics between binary masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .volume import VoxelVolume, VolumeError

_FACE_STRUCT = ndimage.generate_binary_structure(3, 1)   # 6-connectivity
_FULL_STRUCT = ndimage.generate_binary_structure(3, 3)   # 26-connectivity


@dataclass(frozen=True)
class MetricResult:
    dice: float
    hausdorff: float
    directed_ab: float
    directed_ba: float


def _check_pair(a: VoxelVolume, b: VoxelVolume):
    if a.dims != b.dims or a.spacing != b.spacing:
        raise VolumeError(f"grid mismatch: {a.dims}/{a.spacing} vs {b.dims}/{b.spacing}")


def dice(a: VoxelVolume, b: VoxelVolume) -> float:
    """2|A∩B| / (|A|+|B|); 1.0 when both masks are empty."""
    _check_pair(a, b)
    fa = a.data > 0.5
    fb = b.data > 0.5
    na, nb = int(fa.sum()), int(fb.sum())
    if na + nb == 0:
        return 1.0
    return 2.0 * int((fa & fb).sum()) / (na + nb)


def boundary_voxels(m: VoxelVolume) -> np.ndarray:
    """Foreground voxels with at least one of their 6 neighbors background.

    Voxels on the grid border count as boundary (outside is background).
    """
    fg = m.data > 0.5
    eroded = ndimage.binary_erosion(fg, structure=_FACE_STRUCT, border_value=0)
    return fg & ~eroded


def hausdorff(a: VoxelVolume, b: VoxelVolume, units: str = "voxel") -> float:
    """Exact symmetric Hausdorff distance between boundary voxel centers."""
    _check_pair(a, b)
    if units not in ("voxel", "mm"):
        raise VolumeError(f"unknown units {units!r}")
    ba = boundary_voxels(a)
    bb = boundary_voxels(b)
    if not ba.any() or not bb.any():
        raise VolumeError("hausdorff needs two non-empty masks")
    sampling = a.spacing[::-1] if units == "mm" else (1.0, 1.0, 1.0)
    d_to_b = ndimage.distance_transform_edt(~bb, sampling=sampling)
    d_to_a = ndimage.distance_transform_edt(~ba, sampling=sampling)
    ab = float(d_to_b[ba].max())
    ba_ = float(d_to_a[bb].max())
    return max(ab, ba_)


def metric_pair(a: VoxelVolume, b: VoxelVolume, units: str = "voxel") -> MetricResult:
    _check_pair(a, b)
    ba = boundary_voxels(a)
    bb = boundary_voxels(b)
    if not ba.any() or not bb.any():
        raise VolumeError("metrics need two non-empty masks")
    sampling = a.spacing[::-1] if units == "mm" else (1.0, 1.0, 1.0)
    d_to_b = ndimage.distance_transform_edt(~bb, sampling=sampling)
    d_to_a = ndimage.distance_transform_edt(~ba, sampling=sampling)
    ab = float(d_to_b[ba].max())
    ba_ = float(d_to_a[bb].max())
    return MetricResult(dice(a, b), max(ab, ba_), ab, ba_)


def component_stats(m: VoxelVolume) -> dict:
    """Foreground components (6-conn), enclosed cavities (26-conn background),
    and foreground volume in mm^3."""
    fg = m.data > 0.5
    _, n_components = ndimage.label(fg, structure=_FACE_STRUCT)
    bg_labels, n_bg = ndimage.label(~fg, structure=_FULL_STRUCT)
    touching = set()
    for sl in (bg_labels[0], bg_labels[-1], bg_labels[:, 0], bg_labels[:, -1],
               bg_labels[:, :, 0], bg_labels[:, :, -1]):
        touching.update(np.unique(sl))
    touching.discard(0)
    cavities = n_bg - len(touching)
    return {
        "components": int(n_components),
        "cavities": int(cavities),
        "volume": float(fg.sum() * m.voxel_volume_mm3),
    }
