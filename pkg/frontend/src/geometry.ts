import type { SlabMeta } from "./types.js";

/**
 * Slab axes follow the service convention:
 *   axis 2 (axial)    -> cols = x, rows = y
 *   axis 1 (coronal)  -> cols = x, rows = z
 *   axis 0 (sagittal) -> cols = y, rows = z
 * One logical pixel equals one voxel of the slab; voxel centers sit at
 * (i + 0.5) * spacing.
 */

const COL_AXIS: Record<number, number> = { 0: 1, 1: 0, 2: 0 };
const ROW_AXIS: Record<number, number> = { 0: 2, 1: 2, 2: 1 };

export function colRowAxes(axis: 0 | 1 | 2): [number, number] {
  return [COL_AXIS[axis], ROW_AXIS[axis]];
}

/** Center of the clicked pixel in volume mm coordinates. */
export function pixelToMm(meta: SlabMeta, px: number, py: number): [number, number, number] {
  const [ca, ra] = colRowAxes(meta.axis);
  const mm: [number, number, number] = [0, 0, 0];
  mm[ca] = (px + 0.5) * meta.volSpacing[ca];
  mm[ra] = (py + 0.5) * meta.volSpacing[ra];
  mm[meta.axis] = (meta.index + 0.5) * meta.volSpacing[meta.axis];
  return mm;
}

/** Inverse of pixelToMm for points on (or near) the slab plane. */
export function mmToPixel(meta: SlabMeta, mm: [number, number, number]): [number, number] {
  const [ca, ra] = colRowAxes(meta.axis);
  return [mm[ca] / meta.volSpacing[ca] - 0.5, mm[ra] / meta.volSpacing[ra] - 0.5];
}

/** In-plane (col, row) mm coordinates of an arbitrary 3D mm point. */
export function mmToPlane(axis: 0 | 1 | 2, mm: [number, number, number]): [number, number] {
  const [ca, ra] = colRowAxes(axis);
  return [mm[ca], mm[ra]];
}

export function planeCoordMm(meta: SlabMeta): number {
  return (meta.index + 0.5) * meta.volSpacing[meta.axis];
}

export function sliceCount(dims: [number, number, number], axis: 0 | 1 | 2): number {
  return dims[axis];
}

export function clampIndex(dims: [number, number, number], axis: 0 | 1 | 2, index: number): number {
  return Math.max(0, Math.min(dims[axis] - 1, Math.round(index)));
}

/** Distance from a point to the slab plane, in mm. */
export function distanceToPlane(meta: SlabMeta, mm: [number, number, number]): number {
  return Math.abs(mm[meta.axis] - planeCoordMm(meta));
}
