import { colRowAxes } from "./geometry.js";
import type { ParsedMesh } from "./types.js";

/** One contour segment in the slab's (col, row) mm coordinates. */
export type Segment = [number, number, number, number];

/**
 * Intersect the surface mesh with a slice plane (axis = planeCoord mm).
 * Classic marching-triangle: each triangle crossing the plane contributes
 * one segment.  Runs client-side so slicing needs no extra endpoint.
 */
export function intersectMeshWithPlane(
  mesh: ParsedMesh,
  axis: 0 | 1 | 2,
  planeCoord: number,
): Segment[] {
  const [ca, ra] = colRowAxes(axis);
  const v = mesh.vertices;
  const f = mesh.faces;
  const segments: Segment[] = [];
  const pts: Array<[number, number]> = [];
  for (let t = 0; t < f.length; t += 3) {
    pts.length = 0;
    for (let e = 0; e < 3; e++) {
      const i = f[t + e] * 3;
      const j = f[t + ((e + 1) % 3)] * 3;
      const di = v[i + axis] - planeCoord;
      const dj = v[j + axis] - planeCoord;
      if ((di <= 0 && dj > 0) || (di > 0 && dj <= 0)) {
        const s = di / (di - dj);
        pts.push([
          v[i + ca] + s * (v[j + ca] - v[i + ca]),
          v[i + ra] + s * (v[j + ra] - v[i + ra]),
        ]);
      }
    }
    if (pts.length === 2) {
      segments.push([pts[0][0], pts[0][1], pts[1][0], pts[1][1]]);
    }
  }
  return segments;
}

/** Min distance from an in-plane point to the contour, in mm. */
export function distanceToContour(segments: Segment[], p: [number, number]): number {
  let best = Infinity;
  for (const [x1, y1, x2, y2] of segments) {
    const dx = x2 - x1;
    const dy = y2 - y1;
    const len2 = dx * dx + dy * dy;
    let t = len2 > 0 ? ((p[0] - x1) * dx + (p[1] - y1) * dy) / len2 : 0;
    t = Math.max(0, Math.min(1, t));
    const qx = x1 + t * dx;
    const qy = y1 + t * dy;
    best = Math.min(best, Math.hypot(p[0] - qx, p[1] - qy));
  }
  return best;
}
