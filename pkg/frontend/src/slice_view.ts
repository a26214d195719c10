import { distanceToPlane, mmToPixel, mmToPlane } from "./geometry.js";
import type { Segment } from "./contour.js";
import type { PointInfo, Slab } from "./types.js";
import type { ViewSettings } from "./state.js";

export interface SliceLayers {
  base: Slab;
  prob?: Slab | null;
}

/** Render one orthogonal slice: windowed image, optional probability tint,
 * contour polyline, and the user points lying near the plane. */
export function renderSlice(
  canvas: HTMLCanvasElement,
  layers: SliceLayers,
  settings: ViewSettings,
  contour: Segment[],
  points: PointInfo[],
): void {
  const { data, meta } = layers.base;
  canvas.width = meta.cols;
  canvas.height = meta.rows;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const img = ctx.createImageData(meta.cols, meta.rows);
  const lo = settings.level - settings.window / 2;
  const scale = 255 / Math.max(settings.window, 1e-6);
  const prob = settings.showProb && layers.prob ? layers.prob.data : null;
  for (let i = 0; i < data.length; i++) {
    const g = Math.max(0, Math.min(255, (data[i] - lo) * scale));
    img.data[4 * i] = g;
    img.data[4 * i + 1] = prob ? Math.min(255, g + 120 * prob[i]) : g;
    img.data[4 * i + 2] = g;
    img.data[4 * i + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);

  if (settings.showContour && contour.length) {
    ctx.strokeStyle = "#ff3333";
    ctx.lineWidth = 1.2;
    ctx.beginPath();
    for (const [x1, y1, x2, y2] of contour) {
      // contour coords are in-plane mm; pixels are voxel units of the slab
      ctx.moveTo(x1 / meta.colSpacing, y1 / meta.rowSpacing);
      ctx.lineTo(x2 / meta.colSpacing, y2 / meta.rowSpacing);
    }
    ctx.stroke();
  }

  if (settings.showPoints) {
    const half = meta.volSpacing[meta.axis] / 2;
    for (const p of points) {
      const mm: [number, number, number] = [p.x_mm, p.y_mm, p.z_mm];
      if (distanceToPlane(meta, mm) > half) continue;
      const [px, py] = mmToPixel(meta, mm);
      ctx.fillStyle = "#33ee55";
      ctx.beginPath();
      ctx.arc(px, py, 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}
