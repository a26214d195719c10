export interface SurfaceJson {
  origin_mm: [number, number, number];
  n_theta: number;
  n_phi: number;
  scale: number;
  degree: number;
  coeffs: number[];
}

export interface PointInfo {
  id: string;
  x_mm: number;
  y_mm: number;
  z_mm: number;
  rho_mm: number;
}

export interface SessionCreated {
  session_id: string;
  surface: SurfaceJson;
  version: number;
}

export interface SessionState {
  surface: SurfaceJson;
  version: number;
  points: PointInfo[];
  metrics: { residuals_mm: Record<string, number>; n_points: number };
}

export interface PointAdded {
  surface: SurfaceJson;
  version: number;
  point_id: string;
  residual_mm: number;
}

export interface SurfaceUpdate {
  surface: SurfaceJson;
  version: number;
}

/** Geometry of one fetched slice slab. */
export interface SlabMeta {
  cols: number;
  rows: number;
  colSpacing: number;
  rowSpacing: number;
  axis: 0 | 1 | 2;
  index: number;
  volDims: [number, number, number];
  volSpacing: [number, number, number];
}

export interface Slab {
  data: Float32Array;
  meta: SlabMeta;
}

export interface ParsedMesh {
  vertices: Float64Array; // 3 * n
  faces: Uint32Array;     // 3 * m, zero-based
}
