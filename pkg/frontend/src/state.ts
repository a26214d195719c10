import { parseObj } from "./obj.js";
import type { ParsedMesh, PointInfo, SurfaceJson } from "./types.js";

export interface ViewSettings {
  slice: [number, number, number];   // active index per axis
  window: number;
  level: number;
  showProb: boolean;
  showContour: boolean;
  showPoints: boolean;
}

export function defaultSettings(dims: [number, number, number]): ViewSettings {
  return {
    slice: [Math.floor(dims[0] / 2), Math.floor(dims[1] / 2), Math.floor(dims[2] / 2)],
    window: 1.0,
    level: 0.5,
    showProb: false,
    showContour: true,
    showPoints: true,
  };
}

/**
 * The whole UI draws from this store: (last service response, view settings).
 * At most one mutation is in flight; further clicks are rejected until the
 * response lands, mirroring the service's 409 contract.
 */
export class SessionStore {
  surface: SurfaceJson | null = null;
  points: PointInfo[] = [];
  residuals: Record<string, number> = {};
  version = -1;
  mesh: ParsedMesh | null = null;
  meshVersion = -1;
  lastResidual: number | null = null;
  notice = "";
  private pending = false;
  private listeners: Array<() => void> = [];

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  get mutationInFlight(): boolean {
    return this.pending;
  }

  /** Reserve the single mutation slot; false means a request is in flight. */
  beginMutation(): boolean {
    if (this.pending) {
      this.notice = "busy: previous edit still running";
      this.emit();
      return false;
    }
    this.pending = true;
    this.emit();
    return true;
  }

  endMutation(): void {
    this.pending = false;
    this.emit();
  }

  applySurface(surface: SurfaceJson, version: number): void {
    this.surface = surface;
    this.version = version;
    this.notice = "";
    this.emit();
  }

  applySession(surface: SurfaceJson, version: number, points: PointInfo[],
               residuals: Record<string, number>): void {
    this.points = points;
    this.residuals = residuals;
    this.applySurface(surface, version);
  }

  applyMesh(objText: string, version: number): void {
    this.mesh = parseObj(objText);
    this.meshVersion = version;
    this.emit();
  }

  setNotice(msg: string): void {
    this.notice = msg;
    this.emit();
  }
}
