import { ApiClient, ApiError } from "./api.js";
import { intersectMeshWithPlane, type Segment } from "./contour.js";
import { clampIndex, pixelToMm, planeCoordMm } from "./geometry.js";
import { SessionStore, defaultSettings, type ViewSettings } from "./state.js";
import { renderSlice } from "./slice_view.js";
import { MeshView } from "./volume3d.js";
import type { Slab } from "./types.js";

const AXES: Array<0 | 1 | 2> = [2, 1, 0]; // axial, coronal, sagittal panes

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(location.search);
  const base = params.get("api") ?? "";
  const probId = params.get("prob");
  if (!probId) {
    el<HTMLElement>("status").textContent =
      "add ?prob=<volume_id> (and optional &image=<volume_id>) to the URL";
    return;
  }
  const api = new ApiClient(base);
  const store = new SessionStore();
  const created = await api.createSession(probId, params.get("image") ?? undefined);
  const sid = created.session_id;
  store.applySurface(created.surface, created.version);

  const firstSlab = await api.getSlice(sid, 2, 0, "image");
  const dims = firstSlab.meta.volDims;
  const settings: ViewSettings = defaultSettings(dims);

  const canvases = AXES.map((axis, i) => el<HTMLCanvasElement>(`slice${i}`));
  const meshView = new MeshView(el<HTMLCanvasElement>("mesh"));
  const slabs: Array<{ base: Slab; prob: Slab | null }> = new Array(AXES.length);

  async function fetchSlab(i: number): Promise<void> {
    const axis = AXES[i];
    const index = settings.slice[axis];
    const base_ = await api.getSlice(sid, axis, index, "image");
    const prob = settings.showProb ? await api.getSlice(sid, axis, index, "prob") : null;
    slabs[i] = { base: base_, prob };
  }

  function contoursFor(i: number): Segment[] {
    if (!store.mesh) return [];
    const axis = AXES[i];
    const meta = slabs[i].base.meta;
    return intersectMeshWithPlane(store.mesh, axis, planeCoordMm(meta));
  }

  function redraw(): void {
    for (let i = 0; i < AXES.length; i++) {
      if (!slabs[i]) continue;
      renderSlice(canvases[i], slabs[i], settings, contoursFor(i), store.points);
    }
    el<HTMLElement>("status").textContent =
      (store.mutationInFlight ? "working… " : "") +
      (store.notice || `session ${sid} · surface v${store.version}` +
        (store.lastResidual != null
          ? ` · residual ${store.lastResidual.toFixed(2)} mm` : ""));
    el<HTMLElement>("meshVersion").textContent =
      `mesh v${meshView.versionBadge}${meshView.stale ? " (stale)" : ""}`;
  }

  async function refreshAll(): Promise<void> {
    const state = await api.getSession(sid);
    store.applySession(state.surface, state.version, state.points,
                       state.metrics.residuals_mm);
    try {
      const mesh = await api.getMesh(sid);
      store.applyMesh(mesh.text, mesh.version);
      meshView.setMesh(store.mesh!, mesh.version);
      meshView.setPoints(store.points);
    } catch {
      meshView.markStale();
      store.setNotice("mesh fetch failed; showing stale mesh");
    }
    await Promise.all(AXES.map((_, i) => fetchSlab(i)));
    redraw();
  }

  store.onChange(redraw);

  canvases.forEach((canvas, i) => {
    canvas.addEventListener("click", async (ev) => {
      if (!store.beginMutation()) return;
      try {
        const rect = canvas.getBoundingClientRect();
        const px = ((ev.clientX - rect.left) / rect.width) * canvas.width;
        const py = ((ev.clientY - rect.top) / rect.height) * canvas.height;
        const mm = pixelToMm(slabs[i].base.meta, px - 0.5, py - 0.5);
        const added = await api.addPoint(sid, mm);
        store.lastResidual = added.residual_mm;
        await refreshAll();
      } catch (err) {
        store.setNotice(err instanceof ApiError ? `edit failed: ${err.message}`
                                                : String(err));
      } finally {
        store.endMutation();
      }
    });
    canvas.addEventListener("wheel", async (ev) => {
      ev.preventDefault();
      const axis = AXES[i];
      settings.slice[axis] = clampIndex(dims, axis,
                                        settings.slice[axis] + (ev.deltaY > 0 ? 1 : -1));
      await fetchSlab(i);
      redraw();
    });
  });

  el<HTMLButtonElement>("undo").addEventListener("click", async () => {
    if (!store.beginMutation()) return;
    try {
      await api.undo(sid);
      store.lastResidual = null;
      await refreshAll();
    } catch (err) {
      store.setNotice(err instanceof ApiError ? `undo failed: ${err.message}`
                                              : String(err));
    } finally {
      store.endMutation();
    }
  });

  el<HTMLInputElement>("probToggle").addEventListener("change", async (ev) => {
    settings.showProb = (ev.target as HTMLInputElement).checked;
    await Promise.all(AXES.map((_, i) => fetchSlab(i)));
    redraw();
  });

  await refreshAll();
}

boot().catch((err) => {
  el<HTMLElement>("status").textContent = `failed to start: ${err}`;
});
