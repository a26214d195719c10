import type {
  PointAdded,
  SessionCreated,
  SessionState,
  Slab,
  SlabMeta,
  SurfaceUpdate,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function jsonOrThrow<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      detail = JSON.stringify(await resp.json());
    } catch {
      /* keep statusText */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(public base: string) {}

  async uploadVolume(header: object, raw: ArrayBuffer): Promise<string> {
    const form = new FormData();
    form.append("header", new Blob([JSON.stringify(header)], { type: "application/json" }), "header.json");
    form.append("data", new Blob([raw], { type: "application/octet-stream" }), "data.raw");
    const resp = await fetch(`${this.base}/volumes`, { method: "POST", body: form });
    return (await jsonOrThrow<{ volume_id: string }>(resp)).volume_id;
  }

  async createSession(probId: string, imageId?: string,
                      mesh?: { t: number; p: number; scale: number }): Promise<SessionCreated> {
    const resp = await fetch(`${this.base}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ prob_id: probId, image_id: imageId ?? null, mesh }),
    });
    return jsonOrThrow<SessionCreated>(resp);
  }

  async getSession(sid: string): Promise<SessionState> {
    return jsonOrThrow<SessionState>(await fetch(`${this.base}/sessions/${sid}`));
  }

  async addPoint(sid: string, mm: [number, number, number]): Promise<PointAdded> {
    const resp = await fetch(`${this.base}/sessions/${sid}/points`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ x_mm: mm[0], y_mm: mm[1], z_mm: mm[2] }),
    });
    return jsonOrThrow<PointAdded>(resp);
  }

  async deletePoint(sid: string, pid: string): Promise<SurfaceUpdate> {
    const resp = await fetch(`${this.base}/sessions/${sid}/points/${pid}`, { method: "DELETE" });
    return jsonOrThrow<SurfaceUpdate>(resp);
  }

  async undo(sid: string): Promise<SurfaceUpdate> {
    const resp = await fetch(`${this.base}/sessions/${sid}/undo`, { method: "POST" });
    return jsonOrThrow<SurfaceUpdate>(resp);
  }

  async getSlice(sid: string, axis: 0 | 1 | 2, index: number, layer: string): Promise<Slab> {
    const resp = await fetch(
      `${this.base}/sessions/${sid}/slice?axis=${axis}&index=${index}&layer=${layer}`,
    );
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    const [cols, rows] = (resp.headers.get("X-Slab-Dims") ?? "0,0").split(",").map(Number);
    const [colSpacing, rowSpacing] = (resp.headers.get("X-Slab-Spacing") ?? "1,1")
      .split(",").map(Number);
    const volDims = (resp.headers.get("X-Volume-Dims") ?? "0,0,0").split(",").map(Number) as
      [number, number, number];
    const volSpacing = (resp.headers.get("X-Volume-Spacing") ?? "1,1,1").split(",").map(Number) as
      [number, number, number];
    const meta: SlabMeta = { cols, rows, colSpacing, rowSpacing, axis, index, volDims, volSpacing };
    return { data: new Float32Array(await resp.arrayBuffer()), meta };
  }

  async getMesh(sid: string): Promise<{ text: string; version: number }> {
    const resp = await fetch(`${this.base}/sessions/${sid}/mesh`);
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return {
      text: await resp.text(),
      version: Number(resp.headers.get("X-Surface-Version") ?? "-1"),
    };
  }
}
