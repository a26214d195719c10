"""HTTP session service: volumes in, surfaces and slices out.

One lock per session keeps mutations single-writer (409 on contention);
reads briefly hold the same lock so they never observe a half-applied edit.
"""

from __future__ import annotations

import hashlib
import io
import json
import threading
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, HTTPException, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .energy import EnergyConfig
from .session import Session, SessionError, create_session
from .surface import MeshParams, SurfaceError, rasterize, surface_to_dict, to_mesh, to_obj
from .volume import VolumeError, VoxelVolume, load_volume


@dataclass(frozen=True)
class ServiceConfig:
    port: int = 8000
    data_dir: Path = Path(".")
    max_sessions: int = 16
    cors: tuple[str, ...] = ()
    ui_dir: Path | None = None

    def __post_init__(self):
        if self.max_sessions < 1:
            raise ValueError("max_sessions must be >= 1")
        if not 0 < self.port < 65536:
            raise ValueError(f"bad port {self.port}")


class MeshModel(BaseModel):
    t: int = 12
    p: int = 16
    scale: int = 0


class SessionRequest(BaseModel):
    prob_id: str
    image_id: str | None = None
    mesh: MeshModel = MeshModel()
    cfg: dict | None = None


class PointRequest(BaseModel):
    x_mm: float
    y_mm: float
    z_mm: float


class _SessionBox:
    def __init__(self, session: Session):
        self.session = session
        self.lock = threading.Lock()
        self.version = 0
        self._mask_cache: tuple[int, VoxelVolume] | None = None

    def mask(self) -> VoxelVolume:
        if self._mask_cache is None or self._mask_cache[0] != self.version:
            grid = self.session.image if self.session.image is not None else self.session.prob
            self._mask_cache = (
                self.version,
                rasterize(self.session.surface, grid.dims, grid.spacing),
            )
        return self._mask_cache[1]


def create_app(cfg: ServiceConfig, energy_cfg: EnergyConfig | None = None) -> FastAPI:
    app = FastAPI(title="splineseg")
    if cfg.cors:
        app.add_middleware(
            CORSMiddleware, allow_origins=list(cfg.cors),
            allow_methods=["*"], allow_headers=["*"], expose_headers=["*"],
        )
    base_cfg = energy_cfg or EnergyConfig()

    volumes: dict[str, VoxelVolume] = {}
    boxes: dict[str, _SessionBox] = {}
    counter = {"session": 0}
    registry_lock = threading.Lock()
    app.state.volumes = volumes
    app.state.boxes = boxes

    data_dir = Path(cfg.data_dir)
    if data_dir.is_dir():
        for header in sorted(data_dir.glob("*.json")):
            try:
                volumes[header.stem] = load_volume(header)
            except VolumeError:
                continue

    def _volume(vid: str) -> VoxelVolume:
        if vid not in volumes:
            raise HTTPException(404, f"unknown volume {vid!r}")
        return volumes[vid]

    def _box(sid: str) -> _SessionBox:
        if sid not in boxes:
            raise HTTPException(404, f"unknown session {sid!r}")
        return boxes[sid]

    def _surface_payload(box: _SessionBox) -> dict:
        return {"surface": surface_to_dict(box.session.surface), "version": box.version}

    @app.post("/volumes")
    async def upload_volume(header: UploadFile = File(...), data: UploadFile = File(...)):
        try:
            meta = json.loads((await header.read()).decode())
            payload = await data.read()
            dims = tuple(int(d) for d in meta["dims"])
            vol = VoxelVolume(dims, tuple(float(s) for s in meta["spacing_mm"]),
                              np.frombuffer(payload, dtype="<f4"), meta["kind"])
        except (KeyError, ValueError, TypeError, VolumeError, json.JSONDecodeError) as e:
            raise HTTPException(400, f"bad volume upload: {e}")
        vid = hashlib.sha256(payload + json.dumps(meta, sort_keys=True).encode()).hexdigest()[:16]
        with registry_lock:
            volumes[vid] = vol
        return {"volume_id": vid}

    @app.post("/sessions", status_code=201)
    def new_session(req: SessionRequest):
        prob = _volume(req.prob_id)
        image = _volume(req.image_id) if req.image_id else None
        with registry_lock:
            if len(boxes) >= cfg.max_sessions:
                raise HTTPException(503, "session limit reached")
            sid = f"s{counter['session']}"
            counter["session"] += 1
        try:
            ecfg = EnergyConfig.from_dict({**base_cfg.to_dict(), **(req.cfg or {})})
            params = MeshParams(req.mesh.t, req.mesh.p, req.mesh.scale)
            session = create_session(prob, params, ecfg, image=image, session_id=sid)
        except (SessionError, SurfaceError, ValueError) as e:
            raise HTTPException(400, str(e))
        boxes[sid] = _SessionBox(session)
        return {"session_id": sid, **_surface_payload(boxes[sid])}

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        box = _box(sid)
        with box.lock:
            sess = box.session
            return {
                **_surface_payload(box),
                "points": [
                    {"id": p.id, "x_mm": p.cartesian[0], "y_mm": p.cartesian[1],
                     "z_mm": p.cartesian[2], "rho_mm": p.rho_u}
                    for p in sess.points
                ],
                "metrics": {
                    "residuals_mm": sess.residuals(),
                    "n_points": len(sess.points),
                },
            }

    @app.post("/sessions/{sid}/points")
    def add_point(sid: str, req: PointRequest):
        box = _box(sid)
        if not box.lock.acquire(blocking=False):
            raise HTTPException(409, "session busy")
        try:
            point, _ = box.session.add_point((req.x_mm, req.y_mm, req.z_mm))
            box.version += 1
            return {
                **_surface_payload(box),
                "point_id": point.id,
                "residual_mm": box.session.residual(point),
            }
        except SessionError as e:
            raise HTTPException(400, str(e))
        finally:
            box.lock.release()

    @app.delete("/sessions/{sid}/points/{pid}")
    def delete_point(sid: str, pid: str):
        box = _box(sid)
        if not box.lock.acquire(blocking=False):
            raise HTTPException(409, "session busy")
        try:
            box.session.remove_point(pid)
            box.version += 1
            return _surface_payload(box)
        except SessionError as e:
            raise HTTPException(404, str(e))
        finally:
            box.lock.release()

    @app.post("/sessions/{sid}/undo")
    def undo(sid: str):
        box = _box(sid)
        if not box.lock.acquire(blocking=False):
            raise HTTPException(409, "session busy")
        try:
            box.session.undo()
            box.version += 1
            return _surface_payload(box)
        except SessionError as e:
            raise HTTPException(400, str(e))
        finally:
            box.lock.release()

    @app.get("/sessions/{sid}/slice")
    def get_slice(sid: str, axis: int, index: int, layer: str = "image"):
        box = _box(sid)
        if axis not in (0, 1, 2):
            raise HTTPException(400, "axis must be 0, 1 or 2")
        with box.lock:
            sess = box.session
            if layer == "image":
                vol = sess.image if sess.image is not None else sess.prob
            elif layer == "prob":
                vol = sess.prob
            elif layer == "mask":
                vol = box.mask()
            else:
                raise HTTPException(400, f"unknown layer {layer!r}")
            nx, ny, nz = vol.dims
            limit = (nx, ny, nz)[axis]
            if not 0 <= index < limit:
                raise HTTPException(400, f"index {index} out of range [0, {limit})")
            if axis == 2:
                slab = vol.data[index]                    # rows y, cols x
                dims, spac = (nx, ny), (vol.spacing[0], vol.spacing[1])
            elif axis == 1:
                slab = vol.data[:, index, :]              # rows z, cols x
                dims, spac = (nx, nz), (vol.spacing[0], vol.spacing[2])
            else:
                slab = vol.data[:, :, index]              # rows z, cols y
                dims, spac = (ny, nz), (vol.spacing[1], vol.spacing[2])
            headers = {
                "X-Slab-Dims": f"{dims[0]},{dims[1]}",
                "X-Slab-Spacing": f"{spac[0]},{spac[1]}",
                "X-Volume-Dims": f"{nx},{ny},{nz}",
                "X-Volume-Spacing": f"{vol.spacing[0]},{vol.spacing[1]},{vol.spacing[2]}",
                "X-Axis": str(axis),
                "X-Index": str(index),
            }
            return Response(
                content=np.ascontiguousarray(slab, dtype="<f4").tobytes(),
                media_type="application/octet-stream",
                headers=headers,
            )

    @app.get("/sessions/{sid}/mesh")
    def get_mesh(sid: str):
        box = _box(sid)
        with box.lock:
            obj = to_obj(to_mesh(box.session.surface))
            return Response(content=obj, media_type="text/plain",
                            headers={"X-Surface-Version": str(box.version)})

    @app.get("/sessions/{sid}/mask")
    def get_mask(sid: str):
        box = _box(sid)
        with box.lock:
            mask = box.mask()
        buf = io.BytesIO()
        header = {
            "dims": list(mask.dims), "spacing_mm": list(mask.spacing),
            "kind": mask.kind, "dtype": "f32le", "data": "mask.raw",
        }
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
            zf.writestr("mask.json", json.dumps(header, sort_keys=True))
            zf.writestr("mask.raw", np.ascontiguousarray(mask.data, dtype="<f4").tobytes())
        return Response(content=buf.getvalue(), media_type="application/zip")

    if cfg.ui_dir is not None and Path(cfg.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(cfg.ui_dir), html=True), name="ui")

    return app
