"""HTTP session service: create sessions, submit steps, fetch renders.

JSON bodies carry base64-embedded binaries (PNG image, PFM depth) so the
API stays curl-testable; renders come back as a fixed-boundary
multipart/mixed body (PNG frame + PFM depth). Poses travel as row-major
12-number [R | t] arrays, in query strings as comma-separated values.

Steps are synchronous and mutually exclusive per session: a second step
while one is in flight gets 409. Read-only renders serialize behind any
in-flight step and never mutate state. Pipeline failures surface as 422
with the failing stage's label.

Environment knobs (read by create_app defaults and the CLI `serve`):
  SPLATFORGE_BIND           host:port to bind (default 127.0.0.1:8411)
  SPLATFORGE_MAX_SESSIONS   session cap (default 64; excess creates 429)
  SPLATFORGE_MAX_IMAGE_PX   max pixels per image (default 1048576; 413)
"""

from __future__ import annotations

import base64
import binascii
import os
import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .errors import EngineError, StageError
from .gaussians import encode_ply
from .geometry import Intrinsics, Pose
from .imaging import encode_pfm, encode_png, decode_pfm, decode_png, DepthMap
from .pipeline import (
    REFERENCE_GPU_SECONDS,
    PipelineConfig,
    init_session,
    step as pipeline_step,
)
from .renderer import render_view

DEFAULT_BIND = "127.0.0.1:8411"
DEFAULT_MAX_SESSIONS = 64
DEFAULT_MAX_IMAGE_PX = 1 << 20

MULTIPART_BOUNDARY = "splatforge-frame"


class ApiError(Exception):
    def __init__(self, status: int, detail: str):
        self.status = status
        self.detail = detail


@dataclass
class _Session:
    id: str
    state: object
    created_at: float
    lock: threading.Lock = field(default_factory=threading.Lock)
    frames: dict = field(default_factory=dict)  # step index -> png bytes


def _field(payload: dict, name: str):
    if name not in payload or payload[name] is None:
        raise ApiError(400, f"missing field: {name}")
    return payload[name]


def _b64(payload: dict, name: str) -> bytes:
    try:
        return base64.b64decode(_field(payload, name), validate=True)
    except (binascii.Error, ValueError):
        raise ApiError(400, f"invalid base64 in field: {name}") from None


def _pose_from(value, where: str) -> Pose:
    try:
        numbers = [float(v) for v in value]
        if len(numbers) != 12:
            raise ValueError
        return Pose.from_array12(numbers)
    except (TypeError, ValueError, EngineError):
        raise ApiError(400, f"invalid pose in {where}: expected 12-number row-major [R|t]") from None


def _pose_from_query(text: str) -> Pose:
    return _pose_from(text.split(","), "query")


def create_app(max_sessions: int | None = None,
               max_image_px: int | None = None) -> FastAPI:
    if max_sessions is None:
        max_sessions = int(os.environ.get("SPLATFORGE_MAX_SESSIONS", DEFAULT_MAX_SESSIONS))
    if max_image_px is None:
        max_image_px = int(os.environ.get("SPLATFORGE_MAX_IMAGE_PX", DEFAULT_MAX_IMAGE_PX))

    app = FastAPI(title="splatforge", version="0.1.0")
    sessions: dict = {}
    registry_lock = threading.Lock()

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"detail": exc.detail})

    def get_session(session_id: str) -> _Session:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise ApiError(404, f"unknown session: {session_id}")
        return session

    @app.post("/session", status_code=201)
    async def create_session(payload: dict):
        with registry_lock:
            if len(sessions) >= max_sessions:
                raise ApiError(429, f"session cap reached ({max_sessions})")

        try:
            intr = Intrinsics.from_dict(_field(payload, "intrinsics"))
        except (KeyError, TypeError, ValueError):
            raise ApiError(400, "invalid field: intrinsics") from None
        if intr.width * intr.height > max_image_px:
            raise ApiError(413, f"image exceeds {max_image_px} pixels")
        pose = _pose_from(_field(payload, "pose"), "field pose")

        try:
            image = decode_png(_b64(payload, "image"))
        except EngineError as exc:
            raise ApiError(400, f"invalid field: image ({exc})") from None
        try:
            depth = DepthMap(decode_pfm(_b64(payload, "depth")))
        except (EngineError, ValueError) as exc:
            raise ApiError(400, f"invalid field: depth ({exc})") from None

        overrides = payload.get("config") or {}
        try:
            config = PipelineConfig(**{
                "width": image.width, "height": image.height, **overrides})
            config.validate()
        except (TypeError, ValueError) as exc:
            raise ApiError(400, f"invalid field: config ({exc})") from None

        try:
            state = init_session(image, depth, pose, intr, config)
        except EngineError as exc:
            raise ApiError(400, f"invalid session inputs: {exc}") from None

        session = _Session(id=uuid.uuid4().hex, state=state, created_at=time.time())
        with registry_lock:
            if len(sessions) >= max_sessions:
                raise ApiError(429, f"session cap reached ({max_sessions})")
            sessions[session.id] = session
        return {
            "id": session.id,
            "created_at": session.created_at,
            "config": state.config.to_dict(),
            "gaussian_count": len(state.global_gaussians),
        }

    @app.post("/session/{session_id}/step")
    async def post_step(session_id: str, payload: dict):
        session = get_session(session_id)
        pose = _pose_from(_field(payload, "pose"), "field pose")
        prompt = str(payload.get("prompt", ""))
        if not session.lock.acquire(blocking=False):
            raise ApiError(409, "a step is already in flight for this session")
        try:
            try:
                _, render, timing = pipeline_step(session.state, pose, prompt)
            except StageError as exc:
                raise ApiError(422, str(exc)) from None
            frame_index = session.state.step_count - 1
            session.frames[frame_index] = encode_png(render.color)
        finally:
            session.lock.release()
        return {
            "frame_url": f"/session/{session_id}/frame/{frame_index}.png",
            "timing": timing.to_dict(),
            "aggregate": timing.aggregate(),
            "reference_gpu_seconds": REFERENCE_GPU_SECONDS,
            "gaussian_count": len(session.state.global_gaussians),
            "step_count": session.state.step_count,
        }

    @app.get("/session/{session_id}/frame/{index}.png")
    async def get_frame(session_id: str, index: int):
        session = get_session(session_id)
        blob = session.frames.get(index)
        if blob is None:
            raise ApiError(404, f"no stored frame {index}")
        return Response(content=blob, media_type="image/png")

    @app.get("/session/{session_id}/render")
    async def get_render(session_id: str, pose: str):
        session = get_session(session_id)
        query_pose = _pose_from_query(pose)
        with session.lock:  # renders queue behind an in-flight step
            state = session.state
            out = render_view(state.global_gaussians, query_pose, state.intrinsics,
                              tau=state.config.tau, threads=state.config.threads)
        png = encode_png(out.color)
        pfm = encode_pfm(out.depth.data)
        b = MULTIPART_BOUNDARY.encode()
        body = b"".join([
            b"--", b, b"\r\n",
            b"Content-Type: image/png\r\n",
            b'Content-Disposition: inline; name="color"; filename="render.png"\r\n\r\n',
            png, b"\r\n",
            b"--", b, b"\r\n",
            b"Content-Type: application/x-portable-floatmap\r\n",
            b'Content-Disposition: inline; name="depth"; filename="render.pfm"\r\n\r\n',
            pfm, b"\r\n",
            b"--", b, b"--\r\n",
        ])
        return Response(content=body,
                        media_type=f"multipart/mixed; boundary={MULTIPART_BOUNDARY}")

    @app.get("/session/{session_id}/export.ply")
    async def export_scene(session_id: str):
        session = get_session(session_id)
        with session.lock:
            blob = encode_ply(session.state.global_gaussians)
        return Response(content=blob, media_type="application/octet-stream")

    @app.get("/session/{session_id}")
    async def get_metadata(session_id: str):
        session = get_session(session_id)
        state = session.state
        return {
            "id": session.id,
            "created_at": session.created_at,
            "step_count": state.step_count,
            "prompts": state.prompts,
            "config": state.config.to_dict(),
            "intrinsics": state.intrinsics.to_dict(),
            "gaussian_count": len(state.global_gaussians),
        }

    return app


def serve(bind: str | None = None, **app_kwargs) -> None:
    """Run the service with uvicorn (blocking)."""
    import uvicorn

    bind = bind or os.environ.get("SPLATFORGE_BIND", DEFAULT_BIND)
    host, _, port = bind.rpartition(":")
    uvicorn.run(create_app(**app_kwargs), host=host or "127.0.0.1", port=int(port))
