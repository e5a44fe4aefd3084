"""HTTP session API: create simulated worlds, act in them, fork them.

Wraps rollout sessions behind a small JSON/PNG surface a browser can
use. Sessions are kept in memory, keyed by deterministic ids; with a
fixed server seed and an identical request sequence, the returned frame
bytes are identical across server restarts. Each session takes one
action at a time (the busy guard returns 409), different sessions run
freely in parallel.
"""
from __future__ import annotations

import base64
import difflib
import io
import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from PIL import Image
from pydantic import BaseModel

from .env import UnknownActionError, all_sentences, parse, random_scene, render, vocabulary
from .numerics import RngStream
from .rollout import RolloutError, Session
from .rollout import fork as fork_session
from .training import ModelBundle

FRAME_SIDE = 32


def frame_to_png(frame: np.ndarray) -> str:
    """Float [0,1] RGB frame -> base64 PNG string."""
    arr = np.clip(np.asarray(frame, dtype=np.float64) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def png_to_frame(data: str) -> np.ndarray:
    """base64 PNG -> float32 [0,1] RGB frame; must be 32x32."""
    try:
        img = Image.open(io.BytesIO(base64.b64decode(data, validate=True)))
        img = img.convert("RGB")
    except Exception as err:
        raise ValueError(f"not a decodable PNG: {err}") from err
    if img.size != (FRAME_SIDE, FRAME_SIDE):
        raise ValueError(f"frame must be {FRAME_SIDE}x{FRAME_SIDE}, got {img.size}")
    return np.asarray(img, dtype=np.float32) / np.float32(255.0)


class CreateSessionBody(BaseModel):
    init: dict
    ckpt_id: str


class ActionBody(BaseModel):
    text: str


@dataclass
class _SessionRecord:
    session: Session
    frames: list[str] = field(default_factory=list)  # base64 PNGs, cursor order
    lock: threading.Lock = field(default_factory=threading.Lock)


def create_app(checkpoints: dict[str, ModelBundle], server_seed: int = 0,
               cfg_scale: float = 4.0) -> FastAPI:
    """App over preloaded checkpoints; server_seed fixes all session rngs."""
    app = FastAPI(title="glp world service")
    records: dict[str, _SessionRecord] = {}
    app.state.records = records  # introspection for tests and debugging
    counter = threading.Lock()
    state = {"n": 0}

    def next_id() -> str:
        with counter:
            n = state["n"]
            state["n"] += 1
        return f"s{n}"

    def record_of(session_id: str) -> _SessionRecord:
        rec = records.get(session_id)
        if rec is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return rec

    def register(session: Session, first_frame: np.ndarray) -> dict:
        rec = _SessionRecord(session, [frame_to_png(first_frame)])
        records[session.id] = rec
        return {"session_id": session.id, "first_frame": rec.frames[0]}

    @app.get("/grammar")
    def grammar() -> dict:
        return {"sentences": all_sentences(), "vocabulary": vocabulary()}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody) -> dict:
        bundle = checkpoints.get(body.ckpt_id)
        if bundle is None:
            raise HTTPException(404, f"unknown checkpoint {body.ckpt_id!r}")
        keys = set(body.init)
        if keys == {"env_seed"}:
            scene = random_scene(RngStream(int(body.init["env_seed"]), "scene"))
            frame = render(scene)
        elif keys == {"frame_png_base64"}:
            try:
                frame = png_to_frame(body.init["frame_png_base64"])
            except ValueError as err:
                raise HTTPException(400, str(err)) from err
        else:
            raise HTTPException(
                400, "init must have exactly one of env_seed or frame_png_base64")
        sid = next_id()
        rng = RngStream(server_seed, f"session/{sid}")
        session = Session(bundle, frame, rng, cfg_scale=cfg_scale, id=sid)
        return register(session, frame)

    @app.get("/sessions/{session_id}")
    def session_resource(session_id: str) -> dict:
        rec = record_of(session_id)
        busy = rec.lock.locked()
        return {
            "session_id": session_id,
            "status": "busy" if busy else "ready",
            "step": rec.session.step_count,
            "frame_cursor": len(rec.frames),
            "parent_id": rec.session.parent_id,
        }

    @app.post("/sessions/{session_id}/actions")
    def act(session_id: str, body: ActionBody) -> dict:
        rec = record_of(session_id)
        try:
            parse(body.text)
        except UnknownActionError as err:
            near = difflib.get_close_matches(body.text, all_sentences(), n=3, cutoff=0.0)
            raise HTTPException(422, {"error": str(err), "suggestions": near}) from err
        if not rec.lock.acquire(blocking=False):
            raise HTTPException(409, f"session {session_id!r} is busy")
        try:
            try:
                _, frames = rec.session.step(body.text)
            except RolloutError as err:
                raise HTTPException(500, str(err)) from err
            pngs = [frame_to_png(f) for f in frames]
            rec.frames.extend(pngs)
            return {
                "step": rec.session.step_count,
                "frames": pngs,
                "latent_summary": rec.session.history[-1].state_norms,
            }
        finally:
            rec.lock.release()

    @app.post("/sessions/{session_id}/fork", status_code=201)
    def fork(session_id: str) -> dict:
        rec = record_of(session_id)
        if not rec.lock.acquire(blocking=False):
            raise HTTPException(409, f"session {session_id!r} is busy")
        try:
            child = fork_session(rec.session)
            child.id = next_id()
            records[child.id] = _SessionRecord(child, list(rec.frames))
            return {"session_id": child.id, "step": child.step_count}
        finally:
            rec.lock.release()

    @app.get("/sessions/{session_id}/frames")
    def frames(session_id: str, start: int = Query(0, alias="from")) -> dict:
        rec = record_of(session_id)
        start = max(0, start)
        return {"from": start, "frames": rec.frames[start:], "total": len(rec.frames)}

    return app
