"""HTTP service with stateful sessions for human-in-the-loop reshaping.

A session holds a scene, an admissible region, the current trajectory, and an
undo history.  ``reshape`` previews a command (original/modified/clipped
triple) without mutating the session; ``accept`` installs the clipped
preview; ``undo`` pops history.  The oracle engine (parse + handcrafted
fields) serves as a checkpoint-free reference; the model engine decodes with
a trained network.

Machine-readable errors: every 4xx body is {"error": {"code", "message",
"field"?}}.  Validation failures return 400 with the offending field path.
"""

from __future__ import annotations

import json
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field as dc_field

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .constraints import AdmissibleRegion, project_trajectory
from .estimator import TrajectoryReshaper
from .fields import apply_field, make_field
from .geometry import (Scene, Trajectory, random_walk_spline, scene_from_dict,
                       scene_to_dict, trajectory_to_dict)
from .intents import ParseError, parse_intent

DEFAULT_N_WAYPOINTS = 40


class ApiError(Exception):
    """Carries an HTTP status and machine-readable error code."""

    def __init__(self, status: int, code: str, message: str,
                 field_path: str | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.field_path = field_path
        super().__init__(message)

    def body(self) -> dict:
        err = {"code": self.code, "message": self.message}
        if self.field_path:
            err["field"] = self.field_path
        return {"error": err}


# -- request schemas ---------------------------------------------------------

class ObjectModel(BaseModel):
    name: str
    position: list[float]


class SceneModel(BaseModel):
    objects: list[ObjectModel] = []


class TrajectoryModel(BaseModel):
    waypoints: list[list[float]]


class RegionModel(BaseModel):
    keep_in: list[list[float]] | None = None
    keep_out: list[list[list[float]]] = []


class CreateSessionModel(BaseModel):
    scene: SceneModel
    trajectory: TrajectoryModel | None = None
    region: RegionModel | None = None
    seed: int = 0
    engine: str | None = None


class ReshapeModel(BaseModel):
    text: str
    lf: float | None = None
    accept: bool = False


# -- session state -----------------------------------------------------------

@dataclass
class SessionState:
    id: str
    scene: Scene
    region: AdmissibleRegion
    current: Trajectory
    engine: str
    history: list[dict] = dc_field(default_factory=list)
    pending: dict | None = None
    lock: threading.Lock = dc_field(default_factory=threading.Lock)

    def public_state(self) -> dict:
        pending = None
        if self.pending is not None:
            pending = {k: v for k, v in self.pending.items() if k != "attention"}
        return {
            "id": self.id,
            "engine": self.engine,
            "scene": scene_to_dict(self.scene),
            "region": self.region.to_dict(),
            "current": trajectory_to_dict(self.current),
            "history": [{"text": h["text"], "lf": h["lf"]} for h in self.history],
            "history_depth": len(self.history),
            "pending": pending,
        }


def _attention_json(attn: dict | None) -> dict | None:
    if attn is None:
        return None
    def avg(mats):
        return [m.mean(axis=(0, 1)).tolist() for m in mats]
    return {"encoder": avg(attn["encoder"]),
            "decoder_self": avg(attn["decoder_self"]),
            "decoder_cross": avg(attn["decoder_cross"])}


class ReshapeService:
    """Owns sessions and the optional model; thread-safe per session."""

    def __init__(self, checkpoint_path=None, encoder_path=None,
                 snapshot_path=None, default_engine=None):
        self.checkpoint_path = checkpoint_path
        self.snapshot_path = snapshot_path
        self.estimator: TrajectoryReshaper | None = None
        if checkpoint_path is not None:
            self.estimator = TrajectoryReshaper.load(checkpoint_path,
                                                     encoder_path=encoder_path)
        self.default_engine = default_engine or (
            "model" if self.estimator is not None else "oracle")
        self.sessions: dict[str, SessionState] = {}
        self._registry_lock = threading.Lock()

    # -- engines ----------------------------------------------------------

    @property
    def lf_enabled(self) -> bool:
        return bool(self.estimator is not None and self.estimator.lf_enabled)

    @property
    def n_waypoints(self) -> int:
        if self.estimator is not None:
            return self.estimator.config_.n_waypoints
        return DEFAULT_N_WAYPOINTS

    def _oracle_reshape(self, session: SessionState, text: str, lf: float):
        try:
            intent = parse_intent(text, session.scene).with_locality(lf)
        except ParseError as exc:
            raise ApiError(400, "parse_error", str(exc))
        field = make_field(intent, session.scene)
        modified = apply_field(session.current, field)
        # string-level reference: 1 for the resolved target, 0 elsewhere
        width = max(6, len(session.scene))
        similarity = [0.0] * width
        for i, obj in enumerate(session.scene.objects):
            if obj.name == intent.target:
                similarity[i] = 1.0
        return modified, similarity, None

    def _model_reshape(self, session: SessionState, text: str, lf: float,
                       want_attention: bool):
        est = self.estimator
        if est is None:
            raise ApiError(400, "model_unavailable",
                           "no checkpoint loaded; use engine=oracle")
        if len(session.current) != est.config_.n_waypoints:
            raise ApiError(400, "bad_trajectory_length",
                           f"model expects {est.config_.n_waypoints} waypoints, "
                           f"session has {len(session.current)}")
        if len(session.scene) > est.max_objects:
            raise ApiError(400, "oversize_scene",
                           f"model supports at most {est.max_objects} objects")
        try:
            modified, similarity, attn = est.predict_one(
                session.current, session.scene, text, lf,
                collect_attention=want_attention)
        except KeyError as exc:
            raise ApiError(400, "unknown_text", str(exc))
        return modified, similarity, attn

    # -- operations ---------------------------------------------------------

    def create_session(self, req: CreateSessionModel) -> SessionState:
        try:
            scene = scene_from_dict({"objects": [o.model_dump()
                                                 for o in req.scene.objects]})
        except (ValueError, KeyError) as exc:
            raise ApiError(400, "bad_scene", str(exc))
        engine = req.engine or self.default_engine
        if engine not in ("oracle", "model"):
            raise ApiError(400, "bad_engine",
                           f"engine must be oracle or model, got {engine!r}")
        if engine == "model" and self.estimator is None:
            raise ApiError(400, "model_unavailable",
                           "no checkpoint loaded; use engine=oracle")
        if req.trajectory is not None:
            try:
                current = Trajectory(req.trajectory.waypoints)
            except ValueError as exc:
                raise ApiError(400, "bad_trajectory", str(exc))
        else:
            current = random_walk_spline(req.seed, n_waypoints=self.n_waypoints)
        region = AdmissibleRegion()
        if req.region is not None:
            try:
                region = AdmissibleRegion.from_dict(req.region.model_dump())
            except (ValueError, TypeError) as exc:
                raise ApiError(400, "bad_region", str(exc))
        if not region.admissible_mask(current.positions).all():
            raise ApiError(400, "inadmissible_trajectory",
                           "initial trajectory violates the admissible region")
        session = SessionState(id=uuid.uuid4().hex[:12], scene=scene,
                               region=region, current=current, engine=engine)
        with self._registry_lock:
            self.sessions[session.id] = session
        return session

    def get_session(self, session_id: str) -> SessionState:
        with self._registry_lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session",
                           f"no session with id {session_id!r}")
        return session

    def reshape(self, session: SessionState, req: ReshapeModel,
                want_attention: bool) -> dict:
        if not req.text or not req.text.strip():
            raise ApiError(400, "empty_text", "command text must be non-empty",
                           field_path="body.text")
        lf = req.lf if req.lf is not None else 1.0
        if not 0.0 <= lf <= 1.0:
            raise ApiError(400, "bad_lf", f"lf must be in [0, 1], got {lf}",
                           field_path="body.lf")
        if session.engine == "oracle":
            try:
                modified, similarity, attn = self._oracle_reshape(session,
                                                                  req.text, lf)
            except KeyError as exc:
                raise ApiError(400, "unknown_target", str(exc))
        else:
            modified, similarity, attn = self._model_reshape(
                session, req.text, lf, want_attention)
        clipped = project_trajectory(session.current, modified, session.region)
        preview = {
            "text": req.text,
            "lf": lf,
            "original": trajectory_to_dict(session.current),
            "modified": trajectory_to_dict(modified),
            "clipped": trajectory_to_dict(clipped),
            "similarity": list(np.asarray(similarity, dtype=float)),
            "attention": _attention_json(attn) if want_attention else None,
        }
        session.pending = preview
        response = dict(preview)
        response["accepted"] = False
        if req.accept:
            self.accept(session)
            response["accepted"] = True
        if not want_attention:
            response["attention"] = None
        return response

    def accept(self, session: SessionState) -> dict:
        if session.pending is None:
            raise ApiError(409, "no_pending_preview",
                           "nothing to accept; run reshape first")
        session.history.append({"text": session.pending["text"],
                                "lf": session.pending["lf"],
                                "trajectory": session.current})
        session.current = Trajectory(session.pending["clipped"]["waypoints"])
        session.pending = None
        return session.public_state()

    def undo(self, session: SessionState) -> dict:
        if not session.history:
            raise ApiError(409, "empty_history", "no accepted reshape to undo")
        entry = session.history.pop()
        session.current = entry["trajectory"]
        session.pending = None
        return session.public_state()

    # -- snapshot persistence ------------------------------------------------

    def save_snapshot(self) -> None:
        if not self.snapshot_path:
            return
        payload = []
        for session in self.sessions.values():
            payload.append({
                "id": session.id,
                "engine": session.engine,
                "scene": scene_to_dict(session.scene),
                "region": session.region.to_dict(),
                "current": trajectory_to_dict(session.current),
                "history": [{"text": h["text"], "lf": h["lf"],
                             "trajectory": trajectory_to_dict(h["trajectory"])}
                            for h in session.history],
            })
        with open(self.snapshot_path, "w") as f:
            json.dump({"sessions": payload}, f)

    def load_snapshot(self) -> None:
        if not self.snapshot_path:
            return
        try:
            with open(self.snapshot_path) as f:
                payload = json.load(f)
        except FileNotFoundError:
            return
        for rec in payload.get("sessions", []):
            session = SessionState(
                id=rec["id"],
                engine=rec["engine"],
                scene=scene_from_dict(rec["scene"]),
                region=AdmissibleRegion.from_dict(rec["region"]),
                current=Trajectory(rec["current"]["waypoints"]),
                history=[{"text": h["text"], "lf": h["lf"],
                          "trajectory": Trajectory(h["trajectory"]["waypoints"])}
                         for h in rec["history"]])
            self.sessions[session.id] = session


def create_app(checkpoint_path=None, encoder_path=None, snapshot_path=None,
               default_engine=None, static_dir=None) -> FastAPI:
    service = ReshapeService(checkpoint_path=checkpoint_path,
                             encoder_path=encoder_path,
                             snapshot_path=snapshot_path,
                             default_engine=default_engine)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        service.load_snapshot()
        yield
        service.save_snapshot()

    app = FastAPI(title="trajlang", lifespan=lifespan)
    app.state.service = service

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        errors = exc.errors()
        first = errors[0] if errors else {}
        loc = ".".join(str(p) for p in first.get("loc", ())) or "body"
        return JSONResponse(status_code=400, content={
            "error": {"code": "invalid_request", "field": loc,
                      "message": first.get("msg", "invalid request body")}})

    @app.get("/healthz")
    def healthz():
        est = service.estimator
        return {
            "status": "ok",
            "engine": service.default_engine,
            "checkpoint": str(service.checkpoint_path)
            if service.checkpoint_path else None,
            "config": est.config_.to_dict() if est is not None else None,
            "lf_enabled": service.lf_enabled,
        }

    @app.post("/sessions")
    def create_session(req: CreateSessionModel):
        session = service.create_session(req)
        return {"id": session.id, "state": session.public_state()}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = service.get_session(session_id)
        with session.lock:
            return session.public_state()

    @app.post("/sessions/{session_id}/reshape")
    def reshape(session_id: str, req: ReshapeModel,
                attn: int = Query(default=0)):
        session = service.get_session(session_id)
        with session.lock:
            return service.reshape(session, req, want_attention=bool(attn))

    @app.post("/sessions/{session_id}/accept")
    def accept(session_id: str):
        session = service.get_session(session_id)
        with session.lock:
            return service.accept(session)

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str):
        session = service.get_session(session_id)
        with session.lock:
            return service.undo(session)

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")
    return app
