"""Stateful HTTP facade for the rendering pipeline.

Sessions are in-memory and keyed by generated piece ids; basis features and
Jacobians are computed once at upload so that control updates and renders
stay cheap. Controls POST is the only mutating endpoint and replaces a
session's controls atomically under its lock; every response is a pure
function of (model, score, current controls). Sessions are lost on restart.
"""

import itertools
import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .basis import FEATURE_SPEC
from .linearize import (
    PieceAnalysis,
    RenderControls,
    analyze_piece,
    default_weights,
    render,
)
from .midi import write_midi
from .models import PerformanceModel
from .perf import STREAMS
from .score import ScoreError, parse_musicxml, parse_score_json


@dataclass
class Session:
    piece_id: str
    analysis: PieceAnalysis
    weights: dict[str, np.ndarray]
    controls: RenderControls
    lock: threading.Lock = field(default_factory=threading.Lock)


class ControlsBody(BaseModel):
    weights: dict[str, list[float]] | None = None
    c: dict[str, float] | None = None
    mu: dict[str, float] | None = None
    sigma: dict[str, float] | None = None
    beat_period: float | None = None


def _validation_error(field_name: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=422, content={"detail": f"{field_name}: {message}"})


def create_app(model: PerformanceModel) -> FastAPI:
    app = FastAPI(title="contempo")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    ids = itertools.count(1)
    k = model.input_size

    def session_or_none(piece_id: str) -> Session | None:
        with sessions_lock:
            return sessions.get(piece_id)

    def curves_payload(session: Session) -> dict:
        result = render(session.analysis.score, model,
                        weights=session.weights, controls=session.controls,
                        analysis=session.analysis)
        return {
            "curves": {s: [float(v) for v in c] for s, c in result.curves.items()},
            "onsets": list(session.analysis.onset_index.onsets),
            "note_params": [
                {
                    "id": nid,
                    "pitch": note.pitch,
                    "onset_sec": note.onset_sec,
                    "duration_sec": note.duration_sec,
                    "velocity": note.velocity,
                }
                for nid, note in result.note_pairs
            ],
        }

    @app.post("/api/pieces")
    async def upload_piece(request: Request):
        if model.feature_version != FEATURE_SPEC.version:
            return JSONResponse(
                status_code=422,
                content={"detail": f"model feature version {model.feature_version!r} "
                                   f"does not match {FEATURE_SPEC.version!r}"},
            )
        body = await request.body()
        stripped = body.lstrip()
        try:
            if stripped.startswith(b"<"):
                score = parse_musicxml(body)
            else:
                score = parse_score_json(body)
        except ScoreError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        analysis = analyze_piece(score, model)
        piece_id = f"p{next(ids)}"
        session = Session(piece_id, analysis, default_weights(k), RenderControls())
        with sessions_lock:
            sessions[piece_id] = session
        return {
            "piece_id": piece_id,
            "T": analysis.n_onsets,
            "N": analysis.n_notes,
            "feature_names": list(analysis.feature_names),
        }

    @app.get("/api/pieces")
    def list_pieces():
        with sessions_lock:
            items = list(sessions.values())
        return {
            "pieces": [
                {
                    "piece_id": s.piece_id,
                    "title": s.analysis.score.title,
                    "T": s.analysis.n_onsets,
                    "N": s.analysis.n_notes,
                }
                for s in items
            ]
        }

    @app.get("/api/pieces/{piece_id}/features")
    def get_features(piece_id: str):
        session = session_or_none(piece_id)
        if session is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown piece {piece_id!r}"})
        a = session.analysis
        return {
            "feature_names": list(a.feature_names),
            "note_ids": [n.id for n in a.score.notes],
            "note_basis": a.note_rows_raw.tolist(),
            "onsets": list(a.onset_index.onsets),
            "onset_basis": a.onset_rows_raw.tolist(),
        }

    @app.get("/api/pieces/{piece_id}/contributions")
    def get_contributions(piece_id: str, stream: str):
        session = session_or_none(piece_id)
        if session is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown piece {piece_id!r}"})
        if stream not in STREAMS:
            return JSONResponse(
                status_code=400,
                content={"detail": f"unknown stream {stream!r}; valid streams: {', '.join(STREAMS)}"},
            )
        a = session.analysis
        cm = a.contributions[stream]
        return {
            "onsets": list(a.onset_index.onsets),
            "feature_names": list(a.feature_names),
            "C": cm.matrix.tolist(),
        }

    @app.post("/api/pieces/{piece_id}/controls")
    def post_controls(piece_id: str, body: ControlsBody):
        session = session_or_none(piece_id)
        if session is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown piece {piece_id!r}"})

        weights = default_weights(k)
        for stream, values in (body.weights or {}).items():
            if stream not in STREAMS:
                return _validation_error("weights", f"unknown stream {stream!r}")
            if len(values) != k:
                return _validation_error(f"weights.{stream}", f"expected {k} values, got {len(values)}")
            w = np.asarray(values, dtype=float)
            if not np.all(np.isfinite(w)):
                return _validation_error(f"weights.{stream}", "values must be finite")
            weights[stream] = w
        for name, mapping in (("c", body.c), ("mu", body.mu), ("sigma", body.sigma)):
            for stream, value in (mapping or {}).items():
                if stream not in STREAMS:
                    return _validation_error(name, f"unknown stream {stream!r}")
                if not np.isfinite(value):
                    return _validation_error(f"{name}.{stream}", "value must be finite")
                if name == "sigma" and value < 0:
                    return _validation_error(f"sigma.{stream}", "must be >= 0")
        beat_period = body.beat_period if body.beat_period is not None else 0.5
        if not np.isfinite(beat_period) or beat_period <= 0:
            return _validation_error("beat_period", "must be > 0")

        controls = RenderControls(
            constants=dict(body.c or {}),
            mu=dict(body.mu or {}),
            sigma=dict(body.sigma or {}),
            beat_period=beat_period,
        )
        with session.lock:
            session.weights = weights
            session.controls = controls
            return curves_payload(session)

    @app.get("/api/pieces/{piece_id}/render.mid")
    def render_midi(piece_id: str):
        session = session_or_none(piece_id)
        if session is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown piece {piece_id!r}"})
        with session.lock:
            weights = dict(session.weights)
            controls = session.controls
        result = render(session.analysis.score, model, weights=weights,
                        controls=controls, analysis=session.analysis)
        return Response(content=write_midi(result.performance), media_type="audio/midi")

    @app.get("/api/pieces/{piece_id}/curves")
    def get_curves(piece_id: str):
        session = session_or_none(piece_id)
        if session is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown piece {piece_id!r}"})
        with session.lock:
            return curves_payload(session)

    return app
