"""Batch command line for the rendering pipeline.

Commands: extract (score [+ performance] -> basis CSV / params JSON),
train (corpus manifest -> model JSON), render (score + model -> MIDI),
jacobian (score + model -> contribution CSVs), roundtrip (codec error
report) and serve (HTTP service). Every command is deterministic given
its flags and input files and never mutates its inputs.
"""

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import basis as basis_mod
from .basis import FEATURE_NAMES, apply_feature_stats, basis_to_csv, fit_feature_stats
from .linearize import RenderControls, analyze_piece, render
from .midi import read_midi, write_midi
from .models import PerformanceModel, load_model, save_model
from .neural import NetworkConfig, TrainingConfig, train
from .perf import (
    NOTE_STREAMS,
    ONSET_STREAMS,
    STREAMS,
    DecodeControls,
    decode_pairs,
    encode,
    params_to_json,
    read_alignment,
    standardize,
)
from .score import build_onset_index, parse_musicxml, parse_score_json

DEFAULT_ADDR = "127.0.0.1:8000"


class StageError(Exception):
    """Processing failure; carries the pipeline stage and file for reporting."""

    def __init__(self, stage: str, path, cause: Exception):
        super().__init__(f"{stage}: {path}: {cause}")
        self.stage = stage


def _load_score(path):
    data = Path(path).read_bytes()
    try:
        if data.lstrip().startswith(b"<"):
            return parse_musicxml(data)
        return parse_score_json(data)
    except Exception as exc:
        raise StageError("parse score", path, exc) from exc


def _load_performance(path):
    try:
        return read_midi(Path(path).read_bytes())
    except Exception as exc:
        raise StageError("read midi", path, exc) from exc


def _load_alignment(path, score, performance):
    try:
        return read_alignment(Path(path).read_bytes(), score, performance)
    except Exception as exc:
        raise StageError("read alignment", path, exc) from exc


def _load_model(path) -> PerformanceModel:
    try:
        return load_model(path)
    except Exception as exc:
        raise StageError("load model", path, exc) from exc


def cmd_extract(args) -> int:
    score = _load_score(args.score)
    onset_index = build_onset_index(score)
    nb = basis_mod.note_basis(score, onset_index)
    if args.basis_csv:
        Path(args.basis_csv).write_text(basis_to_csv(nb.rows))
    if args.onset_basis_csv:
        ob = basis_mod.onset_basis(nb, onset_index)
        Path(args.onset_basis_csv).write_text(basis_to_csv(ob.rows))
    if args.params_json:
        if not (args.midi and args.alignment):
            raise StageError("extract", args.score,
                             ValueError("--params-json needs --midi and --alignment"))
        performance = _load_performance(args.midi)
        alignment = _load_alignment(args.alignment, score, performance)
        try:
            params = standardize(encode(score, performance, alignment,
                                        allow_missing=args.allow_missing))
        except Exception as exc:
            raise StageError("encode", args.midi, exc) from exc
        Path(args.params_json).write_text(params_to_json(params))
    return 0


def _piece_dataset(entry, manifest_path):
    base = Path(manifest_path).parent
    resolve = lambda p: p if os.path.isabs(p) else str(base / p)
    score = _load_score(resolve(entry["score"]))
    performance = _load_performance(resolve(entry["midi"]))
    alignment = _load_alignment(resolve(entry["alignment"]), score, performance)
    try:
        params = standardize(encode(score, performance, alignment))
    except Exception as exc:
        raise StageError("encode", entry["midi"], exc) from exc
    return score, params


def _write_log(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mse", "holdout_mse"])
        for row in history:
            writer.writerow([row.epoch, repr(row.train_mse), repr(row.holdout_mse)])


def cmd_train(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        assert isinstance(manifest, list) and manifest, "manifest must be a non-empty list"
    except Exception as exc:
        raise StageError("read manifest", args.manifest, exc) from exc

    pieces = [_piece_dataset(entry, args.manifest) for entry in manifest]

    note_matrices = []
    onset_matrices = []
    for score, _ in pieces:
        onset_index = build_onset_index(score)
        nb = basis_mod.note_basis(score, onset_index)
        note_matrices.append(nb)
        onset_matrices.append(basis_mod.onset_basis(nb, onset_index))
    stats = fit_feature_stats(note_matrices)

    onset_data = []
    note_data = []
    for (score, params), nb, ob in zip(pieces, note_matrices, onset_matrices):
        onset_rows = apply_feature_stats(ob, stats).rows
        note_rows = apply_feature_stats(nb, stats).rows
        onset_data.append((onset_rows, np.column_stack([params.stream(s) for s in ONSET_STREAMS])))
        note_data.append((note_rows, np.column_stack([params.stream(s) for s in NOTE_STREAMS])))

    k = len(FEATURE_NAMES)
    train_cfg = TrainingConfig(learning_rate=args.learning_rate, max_epochs=args.epochs,
                               seed=args.seed)
    onset_net, onset_hist = train(
        onset_data, NetworkConfig(k, len(ONSET_STREAMS), args.hidden, args.cell, args.seed),
        train_cfg)
    note_net, note_hist = train(
        note_data, NetworkConfig(k, len(NOTE_STREAMS), args.hidden, args.cell, args.seed),
        train_cfg)

    model = PerformanceModel(onset_net, note_net, stats)
    save_model(model, args.out)
    if args.log_prefix:
        _write_log(f"{args.log_prefix}_onset.csv", onset_hist)
        _write_log(f"{args.log_prefix}_note.csv", note_hist)
    print(f"trained model written to {args.out} "
          f"(onset mse {onset_hist[-1].train_mse:.4f}, note mse {note_hist[-1].train_mse:.4f})")
    return 0


def _load_weights(path, k):
    doc = json.loads(Path(path).read_text())
    weights = {}
    for stream, value in doc.items():
        if stream not in STREAMS:
            raise ValueError(f"unknown stream {stream!r}")
        if isinstance(value, dict):
            w = np.ones(k)
            for name, scale in value.items():
                if name not in FEATURE_NAMES:
                    raise ValueError(f"unknown feature {name!r}")
                w[FEATURE_NAMES.index(name)] = float(scale)
        else:
            w = np.asarray(value, dtype=float)
            if w.shape != (k,):
                raise ValueError(f"weights for {stream!r} must have length {k}")
        weights[stream] = w
    return weights


def _load_controls(path) -> RenderControls:
    doc = json.loads(Path(path).read_text())
    return RenderControls(
        constants=doc.get("c", {}),
        mu=doc.get("mu", {}),
        sigma=doc.get("sigma", {}),
        beat_period=doc.get("beat_period", 0.5),
    )


def _write_curves_csv(path, result):
    onsets = result.analysis.onset_index.onsets
    note_ids = [n.id for n in result.analysis.score.notes]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stream", "index", "position", "value"])
        for stream in ONSET_STREAMS:
            for i, v in enumerate(result.curves[stream]):
                writer.writerow([stream, i, repr(float(onsets[i])), repr(float(v))])
        for stream in NOTE_STREAMS:
            for i, v in enumerate(result.curves[stream]):
                writer.writerow([stream, i, note_ids[i], repr(float(v))])


def cmd_render(args) -> int:
    score = _load_score(args.score)
    model = _load_model(args.model)
    weights = _load_weights(args.weights, model.input_size) if args.weights else None
    controls = _load_controls(args.controls) if args.controls else RenderControls()
    try:
        result = render(score, model, weights=weights, controls=controls,
                        reference=args.reference)
    except Exception as exc:
        raise StageError("render", args.score, exc) from exc
    Path(args.out).write_bytes(write_midi(result.performance))
    if args.curves:
        _write_curves_csv(args.curves, result)
    print(f"wrote {args.out} ({len(result.performance.notes)} notes)")
    return 0


def cmd_jacobian(args) -> int:
    score = _load_score(args.score)
    model = _load_model(args.model)
    try:
        analysis = analyze_piece(score, model, reference=args.reference)
    except Exception as exc:
        raise StageError("jacobian", args.score, exc) from exc
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for stream, cm in analysis.contributions.items():
        path = out_dir / f"contributions_{stream}.csv"
        path.write_text(basis_to_csv(cm.matrix))
        print(f"wrote {path}")
    return 0


def cmd_roundtrip(args) -> int:
    score = _load_score(args.score)
    performance = _load_performance(args.midi)
    alignment = _load_alignment(args.alignment, score, performance)
    try:
        raw = encode(score, performance, alignment)
        params = standardize(raw)
        controls = DecodeControls.from_params(params)
        pairs = decode_pairs(score, params, controls)
    except Exception as exc:
        raise StageError("roundtrip", args.midi, exc) from exc

    onset_index = build_onset_index(score)
    by_id = {nid: note for nid, note in pairs}
    grid_err = 0.0
    for t, group in enumerate(onset_index.note_groups):
        orig = np.mean([performance.notes[alignment.pairs[nid]].onset_sec for nid in group])
        dec = np.mean([by_id[nid].onset_sec for nid in group])
        grid_err = max(grid_err, abs(orig - dec))
    vel_err = 0
    dur_err = 0.0
    onset_err = 0.0
    for nid, dec_note in pairs:
        orig_note = performance.notes[alignment.pairs[nid]]
        vel_err = max(vel_err, abs(orig_note.velocity - dec_note.velocity))
        dur_err = max(dur_err, abs(orig_note.duration_sec - dec_note.duration_sec))
        onset_err = max(onset_err, abs(orig_note.onset_sec - dec_note.onset_sec))
    print(f"max onset-grid error: {grid_err:.3e} s")
    print(f"max note onset error: {onset_err:.3e} s")
    print(f"max duration error: {dur_err:.3e} s")
    print(f"max velocity error: {vel_err}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    model_path = args.model or os.environ.get("CONTEMPO_MODEL")
    if not model_path:
        raise StageError("serve", "<model>", ValueError("no model: pass --model or set CONTEMPO_MODEL"))
    model = _load_model(model_path)
    addr = args.addr or os.environ.get("CONTEMPO_ADDR", DEFAULT_ADDR)
    host, _, port = addr.rpartition(":")
    app = create_app(model)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contempo",
                                     description="expressive performance rendering pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="score features and expressive parameters")
    p.add_argument("--score", required=True)
    p.add_argument("--midi")
    p.add_argument("--alignment")
    p.add_argument("--basis-csv")
    p.add_argument("--onset-basis-csv")
    p.add_argument("--params-json")
    p.add_argument("--allow-missing", action="store_true",
                   help="drop unaligned score notes instead of failing")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a model from a corpus manifest")
    p.add_argument("--manifest", required=True,
                   help="JSON list of {score, midi, alignment} paths")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--cell", choices=["lstm", "tanh-rnn"], default="lstm")
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--log-prefix", help="write <prefix>_onset.csv and <prefix>_note.csv logs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("render", help="render a score to MIDI with a trained model")
    p.add_argument("--score", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--weights", help="JSON {stream: [K floats] | {feature: scale}}")
    p.add_argument("--controls", help="JSON {c, mu, sigma, beat_period}")
    p.add_argument("--curves", help="write shaped curves CSV")
    p.add_argument("--reference", choices=["mean", "zeros"], default="mean")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("jacobian", help="export contribution matrices as CSV")
    p.add_argument("--score", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--reference", choices=["mean", "zeros"], default="mean")
    p.set_defaults(func=cmd_jacobian)

    p = sub.add_parser("roundtrip", help="report encode/decode round-trip errors")
    p.add_argument("--score", required=True)
    p.add_argument("--midi", required=True)
    p.add_argument("--alignment", required=True)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--model", help="model JSON path (or CONTEMPO_MODEL)")
    p.add_argument("--addr", help="host:port (or CONTEMPO_ADDR, default 127.0.0.1:8000)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error in {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
