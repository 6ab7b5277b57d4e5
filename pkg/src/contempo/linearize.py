"""Locally-linear view of a trained model and user-weighted rendering.

Around a reference feature vector the model output decomposes into a
T x K contribution matrix C: entry (i, j) is feature j's first-order
contribution, aggregated over all input steps, to the expressive parameter
at step i. Re-weighting columns of C, then shifting/scaling the resulting
curve, reshapes a rendered performance without touching the model.
"""

from dataclasses import dataclass, field

import numpy as np

from .basis import FEATURE_NAMES, apply_feature_stats, note_basis, onset_basis
from .models import PerformanceModel
from .neural import forward, input_jacobian
from .perf import (
    DEFAULT_BEAT_PERIOD,
    DEFAULT_STREAM_STATS,
    NOTE_STREAMS,
    ONSET_STREAMS,
    STREAMS,
    DecodeControls,
    ExpressiveParams,
    Performance,
    decode_pairs,
)
from .score import Score, build_onset_index

REFERENCE_MODES = ("mean", "zeros")


@dataclass(eq=False)
class ContributionMatrix:
    matrix: np.ndarray  # T x K
    stream: str
    reference: np.ndarray  # K
    constant: float = 0.0


@dataclass(frozen=True)
class RenderControls:
    """Per-stream constant, mean/std shaping, and the mean beat period."""

    constants: dict[str, float] = field(default_factory=dict)
    mu: dict[str, float] = field(default_factory=dict)
    sigma: dict[str, float] = field(default_factory=dict)
    beat_period: float = DEFAULT_BEAT_PERIOD
    stream_stats: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_STREAM_STATS)
    )

    def __post_init__(self):
        if self.beat_period <= 0:
            raise ValueError("beat period must be positive")
        for mapping in (self.constants, self.mu, self.sigma):
            for name in mapping:
                if name not in STREAMS:
                    raise ValueError(f"unknown stream {name!r}")
        for name, value in self.sigma.items():
            if value < 0:
                raise ValueError(f"sigma for {name!r} must be >= 0")

    def constant(self, stream: str) -> float:
        return self.constants.get(stream, 0.0)

    def shaping(self, stream: str) -> tuple[float, float]:
        return self.mu.get(stream, 0.0), self.sigma.get(stream, 1.0)


def reference_point(matrix: np.ndarray) -> np.ndarray:
    """Per-column mean of a feature matrix."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise ValueError("need a non-empty T x K matrix")
    return matrix.mean(axis=0)


def contributions(G: np.ndarray, matrix: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Contract gradients with displacements: C[i, j] = sum_t G[i, t, j] * (x[t, j] - ref[j])."""
    G = np.asarray(G, dtype=float)
    matrix = np.asarray(matrix, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if G.shape[1:] != matrix.shape or matrix.shape[1] != reference.shape[0]:
        raise ValueError(f"shape mismatch: G {G.shape}, matrix {matrix.shape}, ref {reference.shape}")
    return np.einsum("itj,tj->ij", G, matrix - reference)


def apply_weights(C: np.ndarray, weights: np.ndarray, constant: float = 0.0) -> np.ndarray:
    """Weighted column sum plus constant: y[i] = c + sum_j w[j] * C[i, j]."""
    C = np.asarray(C, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (C.shape[1],):
        raise ValueError(f"weight vector length {weights.shape} does not match K={C.shape[1]}")
    return constant + C @ weights


def shape_mean_std(curve: np.ndarray, mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
    """Affine reshaping in standardized space; sigma must be >= 0."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    return mu + sigma * np.asarray(curve, dtype=float)


@dataclass(eq=False)
class PieceAnalysis:
    """Everything about a piece that does not depend on the user controls."""

    score: Score
    onset_index: object
    feature_names: tuple[str, ...]
    note_rows_raw: np.ndarray
    onset_rows_raw: np.ndarray
    note_rows: np.ndarray  # z-scored
    onset_rows: np.ndarray  # z-scored
    contributions: dict[str, ContributionMatrix]
    model_outputs: dict[str, np.ndarray]  # f at the actual inputs, per stream
    reference_outputs: dict[str, np.ndarray]  # f at the broadcast reference

    @property
    def n_onsets(self) -> int:
        return len(self.onset_index.onsets)

    @property
    def n_notes(self) -> int:
        return len(self.score.notes)


def analyze_piece(score: Score, model: PerformanceModel,
                  reference: str = "mean") -> PieceAnalysis:
    """Evaluate basis features and precompute contribution matrices.

    The Jacobian of each stream is taken at the reference sequence (the
    per-column reference vector broadcast over all steps) and contracted
    against the piece's displacement from it. This happens once per piece,
    so that re-weighting afterwards is a cheap matrix-vector product.
    """
    if reference not in REFERENCE_MODES:
        raise ValueError(f"unknown reference mode {reference!r}")
    onset_index = build_onset_index(score)
    nb = note_basis(score, onset_index)
    ob = onset_basis(nb, onset_index)
    nb_scaled = apply_feature_stats(nb, model.feature_stats)
    ob_scaled = apply_feature_stats(ob, model.feature_stats)

    contribs: dict[str, ContributionMatrix] = {}
    outputs: dict[str, np.ndarray] = {}
    ref_outputs: dict[str, np.ndarray] = {}
    for net, streams, rows in (
        (model.onset_net, ONSET_STREAMS, ob_scaled.rows),
        (model.note_net, NOTE_STREAMS, nb_scaled.rows),
    ):
        ref = reference_point(rows) if reference == "mean" else np.zeros(rows.shape[1])
        ref_rows = np.tile(ref, (rows.shape[0], 1))
        y = forward(net, rows)
        y_ref = forward(net, ref_rows)
        for d, stream in enumerate(streams):
            G = input_jacobian(net, ref_rows, d)
            contribs[stream] = ContributionMatrix(contributions(G, rows, ref), stream, ref)
            outputs[stream] = y[:, d]
            ref_outputs[stream] = y_ref[:, d]
    return PieceAnalysis(
        score=score,
        onset_index=onset_index,
        feature_names=FEATURE_NAMES,
        note_rows_raw=nb.rows,
        onset_rows_raw=ob.rows,
        note_rows=nb_scaled.rows,
        onset_rows=ob_scaled.rows,
        contributions=contribs,
        model_outputs=outputs,
        reference_outputs=ref_outputs,
    )


def taylor_constants(analysis: PieceAnalysis) -> dict[str, float]:
    """Per-stream constant that makes weighted curves the model's own
    first-order rendering: the mean model output at the reference sequence."""
    return {s: float(v.mean()) for s, v in analysis.reference_outputs.items()}


def default_weights(k: int) -> dict[str, np.ndarray]:
    return {stream: np.ones(k) for stream in STREAMS}


def shaped_curves(analysis: PieceAnalysis, weights: dict[str, np.ndarray],
                  controls: RenderControls) -> dict[str, np.ndarray]:
    """Weighted, shaped expressive curves for all five streams."""
    curves = {}
    for stream in STREAMS:
        cm = analysis.contributions[stream]
        w = np.asarray(weights[stream], dtype=float)
        mu, sigma = controls.shaping(stream)
        curves[stream] = shape_mean_std(apply_weights(cm.matrix, w, controls.constant(stream)),
                                        mu, sigma)
    return curves


def curves_to_params(curves: dict[str, np.ndarray]) -> ExpressiveParams:
    return ExpressiveParams(
        vt=curves["vt"], lbpr=curves["lbpr"],
        vd=curves["vd"], tim=curves["tim"], art=curves["art"],
    )


@dataclass(eq=False)
class RenderResult:
    curves: dict[str, np.ndarray]
    performance: Performance
    note_pairs: list  # (score note id, PerformedNote)
    analysis: PieceAnalysis


def render(score: Score, model: PerformanceModel,
           weights: dict[str, np.ndarray] | None = None,
           controls: RenderControls = RenderControls(),
           reference: str = "mean",
           analysis: PieceAnalysis | None = None) -> RenderResult:
    """Full pipeline: basis -> Jacobians -> contributions -> weights -> decode."""
    if analysis is None:
        analysis = analyze_piece(score, model, reference)
    k = len(analysis.feature_names)
    if weights is None:
        weights = default_weights(k)
    else:
        weights = {s: np.asarray(weights.get(s, np.ones(k)), dtype=float) for s in STREAMS}
        for s, w in weights.items():
            if w.shape != (k,):
                raise ValueError(f"weights for {s!r} must have length {k}")
    curves = shaped_curves(analysis, weights, controls)
    decode_controls = DecodeControls(beat_period=controls.beat_period,
                                     stream_stats=controls.stream_stats)
    pairs = decode_pairs(score, curves_to_params(curves), decode_controls)
    performance = Performance(tuple(p for _, p in pairs))
    return RenderResult(curves, performance, pairs, analysis)
