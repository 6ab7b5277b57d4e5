"""Score basis functions.

Evaluates the fixed 18-feature set on every note of a score:

* ``pitch``       MIDI pitch / 127
* ``pitch_sq``    squared normalized pitch
* ``duration``    notated duration in beats
* ``ioi_prev``    gap to the previous distinct onset in beats (0 at the first)
* ``ioi_next``    gap to the next distinct onset (0 at the last)
* ``downbeat``    1 when the onset coincides with a measure start
* ``beat_phase``  position inside the measure in [0, 1)
* ``dyn_pp`` .. ``dyn_ff``  one-hot dynamics level, piecewise constant from
  each dynamics mark until the next; mf before any mark
* ``crescendo``   linear 0 -> 1 ramp across each crescendo span, 0 elsewhere
* ``diminuendo``  likewise for diminuendo spans
* ``slur``, ``accent``, ``fermata``  note flags

Onset-wise rows are the mean over each onset group. Corpus-level
normalization is plain per-column z-scoring with a guarded std.
"""

from dataclasses import dataclass, replace

import numpy as np

from .score import DYNAMICS_LEVELS, ONSET_EPS, OnsetIndex, Score, measure_position

FEATURE_NAMES = (
    "pitch",
    "pitch_sq",
    "duration",
    "ioi_prev",
    "ioi_next",
    "downbeat",
    "beat_phase",
    "dyn_pp",
    "dyn_p",
    "dyn_mp",
    "dyn_mf",
    "dyn_f",
    "dyn_ff",
    "crescendo",
    "diminuendo",
    "slur",
    "accent",
    "fermata",
)

STD_GUARD = 1e-8


@dataclass(frozen=True)
class FeatureSpec:
    names: tuple[str, ...] = FEATURE_NAMES
    version: str = "contempo-18-meanonset-1"


FEATURE_SPEC = FeatureSpec()


@dataclass(eq=False)
class BasisMatrix:
    rows: np.ndarray  # N x K
    row_ids: tuple[str, ...]


@dataclass(eq=False)
class OnsetBasisMatrix:
    rows: np.ndarray  # T x K
    onsets: tuple[float, ...]


@dataclass(eq=False)
class FeatureStats:
    mean: np.ndarray  # K
    std: np.ndarray  # K, population std, unguarded


def note_basis(score: Score, onset_index: OnsetIndex) -> BasisMatrix:
    """Evaluate all basis functions on every note, in canonical note order."""
    notes = score.notes
    n = len(notes)
    k = len(FEATURE_NAMES)
    rows = np.zeros((n, k))

    onsets = onset_index.onsets
    gaps_prev = [0.0] + [onsets[t] - onsets[t - 1] for t in range(1, len(onsets))]
    gaps_next = gaps_prev[1:] + [0.0]

    dyn_marks = sorted(
        (i for i, m in enumerate(score.markings) if m.kind in DYNAMICS_LEVELS),
        key=lambda i: (score.markings[i].start_beats, i),
    )
    wedges = [m for m in score.markings if m.kind in ("crescendo", "diminuendo")]

    for row, note in enumerate(notes):
        b = note.onset_beats
        t = onset_index.note_to_onset[note.id]
        phase, downbeat = measure_position(score, b)

        rows[row, 0] = note.pitch / 127.0
        rows[row, 1] = (note.pitch / 127.0) ** 2
        rows[row, 2] = note.duration_beats
        rows[row, 3] = gaps_prev[t]
        rows[row, 4] = gaps_next[t]
        rows[row, 5] = 1.0 if downbeat else 0.0
        rows[row, 6] = phase

        level = "mf"
        for i in dyn_marks:
            if score.markings[i].start_beats <= b + ONSET_EPS:
                level = score.markings[i].kind
            else:
                break
        rows[row, 7 + DYNAMICS_LEVELS.index(level)] = 1.0

        rows[row, 13] = _ramp_value(wedges, "crescendo", b)
        rows[row, 14] = _ramp_value(wedges, "diminuendo", b)
        rows[row, 15] = 1.0 if note.slur_member else 0.0
        rows[row, 16] = 1.0 if note.accent else 0.0
        rows[row, 17] = 1.0 if note.fermata else 0.0

    return BasisMatrix(rows, tuple(n.id for n in notes))


def _ramp_value(wedges, kind: str, b: float) -> float:
    value = 0.0
    for m in wedges:
        if m.kind != kind or m.end_beats <= m.start_beats:
            continue
        if m.start_beats - ONSET_EPS <= b <= m.end_beats + ONSET_EPS:
            ramp = (b - m.start_beats) / (m.end_beats - m.start_beats)
            value = max(value, min(max(ramp, 0.0), 1.0))
    return value


def onset_basis(basis_matrix: BasisMatrix, onset_index: OnsetIndex) -> OnsetBasisMatrix:
    """Aggregate note rows to one row per distinct onset (arithmetic mean)."""
    pos = {nid: i for i, nid in enumerate(basis_matrix.row_ids)}
    rows = np.zeros((len(onset_index.onsets), basis_matrix.rows.shape[1]))
    for t, group in enumerate(onset_index.note_groups):
        rows[t] = basis_matrix.rows[[pos[nid] for nid in group]].mean(axis=0)
    return OnsetBasisMatrix(rows, onset_index.onsets)


def fit_feature_stats(corpus: list[BasisMatrix]) -> FeatureStats:
    """Per-column population mean/std over all rows of all matrices."""
    if not corpus:
        raise ValueError("empty corpus")
    stacked = np.vstack([m.rows for m in corpus])
    return FeatureStats(stacked.mean(axis=0), stacked.std(axis=0))


def scale_rows(rows: np.ndarray, stats: FeatureStats) -> np.ndarray:
    return (rows - stats.mean) / np.maximum(stats.std, STD_GUARD)


def unscale_rows(rows: np.ndarray, stats: FeatureStats) -> np.ndarray:
    return rows * np.maximum(stats.std, STD_GUARD) + stats.mean


def apply_feature_stats(matrix, stats: FeatureStats):
    """Z-score the rows of a (note or onset) basis matrix."""
    return replace(matrix, rows=scale_rows(matrix.rows, stats))


def basis_to_csv(rows: np.ndarray) -> str:
    """Feature matrix as CSV: header = feature names, one row per note/onset."""
    lines = [",".join(FEATURE_NAMES)]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"
