"""Codec between aligned (score, performance) pairs and expressive parameters.

Five parameter streams describe a performance relative to its score:
onset-wise ``vt`` (velocity trend, max velocity per onset) and ``lbpr``
(log of local beat period over the piece's mean beat period); note-wise
``vd`` (velocity deviation from the trend, <= 0), ``tim`` (onset deviation
in seconds from the beat-period grid) and ``art`` (log ratio of performed
duration to notated duration times local beat period).

``encode`` extracts raw streams, ``standardize`` makes each stream
zero-mean unit-variance per piece, ``decode`` maps standardized streams
back to a concrete performance.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .score import Score, build_onset_index

STREAMS = ("vt", "lbpr", "vd", "tim", "art")
ONSET_STREAMS = ("vt", "lbpr")
NOTE_STREAMS = ("vd", "tim", "art")

STD_GUARD = 1e-8

# log-domain streams are clipped here before exponentiation when decoding;
# musical values stay within +-3, the bound only tames runaway weight settings
LOG_CLIP = 50.0

# fall-back de-standardization pairs for pure rendering (no encoded stats);
# plausible pianistic magnitudes, not ground truth. vd keeps mean 0 so that
# zero-standardized streams decode to the velocity trend itself (raw vd has
# max 0 within every onset group by construction).
DEFAULT_STREAM_STATS: dict[str, tuple[float, float]] = {
    "vt": (64.0, 12.0),
    "vd": (0.0, 4.0),
    "tim": (0.0, 0.012),
    "art": (0.0, 0.25),
    "lbpr": (0.0, 0.15),
}
DEFAULT_BEAT_PERIOD = 0.5


class CodecError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class PerformedNote:
    pitch: int
    onset_sec: float
    duration_sec: float
    velocity: int

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise CodecError(f"pitch {self.pitch} outside [0, 127]")
        if self.onset_sec < 0:
            raise CodecError("onset must be >= 0 seconds")
        if self.duration_sec <= 0:
            raise CodecError("duration must be positive")
        if not 1 <= self.velocity <= 127:
            raise CodecError(f"velocity {self.velocity} outside [1, 127]")


def performance_order(note: "PerformedNote"):
    """Canonical note order: onset, then pitch, then duration and velocity."""
    return (note.onset_sec, note.pitch, note.duration_sec, note.velocity)


@dataclass(frozen=True)
class Performance:
    notes: tuple[PerformedNote, ...]

    def __post_init__(self):
        if not self.notes:
            raise CodecError("performance has no notes")
        ordered = tuple(sorted(self.notes, key=performance_order))
        object.__setattr__(self, "notes", ordered)


@dataclass(frozen=True)
class Alignment:
    """Injective map from score note id to index into Performance.notes."""

    pairs: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for nid, idx in self.pairs.items():
            if idx in seen:
                raise AlignmentError("alignment not injective")
            seen.add(idx)


@dataclass(eq=False)
class ExpressiveParams:
    vt: np.ndarray  # T
    lbpr: np.ndarray  # T
    vd: np.ndarray  # N
    tim: np.ndarray  # N
    art: np.ndarray  # N
    stats: dict[str, tuple[float, float]] | None = None
    mean_beat_period: float | None = None  # captured by encode, in s/beat

    def stream(self, name: str) -> np.ndarray:
        if name not in STREAMS:
            raise CodecError(f"unknown stream {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class DecodeControls:
    """De-standardization pairs and mean beat period for decoding."""

    beat_period: float = DEFAULT_BEAT_PERIOD
    stream_stats: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_STREAM_STATS)
    )

    def __post_init__(self):
        if self.beat_period <= 0:
            raise CodecError("beat period must be positive")
        for name in STREAMS:
            if name not in self.stream_stats:
                raise CodecError(f"missing de-standardization pair for {name!r}")

    @classmethod
    def from_params(cls, params: ExpressiveParams, beat_period: float | None = None):
        """Controls that invert a given standardization (round-trip decoding)."""
        if params.stats is None:
            raise CodecError("params carry no standardization stats")
        bp = beat_period if beat_period is not None else params.mean_beat_period
        if bp is None:
            raise CodecError("no mean beat period available")
        return cls(beat_period=bp, stream_stats=dict(params.stats))


def encode(score: Score, performance: Performance, alignment: Alignment,
           allow_missing: bool = False) -> ExpressiveParams:
    """Extract raw (unstandardized) expressive parameters.

    The temporal grid time of each score onset is the mean performed onset
    of its aligned notes; the local beat period between onsets i and i+1 is
    the performed gap divided by the beat gap (the last onset copies its
    predecessor's value). Unaligned score notes raise unless
    ``allow_missing``, in which case they are dropped (onsets left with no
    aligned note drop out of the grid as well).
    """
    onset_index = build_onset_index(score)
    note_by_id = {n.id: n for n in score.notes}

    aligned_notes = []  # (note, performed) in canonical order
    for note in score.notes:
        if note.id not in alignment.pairs:
            if not allow_missing:
                raise CodecError(f"score note {note.id!r} is not aligned")
            continue
        idx = alignment.pairs[note.id]
        if not 0 <= idx < len(performance.notes):
            raise AlignmentError(f"alignment index {idx} out of range")
        aligned_notes.append((note, performance.notes[idx]))
    aligned_ids = {note.id for note, _ in aligned_notes}

    grid_beats = []
    grid_times = []
    groups = []  # aligned (note, performed) pairs per surviving onset
    for t, group in enumerate(onset_index.note_groups):
        pairs = [
            (note_by_id[nid], performance.notes[alignment.pairs[nid]])
            for nid in group
            if nid in aligned_ids
        ]
        if not pairs:
            continue
        grid_beats.append(onset_index.onsets[t])
        grid_times.append(sum(p.onset_sec for _, p in pairs) / len(pairs))
        groups.append(pairs)

    T = len(grid_times)
    if T < 2:
        raise CodecError("need >= 2 onsets for beat period")

    bp = np.zeros(T)
    for i in range(T - 1):
        gap = grid_times[i + 1] - grid_times[i]
        bp[i] = gap / (grid_beats[i + 1] - grid_beats[i])
        if bp[i] <= 0:
            raise CodecError(f"non-increasing onset grid at onset {i}")
    bp[T - 1] = bp[T - 2]
    mean_bp = float(bp.mean())
    lbpr = np.log(bp / mean_bp)

    vt = np.array([max(p.velocity for _, p in pairs) for pairs in groups], dtype=float)

    onset_of = {}
    for i, pairs in enumerate(groups):
        for note, _ in pairs:
            onset_of[note.id] = i

    vd, tim, art = [], [], []
    for note, played in aligned_notes:
        i = onset_of[note.id]
        vd.append(played.velocity - vt[i])
        tim.append(played.onset_sec - grid_times[i])
        art.append(math.log(played.duration_sec / (note.duration_beats * bp[i])))

    return ExpressiveParams(
        vt=vt,
        lbpr=lbpr,
        vd=np.array(vd),
        tim=np.array(tim),
        art=np.array(art),
        stats=None,
        mean_beat_period=mean_bp,
    )


def standardize(params: ExpressiveParams) -> ExpressiveParams:
    """Transform each stream to zero mean, unit population variance.

    The actual (mean, std) pair of each stream is recorded in ``stats``;
    the division uses ``max(std, 1e-8)`` so constant streams map to zeros.
    """
    stats = {}
    values = {}
    for name in STREAMS:
        x = params.stream(name)
        mean = float(x.mean())
        std = float(x.std())
        stats[name] = (mean, std)
        values[name] = (x - mean) / max(std, STD_GUARD)
    return ExpressiveParams(stats=stats, mean_beat_period=params.mean_beat_period, **values)


def destandardize(params: ExpressiveParams) -> ExpressiveParams:
    """Invert :func:`standardize` using the captured stats."""
    if params.stats is None:
        raise CodecError("params carry no standardization stats")
    values = {}
    for name in STREAMS:
        mean, std = params.stats[name]
        values[name] = params.stream(name) * max(std, STD_GUARD) + mean
    return ExpressiveParams(stats=None, mean_beat_period=params.mean_beat_period, **values)


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def decode_pairs(score: Score, params: ExpressiveParams,
                 controls: DecodeControls) -> list[tuple[str, PerformedNote]]:
    """Decode standardized streams into (score note id, performed note) pairs."""
    onset_index = build_onset_index(score)
    T = len(onset_index.onsets)
    N = len(score.notes)
    if len(params.vt) != T or len(params.lbpr) != T:
        raise CodecError(f"onset stream length {len(params.vt)} does not match T={T}")
    if len(params.vd) != N or len(params.tim) != N or len(params.art) != N:
        raise CodecError(f"note stream length {len(params.vd)} does not match N={N}")

    raw = {}
    for name in STREAMS:
        mean, std = controls.stream_stats[name]
        raw[name] = params.stream(name) * max(std, STD_GUARD) + mean
    for name in ("lbpr", "art"):
        raw[name] = np.clip(raw[name], -LOG_CLIP, LOG_CLIP)

    beats = onset_index.onsets
    bp = controls.beat_period * np.exp(raw["lbpr"])
    times = np.zeros(T)
    for i in range(T - 1):
        times[i + 1] = times[i] + (beats[i + 1] - beats[i]) * bp[i]

    pairs = []
    for n, note in enumerate(score.notes):
        i = onset_index.note_to_onset[note.id]
        onset = max(0.0, times[i] + raw["tim"][n])
        velocity = _round_half_away(raw["vt"][i] + min(raw["vd"][n], 0.0))
        velocity = min(127, max(1, velocity))
        duration = note.duration_beats * bp[i] * math.exp(raw["art"][n])
        pairs.append((note.id, PerformedNote(note.pitch, onset, duration, velocity)))
    return pairs


def decode(score: Score, params: ExpressiveParams, controls: DecodeControls) -> Performance:
    """Render standardized expressive parameters into a Performance."""
    return Performance(tuple(p for _, p in decode_pairs(score, params, controls)))


# ---------------------------------------------------------------------------
# Alignment CSV

def read_alignment(data: bytes, score: Score, performance: Performance) -> Alignment:
    """Parse and validate a ``score_note_id,perf_note_index`` CSV."""
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise AlignmentError("empty alignment file") from None
    if [h.strip() for h in header] != ["score_note_id", "perf_note_index"]:
        raise AlignmentError("expected header 'score_note_id,perf_note_index'")

    known_ids = {n.id for n in score.notes}
    pairs: dict[str, int] = {}
    used = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise AlignmentError(f"line {lineno}: expected 2 columns")
        nid = row[0].strip()
        try:
            idx = int(row[1])
        except ValueError:
            raise AlignmentError(f"line {lineno}: index {row[1]!r} is not an integer") from None
        if nid not in known_ids:
            raise AlignmentError(f"line {lineno}: unknown score note id {nid!r}")
        if nid in pairs:
            raise AlignmentError(f"line {lineno}: duplicate score note id {nid!r}")
        if not 0 <= idx < len(performance.notes):
            raise AlignmentError(f"line {lineno}: index {idx} out of range")
        if idx in used:
            raise AlignmentError("alignment not injective")
        used.add(idx)
        pairs[nid] = idx
    return Alignment(pairs)


def params_to_json(params: ExpressiveParams) -> str:
    """Export streams as JSON {stream: {values, mean, std}}."""
    doc = {}
    for name in STREAMS:
        mean, std = (params.stats or {}).get(name, (None, None))
        doc[name] = {"values": [float(v) for v in params.stream(name)], "mean": mean, "std": std}
    if params.mean_beat_period is not None:
        doc["mean_beat_period"] = params.mean_beat_period
    return json.dumps(doc, indent=2)


def aligned_subscore(score: Score, alignment: Alignment) -> Score:
    """Restrict a score to its aligned notes (for partially aligned corpora)."""
    kept = tuple(n for n in score.notes if n.id in alignment.pairs)
    if not kept:
        raise CodecError("alignment covers no score notes")
    return replace(score, notes=kept)
