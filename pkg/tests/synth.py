"""Synthetic scores, performances and corpora for the test suite."""

import numpy as np

from contempo.basis import apply_feature_stats, fit_feature_stats, note_basis, onset_basis
from contempo.perf import Alignment, PerformedNote, Performance, performance_order
from contempo.score import Marking, Score, ScoreNote, TimeSignature, build_onset_index

DYNAMICS = ("pp", "p", "mp", "mf", "f", "ff")

# onset steps mix coarse and fine subdivisions so beat phases are varied
ONSET_STEPS = (0.25, 0.5, 0.5, 0.75, 1.0, 1.5)
DURATIONS = (0.25, 0.5, 0.5, 1.0, 2.0)


def random_score(rng: np.random.Generator, n_onsets=(20, 50), chord_prob=0.3,
                 title="synthetic") -> Score:
    num = int(rng.choice([3, 4]))
    n = int(rng.integers(n_onsets[0], n_onsets[1] + 1))
    onsets = []
    b = 0.0
    for _ in range(n):
        onsets.append(b)
        b += float(rng.choice(ONSET_STEPS))

    notes = []
    counter = 0
    for onset in onsets:
        size = 1 + int(rng.random() < chord_prob) + int(rng.random() < 0.1)
        pitches = rng.choice(np.arange(36, 96), size=size, replace=False)
        for pitch in pitches:
            counter += 1
            notes.append(
                ScoreNote(
                    id=f"s{counter}",
                    pitch=int(pitch),
                    onset_beats=onset,
                    duration_beats=float(rng.choice(DURATIONS)),
                    voice=1,
                    accent=bool(rng.random() < 0.1),
                    fermata=bool(rng.random() < 0.02),
                    slur_member=bool(rng.random() < 0.3),
                )
            )

    markings = []
    for _ in range(int(rng.integers(0, 4))):
        start = float(rng.choice(onsets))
        markings.append(Marking(str(rng.choice(DYNAMICS)), start, start))
    for _ in range(int(rng.integers(0, 3))):
        kind = "crescendo" if rng.random() < 0.5 else "diminuendo"
        a, z = sorted(rng.choice(onsets, size=2, replace=False))
        if z > a:
            markings.append(Marking(kind, float(a), float(z)))

    return Score(tuple(notes), tuple(markings), (TimeSignature(num, 4, 0.0),), title)


def synth_performance(score: Score, rng: np.random.Generator,
                      base_beat_period=0.5) -> tuple[Performance, Alignment]:
    """Simulated human performance of a score, aligned note by note.

    The first onset group is played exactly together at time 0 so that the
    decoded grid (which starts at 0) can reproduce the original one.
    """
    index = build_onset_index(score)
    onsets = index.onsets
    T = len(onsets)
    bp = base_beat_period * np.exp(rng.normal(0.0, 0.15, size=T))
    times = np.zeros(T)
    for i in range(T - 1):
        times[i + 1] = times[i] + (onsets[i + 1] - onsets[i]) * bp[i]

    performed = []
    for note in score.notes:
        i = index.note_to_onset[note.id]
        onset = 0.0 if i == 0 else float(times[i] + rng.normal(0.0, 0.004))
        duration = float(note.duration_beats * bp[i] * np.exp(rng.normal(0.0, 0.2)))
        velocity = int(rng.integers(35, 100))
        performed.append((note.id, PerformedNote(note.pitch, onset, duration, velocity)))

    ordered = sorted(performed, key=lambda item: performance_order(item[1]))
    performance = Performance(tuple(p for _, p in ordered))
    alignment = Alignment({nid: i for i, (nid, _) in enumerate(ordered)})
    return performance, alignment


def downbeat_rule_corpus(rng: np.random.Generator, n_pieces=30, n_onsets=(20, 50),
                         coeff=0.8, noise=0.01):
    """Corpus whose tempo stream follows ``lbpr = coeff * downbeat + noise``.

    Returns (dataset, feature_stats, scores, onset_matrices) where dataset
    pairs corpus-scaled onset feature rows with the per-piece standardized
    lbpr target (one output column).
    """
    from contempo.basis import FEATURE_NAMES

    downbeat_col = FEATURE_NAMES.index("downbeat")
    scores = [random_score(rng, n_onsets) for _ in range(n_pieces)]
    note_mats = []
    onset_mats = []
    for score in scores:
        index = build_onset_index(score)
        nb = note_basis(score, index)
        note_mats.append(nb)
        onset_mats.append(onset_basis(nb, index))
    stats = fit_feature_stats(note_mats)

    dataset = []
    for ob in onset_mats:
        lbpr = coeff * ob.rows[:, downbeat_col] + rng.normal(0.0, noise, size=len(ob.rows))
        target = (lbpr - lbpr.mean()) / max(lbpr.std(), 1e-8)
        rows = apply_feature_stats(ob, stats).rows
        dataset.append((rows, target[:, None]))
    return dataset, stats, scores, onset_mats
