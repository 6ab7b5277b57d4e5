import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contempo.perf import (
    Alignment,
    AlignmentError,
    CodecError,
    DecodeControls,
    PerformedNote,
    Performance,
    decode,
    decode_pairs,
    destandardize,
    encode,
    params_to_json,
    read_alignment,
    standardize,
)
from contempo.score import Score, ScoreNote, build_onset_index

from synth import random_score, synth_performance


def simple_score(onsets, pitches=None, durations=None) -> Score:
    pitches = pitches or [60 + i for i in range(len(onsets))]
    durations = durations or [1.0] * len(onsets)
    notes = tuple(
        ScoreNote(f"n{i}", pitches[i], float(onsets[i]), float(durations[i]))
        for i in range(len(onsets))
    )
    return Score(notes=notes)


def identity_alignment(score: Score) -> Alignment:
    return Alignment({n.id: i for i, n in enumerate(score.notes)})


def test_encode_beat_period_and_lbpr():
    score = simple_score([0, 1, 2])
    performance = Performance((
        PerformedNote(60, 0.0, 0.4, 70),
        PerformedNote(61, 0.5, 0.4, 70),
        PerformedNote(62, 1.5, 0.4, 70),
    ))
    raw = encode(score, performance, identity_alignment(score))
    assert np.allclose(raw.lbpr, [math.log(0.6), math.log(1.2), math.log(1.2)])
    assert np.allclose(np.round(raw.lbpr, 5), [-0.51083, 0.18232, 0.18232])
    assert raw.mean_beat_period == pytest.approx(0.5 * (0.5 + 1.0 + 1.0) / 1.5)


def test_encode_chord_velocity_trend_and_deviation():
    score = simple_score([0, 0, 1], pitches=[60, 64, 62])
    performance = Performance((
        PerformedNote(60, 0.0, 0.4, 70),
        PerformedNote(64, 0.0, 0.4, 65),
        PerformedNote(62, 0.5, 0.4, 50),
    ))
    raw = encode(score, performance, identity_alignment(score))
    assert raw.vt[0] == 70
    assert sorted(raw.vd[:2]) == [-5.0, 0.0]
    assert max(raw.vd[:2]) == 0.0


def test_encode_articulation_log_ratio():
    score = simple_score([0, 1], durations=[1.0, 1.0])
    performance = Performance((
        PerformedNote(60, 0.0, 0.6, 70),
        PerformedNote(61, 0.5, 0.5, 70),
    ))
    raw = encode(score, performance, identity_alignment(score))
    assert raw.art[0] == pytest.approx(math.log(1.2), abs=1e-12)
    assert round(raw.art[0], 5) == 0.18232


def test_encode_unaligned_note_raises_and_allow_missing_drops():
    score = simple_score([0, 1, 2])
    performance = Performance((
        PerformedNote(60, 0.0, 0.4, 70),
        PerformedNote(61, 0.5, 0.4, 70),
        PerformedNote(62, 1.0, 0.4, 70),
    ))
    partial = Alignment({"n0": 0, "n2": 2})
    with pytest.raises(CodecError, match="n1"):
        encode(score, performance, partial)
    raw = encode(score, performance, partial, allow_missing=True)
    assert len(raw.vd) == 2
    assert len(raw.vt) == 2  # the n1 onset dropped from the grid


def test_encode_needs_two_onsets():
    score = simple_score([0, 0], pitches=[60, 64])
    performance = Performance((PerformedNote(60, 0.0, 0.4, 70), PerformedNote(64, 0.0, 0.4, 70)))
    with pytest.raises(CodecError, match="need >= 2 onsets"):
        encode(score, performance, identity_alignment(score))


def test_standardize_oracle_values():
    score = simple_score([0, 1, 2])
    performance = Performance((
        PerformedNote(60, 0.0, 0.4, 60),
        PerformedNote(61, 0.5, 0.4, 70),
        PerformedNote(62, 1.0, 0.4, 80),
    ))
    params = standardize(encode(score, performance, identity_alignment(score)))
    mean, std = params.stats["vt"]
    assert mean == 70.0
    assert std == pytest.approx(math.sqrt(200 / 3))
    assert round(std, 4) == 8.165
    assert np.allclose(params.vt, [-1.2247449, 0.0, 1.2247449], atol=1e-6)


def test_standardize_constant_stream():
    score = simple_score([0, 1, 2])
    performance = Performance((
        PerformedNote(60, 0.0, 0.5, 70),
        PerformedNote(61, 0.5, 0.5, 70),
        PerformedNote(62, 1.0, 0.5, 70),
    ))
    params = standardize(encode(score, performance, identity_alignment(score)))
    assert np.all(params.vt == 0.0)
    assert params.stats["vt"] == (70.0, 0.0)  # actual std recorded, guard used


def test_standardize_destandardize_roundtrip():
    rng = np.random.default_rng(5)
    score = random_score(rng, n_onsets=(5, 15))
    performance, alignment = synth_performance(score, rng)
    raw = encode(score, performance, alignment)
    back = destandardize(standardize(raw))
    for name in ("vt", "lbpr", "vd", "tim", "art"):
        assert np.allclose(raw.stream(name), back.stream(name), atol=1e-12)


def test_decode_zero_streams_with_defaults():
    score = simple_score([0, 1, 2, 4])
    T, N = 4, 4
    from contempo.perf import ExpressiveParams

    params = ExpressiveParams(np.zeros(T), np.zeros(T), np.zeros(N), np.zeros(N), np.zeros(N))
    performance = decode(score, params, DecodeControls(beat_period=0.5))
    onsets = [n.onset_sec for n in performance.notes]
    assert onsets == pytest.approx([0.0, 0.5, 1.0, 2.0])
    assert all(n.velocity == 64 for n in performance.notes)  # default vt mean
    durations = [n.duration_sec for n in performance.notes]
    assert durations == pytest.approx([0.5, 0.5, 0.5, 0.5])


def test_decode_positive_vd_clamped():
    score = simple_score([0, 1])
    from contempo.perf import ExpressiveParams

    params = ExpressiveParams(np.zeros(2), np.zeros(2), np.full(2, 2.0), np.zeros(2), np.zeros(2))
    stats = {"vt": (64.0, 12.0), "vd": (-5.0, 4.0), "tim": (0.0, 0.012),
             "art": (0.0, 0.25), "lbpr": (0.0, 0.15)}
    performance = decode(score, params, DecodeControls(0.5, stats))
    # raw vd = -5 + 2*4 = +3, clamped to 0 before the velocity sum
    assert all(n.velocity == 64 for n in performance.notes)


def test_decode_length_mismatch():
    score = simple_score([0, 1])
    from contempo.perf import ExpressiveParams

    params = ExpressiveParams(np.zeros(3), np.zeros(3), np.zeros(2), np.zeros(2), np.zeros(2))
    with pytest.raises(CodecError, match="does not match T"):
        decode(score, params, DecodeControls())


@pytest.mark.parametrize("seed", range(5))
def test_roundtrip_through_codec(seed):
    rng = np.random.default_rng(100 + seed)
    score = random_score(rng, n_onsets=(8, 20))
    performance, alignment = synth_performance(score, rng)
    params = standardize(encode(score, performance, alignment))
    controls = DecodeControls.from_params(params)
    pairs = decode_pairs(score, params, controls)

    index = build_onset_index(score)
    by_id = {nid: note for nid, note in pairs}
    for t, group in enumerate(index.note_groups):
        orig = np.mean([performance.notes[alignment.pairs[nid]].onset_sec for nid in group])
        dec = np.mean([by_id[nid].onset_sec for nid in group])
        assert abs(orig - dec) < 1e-9
    for nid, dec_note in pairs:
        orig_note = performance.notes[alignment.pairs[nid]]
        assert dec_note.velocity == orig_note.velocity
        assert abs(dec_note.duration_sec - orig_note.duration_sec) < 1e-9
        assert abs(dec_note.onset_sec - orig_note.onset_sec) < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.sampled_from([0.5, 2.0]))
def test_lbpr_invariant_under_time_scaling(seed, alpha):
    rng = np.random.default_rng(seed)
    score = random_score(rng, n_onsets=(5, 15))
    performance, alignment = synth_performance(score, rng)
    scaled = Performance(tuple(
        PerformedNote(n.pitch, n.onset_sec * alpha, n.duration_sec * alpha, n.velocity)
        for n in performance.notes
    ))
    raw = encode(score, performance, alignment)
    raw_scaled = encode(score, scaled, alignment)
    assert np.allclose(raw.lbpr, raw_scaled.lbpr, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_encode_invariants(seed):
    rng = np.random.default_rng(seed)
    score = random_score(rng, n_onsets=(5, 15))
    performance, alignment = synth_performance(score, rng)
    raw = encode(score, performance, alignment)
    index = build_onset_index(score)
    pos = {n.id: i for i, n in enumerate(score.notes)}
    for group in index.note_groups:
        group_vd = [raw.vd[pos[nid]] for nid in group]
        assert max(group_vd) == 0.0
        assert all(v <= 0.0 for v in group_vd)
        group_tim = [raw.tim[pos[nid]] for nid in group]
        assert abs(np.mean(group_tim)) < 1e-9  # grid time is the group mean


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_decode_grid_monotone(seed):
    rng = np.random.default_rng(seed)
    score = random_score(rng, n_onsets=(5, 15))
    from contempo.perf import ExpressiveParams

    index = build_onset_index(score)
    T, N = len(index.onsets), len(score.notes)
    params = ExpressiveParams(
        rng.normal(size=T), rng.normal(size=T),
        rng.normal(size=N), np.zeros(N), rng.normal(size=N),
    )
    pairs = decode_pairs(score, params, DecodeControls())
    by_id = dict(pairs)
    grid = [by_id[group[0]].onset_sec for group in index.note_groups]
    assert all(b > a for a, b in zip(grid, grid[1:]))


def test_read_alignment_valid():
    score = simple_score([0, 1, 2])
    performance = Performance(tuple(PerformedNote(60 + i, 0.5 * i, 0.4, 70) for i in range(3)))
    csv_data = b"score_note_id,perf_note_index\nn0,0\nn1,1\nn2,2\n"
    alignment = read_alignment(csv_data, score, performance)
    assert alignment.pairs == {"n0": 0, "n1": 1, "n2": 2}


def test_read_alignment_unknown_id():
    score = simple_score([0, 1])
    performance = Performance((PerformedNote(60, 0.0, 0.4, 70), PerformedNote(61, 0.5, 0.4, 70)))
    with pytest.raises(AlignmentError, match="'ghost'"):
        read_alignment(b"score_note_id,perf_note_index\nghost,0\n", score, performance)


def test_read_alignment_not_injective():
    score = simple_score([0, 1])
    performance = Performance((PerformedNote(60, 0.0, 0.4, 70), PerformedNote(61, 0.5, 0.4, 70)))
    with pytest.raises(AlignmentError, match="not injective"):
        read_alignment(b"score_note_id,perf_note_index\nn0,0\nn1,0\n", score, performance)


def test_read_alignment_index_out_of_range():
    score = simple_score([0, 1])
    performance = Performance((PerformedNote(60, 0.0, 0.4, 70), PerformedNote(61, 0.5, 0.4, 70)))
    with pytest.raises(AlignmentError, match="out of range"):
        read_alignment(b"score_note_id,perf_note_index\nn0,5\n", score, performance)


def test_params_json_export():
    import json

    score = simple_score([0, 1, 2])
    performance = Performance(tuple(PerformedNote(60 + i, 0.5 * i, 0.4, 70 + i) for i in range(3)))
    params = standardize(encode(score, performance, identity_alignment(score)))
    doc = json.loads(params_to_json(params))
    assert set(doc) == {"vt", "lbpr", "vd", "tim", "art", "mean_beat_period"}
    assert len(doc["vt"]["values"]) == 3
    assert doc["vt"]["mean"] == pytest.approx(71.0)
