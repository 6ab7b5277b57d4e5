import time
from pathlib import Path

import numpy as np
import pytest

from contempo.basis import fit_feature_stats, note_basis
from contempo.models import PerformanceModel
from contempo.neural import NetworkConfig, TrainingConfig, init, train
from contempo.score import build_onset_index

from synth import downbeat_rule_corpus, random_score

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def demo_model() -> PerformanceModel:
    """Small deterministic model (untrained weights, real corpus stats)."""
    rng = np.random.default_rng(99)
    mats = []
    for _ in range(6):
        score = random_score(rng, n_onsets=(10, 20))
        mats.append(note_basis(score, build_onset_index(score)))
    stats = fit_feature_stats(mats)
    onset_net = init(NetworkConfig(input_size=18, output_size=2, hidden_size=6, seed=1))
    note_net = init(NetworkConfig(input_size=18, output_size=3, hidden_size=6, seed=2))
    return PerformanceModel(onset_net, note_net, stats)


@pytest.fixture(scope="session")
def downbeat_training():
    """Corpus with lbpr = 0.8 * downbeat + eps and a net trained on it."""
    rng = np.random.default_rng(20260809)
    dataset, stats, scores, onset_mats = downbeat_rule_corpus(rng, n_pieces=30)
    config = NetworkConfig(input_size=18, output_size=1, hidden_size=12, cell="lstm", seed=0)
    train_config = TrainingConfig(max_epochs=500, min_train_mse=0.045, seed=0)
    start = time.monotonic()
    params, history = train(dataset, config, train_config)
    elapsed = time.monotonic() - start
    return {
        "dataset": dataset,
        "stats": stats,
        "scores": scores,
        "onset_mats": onset_mats,
        "params": params,
        "history": history,
        "elapsed": elapsed,
    }
