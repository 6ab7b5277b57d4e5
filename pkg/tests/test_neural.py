import math

import numpy as np
import pytest

from contempo.neural import (
    PARAM_KEYS,
    NetworkConfig,
    TrainingConfig,
    clip_global_norm,
    forward,
    init,
    input_jacobian,
    loss_and_grads,
    train,
)


def param_count(config: NetworkConfig) -> int:
    k, h, out, g = config.input_size, config.hidden_size, config.output_size, config.gate_factor
    per_cell = k * g * h + h * g * h + g * h
    return 2 * per_cell + 2 * h * out + out


def flatten_grads(grads) -> np.ndarray:
    return np.concatenate([grads[k].ravel() for k in PARAM_KEYS])


def fd_param_gradient(params, x, target, eps=1e-5):
    vec = params.as_vector()
    out = np.zeros_like(vec)
    for i in range(len(vec)):
        up, down = vec.copy(), vec.copy()
        up[i] += eps
        down[i] -= eps
        lu, _ = loss_and_grads(params.with_vector(up), x, target)
        ld, _ = loss_and_grads(params.with_vector(down), x, target)
        out[i] = (lu - ld) / (2 * eps)
    return out


def fd_input_jacobian(params, x, d, eps=1e-5):
    T, K = x.shape
    G = np.zeros((T, T, K))
    for t in range(T):
        for j in range(K):
            up, down = x.copy(), x.copy()
            up[t, j] += eps
            down[t, j] -= eps
            G[:, t, j] = (forward(params, up)[:, d] - forward(params, down)[:, d]) / (2 * eps)
    return G


def assert_close_fd(actual, expected, rel=1e-4, floor=1e-6):
    scale = np.maximum(floor, np.maximum(np.abs(actual), np.abs(expected)))
    assert np.max(np.abs(actual - expected) / scale) < rel


def test_init_deterministic_and_seed_sensitive():
    cfg = NetworkConfig(input_size=3, output_size=2, hidden_size=4, seed=7)
    a, b = init(cfg), init(cfg)
    for key in PARAM_KEYS:
        assert np.array_equal(a.arrays[key], b.arrays[key])
    other = init(NetworkConfig(input_size=3, output_size=2, hidden_size=4, seed=8))
    assert any(not np.array_equal(a.arrays[k], other.arrays[k]) for k in PARAM_KEYS)


@pytest.mark.parametrize("cell,expected_gates", [("lstm", 4), ("tanh-rnn", 1)])
def test_shapes_match_formula(cell, expected_gates):
    cfg = NetworkConfig(input_size=1, output_size=1, hidden_size=1, cell=cell)
    params = init(cfg)
    assert cfg.gate_factor == expected_gates
    assert params.as_vector().size == param_count(cfg)
    assert params.arrays["wx_f"].shape == (1, expected_gates)


def test_biases_start_at_zero():
    params = init(NetworkConfig(input_size=2, output_size=1, hidden_size=3))
    for key in ("b_f", "b_b", "b_out"):
        assert np.all(params.arrays[key] == 0.0)


def test_forward_single_step_matches_cell():
    cfg = NetworkConfig(input_size=2, output_size=1, hidden_size=3, seed=1)
    params = init(cfg)
    x = np.array([[0.3, -0.7]])
    y = forward(params, x)
    assert y.shape == (1, 1)
    # with T=1 both directions see the same single step
    h = cfg.hidden_size
    swapped = params.copy()
    swapped.arrays["wx_f"], swapped.arrays["wx_b"] = params.arrays["wx_b"], params.arrays["wx_f"]
    swapped.arrays["wh_f"], swapped.arrays["wh_b"] = params.arrays["wh_b"], params.arrays["wh_f"]
    swapped.arrays["b_f"], swapped.arrays["b_b"] = params.arrays["b_b"], params.arrays["b_f"]
    swapped.arrays["w_out"] = np.vstack([params.arrays["w_out"][h:], params.arrays["w_out"][:h]])
    assert np.allclose(forward(swapped, x), y, atol=1e-12)


def test_reversal_symmetry():
    cfg = NetworkConfig(input_size=3, output_size=2, hidden_size=4, seed=3)
    params = init(cfg)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 3))
    h = cfg.hidden_size
    swapped = params.copy()
    swapped.arrays["wx_f"], swapped.arrays["wx_b"] = params.arrays["wx_b"], params.arrays["wx_f"]
    swapped.arrays["wh_f"], swapped.arrays["wh_b"] = params.arrays["wh_b"], params.arrays["wh_f"]
    swapped.arrays["b_f"], swapped.arrays["b_b"] = params.arrays["b_b"], params.arrays["b_f"]
    swapped.arrays["w_out"] = np.vstack([params.arrays["w_out"][h:], params.arrays["w_out"][:h]])
    assert np.allclose(forward(swapped, x[::-1]), forward(params, x)[::-1], atol=1e-12)


def test_zero_weights_output_head_bias():
    cfg = NetworkConfig(input_size=2, output_size=3, hidden_size=4, seed=0)
    params = init(cfg)
    for key in PARAM_KEYS:
        params.arrays[key][:] = 0.0
    params.arrays["b_out"][:] = [1.0, -2.0, 0.5]
    y = forward(params, np.ones((5, 2)))
    assert np.allclose(y, np.tile([1.0, -2.0, 0.5], (5, 1)))


def test_loss_zero_at_target():
    cfg = NetworkConfig(input_size=2, output_size=2, hidden_size=3, seed=2)
    params = init(cfg)
    x = np.random.default_rng(1).normal(size=(4, 2))
    target = forward(params, x)
    mse, grads = loss_and_grads(params, x, target)
    assert mse == 0.0
    assert all(np.all(grads[k] == 0.0) for k in PARAM_KEYS)


def test_loss_scaling():
    cfg = NetworkConfig(input_size=2, output_size=1, hidden_size=3, seed=2)
    params = init(cfg)
    rng = np.random.default_rng(4)
    x = rng.normal(size=(5, 2))
    err = rng.normal(size=(5, 1))
    base = forward(params, x)
    mse1, _ = loss_and_grads(params, x, base + err)
    mse2, _ = loss_and_grads(params, x, base + 2 * err)
    assert math.sqrt(mse2) == pytest.approx(2 * math.sqrt(mse1), rel=1e-12)


@pytest.mark.parametrize("cell", ["lstm", "tanh-rnn"])
def test_param_gradients_match_finite_differences(cell):
    cfg = NetworkConfig(input_size=3, output_size=2, hidden_size=4, cell=cell, seed=0)
    params = init(cfg)
    rng = np.random.default_rng(11)
    x = rng.normal(size=(4, 3))
    target = rng.normal(size=(4, 2))
    _, grads = loss_and_grads(params, x, target)
    assert_close_fd(flatten_grads(grads), fd_param_gradient(params, x, target))


@pytest.mark.parametrize("cell", ["lstm", "tanh-rnn"])
def test_input_jacobian_matches_finite_differences(cell):
    cfg = NetworkConfig(input_size=2, output_size=2, hidden_size=4, cell=cell, seed=0)
    params = init(cfg)
    x = np.random.default_rng(12).normal(size=(3, 2))
    for d in range(2):
        assert_close_fd(input_jacobian(params, x, d), fd_input_jacobian(params, x, d))


def test_rnn_zero_recurrence_has_no_temporal_coupling():
    cfg = NetworkConfig(input_size=3, output_size=1, hidden_size=4, cell="tanh-rnn", seed=5)
    params = init(cfg)
    params.arrays["wh_f"][:] = 0.0
    params.arrays["wh_b"][:] = 0.0
    x = np.random.default_rng(2).normal(size=(5, 3))
    G = input_jacobian(params, x, 0)
    for i in range(5):
        for t in range(5):
            if t != i:
                assert np.all(G[i, t] == 0.0)


def test_rnn_zero_recurrence_constant_diagonal_on_constant_input():
    cfg = NetworkConfig(input_size=3, output_size=1, hidden_size=4, cell="tanh-rnn", seed=5)
    params = init(cfg)
    params.arrays["wh_f"][:] = 0.0
    params.arrays["wh_b"][:] = 0.0
    x = np.tile(np.array([0.2, -0.4, 1.0]), (5, 1))
    G = input_jacobian(params, x, 0)
    diag = np.array([G[i, i] for i in range(5)])
    assert np.allclose(diag, diag[0], atol=1e-12)


def test_jacobian_output_dim_range():
    params = init(NetworkConfig(input_size=2, output_size=1, hidden_size=2))
    with pytest.raises(ValueError, match="out of range"):
        input_jacobian(params, np.zeros((2, 2)), 1)


def test_shape_mismatch_errors():
    params = init(NetworkConfig(input_size=3, output_size=1, hidden_size=2))
    with pytest.raises(ValueError, match="input_size"):
        forward(params, np.zeros((4, 2)))
    with pytest.raises(ValueError, match="target shape"):
        loss_and_grads(params, np.zeros((4, 3)), np.zeros((4, 2)))


def test_clip_global_norm():
    grads = {"a": np.full(4, 3.0), "b": np.full(9, 4.0)}
    norm = clip_global_norm(grads, 5.0)
    assert norm == pytest.approx(math.sqrt(36 + 144))
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    assert total == pytest.approx(5.0)


def make_rule_dataset(rng, n_pieces=8, hidden_feature=2):
    dataset = []
    for _ in range(n_pieces):
        T = int(rng.integers(10, 20))
        x = rng.normal(size=(T, 4))
        x[:, hidden_feature] = rng.choice([0.0, 1.0], size=T)
        target = 0.8 * x[:, hidden_feature] + rng.normal(0, 0.01, size=T)
        dataset.append((x, target[:, None]))
    return dataset


def test_train_learns_single_feature_rule():
    rng = np.random.default_rng(42)
    dataset = make_rule_dataset(rng)
    cfg = NetworkConfig(input_size=4, output_size=1, hidden_size=8, seed=0)
    tcfg = TrainingConfig(max_epochs=500, min_train_mse=0.045, seed=0)
    params, history = train(dataset, cfg, tcfg)
    assert history[-1].train_mse < 0.05
    assert len(history) <= 500
    assert not any(math.isnan(h.train_mse) or math.isnan(h.holdout_mse) for h in history)


def test_train_zero_learning_rate_keeps_params():
    rng = np.random.default_rng(1)
    dataset = [(rng.normal(size=(5, 3)), rng.normal(size=(5, 1)))]
    cfg = NetworkConfig(input_size=3, output_size=1, hidden_size=4, seed=9)
    tcfg = TrainingConfig(learning_rate=0.0, max_epochs=5, seed=0)
    params, history = train(dataset, cfg, tcfg)
    fresh = init(cfg)
    for key in PARAM_KEYS:
        assert np.array_equal(params.arrays[key], fresh.arrays[key])
    losses = [h.train_mse for h in history]
    assert max(losses) - min(losses) < 1e-15


def test_train_deterministic_given_seed():
    rng = np.random.default_rng(2)
    dataset = [(rng.normal(size=(6, 3)), rng.normal(size=(6, 2))) for _ in range(3)]
    cfg = NetworkConfig(input_size=3, output_size=2, hidden_size=4, seed=1)
    tcfg = TrainingConfig(max_epochs=10, seed=3)
    params_a, hist_a = train(dataset, cfg, tcfg)
    params_b, hist_b = train(dataset, cfg, tcfg)
    assert [h.train_mse for h in hist_a] == [h.train_mse for h in hist_b]
    for key in PARAM_KEYS:
        assert np.array_equal(params_a.arrays[key], params_b.arrays[key])


def test_train_empty_dataset_rejected():
    with pytest.raises(ValueError, match="empty dataset"):
        train([], NetworkConfig(input_size=2, output_size=1))
