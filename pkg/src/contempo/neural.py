"""Small bidirectional recurrent sequence regressors, written on bare numpy.

Forward and backward passes are explicit so that exact input Jacobians are
available: gradients of any output step with respect to any input step.
Cells: standard LSTM (gates i, f, o, g; no peepholes) and a plain tanh RNN.
Both directions feed a shared linear head,
``y[t] = h_fwd[t] @ Wout[:H] + h_bwd[t] @ Wout[H:] + bout``.
"""

import math
from dataclasses import dataclass

import numpy as np

PARAM_KEYS = ("wx_f", "wh_f", "b_f", "wx_b", "wh_b", "b_b", "w_out", "b_out")

CELLS = ("lstm", "tanh-rnn")


@dataclass(frozen=True)
class NetworkConfig:
    input_size: int
    output_size: int
    hidden_size: int = 16
    cell: str = "lstm"
    seed: int = 0

    def __post_init__(self):
        if self.input_size < 1 or self.output_size < 1 or self.hidden_size < 1:
            raise ValueError("network sizes must be >= 1")
        if self.cell not in CELLS:
            raise ValueError(f"unknown cell {self.cell!r}")

    @property
    def gate_factor(self) -> int:
        return 4 if self.cell == "lstm" else 1


@dataclass
class NetworkParams:
    config: NetworkConfig
    arrays: dict[str, np.ndarray]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.arrays[k].ravel() for k in PARAM_KEYS])

    def with_vector(self, vec: np.ndarray) -> "NetworkParams":
        arrays = {}
        pos = 0
        for k in PARAM_KEYS:
            a = self.arrays[k]
            arrays[k] = vec[pos : pos + a.size].reshape(a.shape).copy()
            pos += a.size
        return NetworkParams(self.config, arrays)


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    max_epochs: int = 500
    patience: int = 50
    holdout_fraction: float = 0.1
    min_train_mse: float | None = None  # optional extra stop once reached
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or self.clip_norm <= 0 or self.max_epochs < 1:
            raise ValueError("rates and limits must be positive")
        if not 0 < self.holdout_fraction < 1:
            raise ValueError("holdout fraction must be in (0, 1)")


def init(config: NetworkConfig) -> NetworkParams:
    """Seeded uniform(-s, s) init with s = 1/sqrt(fan_in); zero biases."""
    rng = np.random.default_rng(config.seed)
    k, h, out, g = config.input_size, config.hidden_size, config.output_size, config.gate_factor

    def uniform(fan_in, shape):
        s = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-s, s, shape)

    arrays = {
        "wx_f": uniform(k, (k, g * h)),
        "wh_f": uniform(h, (h, g * h)),
        "b_f": np.zeros(g * h),
        "wx_b": uniform(k, (k, g * h)),
        "wh_b": uniform(h, (h, g * h)),
        "b_b": np.zeros(g * h),
        "w_out": uniform(2 * h, (2 * h, out)),
        "b_out": np.zeros(out),
    }
    return NetworkParams(config, arrays)


def _sigmoid(z):
    # split by sign to avoid exp overflow on extreme pre-activations
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _lstm_run(wx, wh, b, x):
    T = x.shape[0]
    H = wh.shape[0]
    hs = np.zeros((T, H))
    steps = []
    h = np.zeros(H)
    c = np.zeros(H)
    for t in range(T):
        z = x[t] @ wx + h @ wh + b
        zi, zf, zo, zg = z[:H], z[H : 2 * H], z[2 * H : 3 * H], z[3 * H :]
        i = _sigmoid(zi)
        f = _sigmoid(zf)
        o = _sigmoid(zo)
        g = np.tanh(zg)
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        steps.append((x[t], h, c, i, f, o, g, tc))
        h = o * tc
        c = c_new
        hs[t] = h
    return hs, steps


def _lstm_back(wx, wh, steps, d_hs, want_param_grads=True):
    T = len(steps)
    K, H = wx.shape[0], wh.shape[0]
    dwx = np.zeros_like(wx) if want_param_grads else None
    dwh = np.zeros_like(wh) if want_param_grads else None
    db = np.zeros(4 * H) if want_param_grads else None
    dx = np.zeros((T, K))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in reversed(range(T)):
        xt, h_prev, c_prev, i, f, o, g, tc = steps[t]
        dh = d_hs[t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_next = dc * f
        dz = np.concatenate(
            [di * i * (1.0 - i), df * f * (1.0 - f), do * o * (1.0 - o), dg * (1.0 - g * g)]
        )
        if want_param_grads:
            dwx += np.outer(xt, dz)
            dwh += np.outer(h_prev, dz)
            db += dz
        dx[t] = wx @ dz
        dh_next = wh @ dz
    return (dwx, dwh, db), dx


def _rnn_run(wx, wh, b, x):
    T = x.shape[0]
    H = wh.shape[0]
    hs = np.zeros((T, H))
    steps = []
    h = np.zeros(H)
    for t in range(T):
        h_new = np.tanh(x[t] @ wx + h @ wh + b)
        steps.append((x[t], h, h_new))
        h = h_new
        hs[t] = h
    return hs, steps


def _rnn_back(wx, wh, steps, d_hs, want_param_grads=True):
    T = len(steps)
    K, H = wx.shape[0], wh.shape[0]
    dwx = np.zeros_like(wx) if want_param_grads else None
    dwh = np.zeros_like(wh) if want_param_grads else None
    db = np.zeros(H) if want_param_grads else None
    dx = np.zeros((T, K))
    dh_next = np.zeros(H)
    for t in reversed(range(T)):
        xt, h_prev, h = steps[t]
        dz = (d_hs[t] + dh_next) * (1.0 - h * h)
        if want_param_grads:
            dwx += np.outer(xt, dz)
            dwh += np.outer(h_prev, dz)
            db += dz
        dx[t] = wx @ dz
        dh_next = wh @ dz
    return (dwx, dwh, db), dx


def _cell_fns(cell: str):
    return (_lstm_run, _lstm_back) if cell == "lstm" else (_rnn_run, _rnn_back)


def _forward_cached(params: NetworkParams, x: np.ndarray):
    cfg = params.config
    a = params.arrays
    if x.ndim != 2 or x.shape[1] != cfg.input_size:
        raise ValueError(f"input shape {x.shape} does not match input_size {cfg.input_size}")
    run, _ = _cell_fns(cfg.cell)
    h_fwd, steps_f = run(a["wx_f"], a["wh_f"], a["b_f"], x)
    h_bwd_rev, steps_b = run(a["wx_b"], a["wh_b"], a["b_b"], x[::-1])
    h_bwd = h_bwd_rev[::-1]
    H = cfg.hidden_size
    y = h_fwd @ a["w_out"][:H] + h_bwd @ a["w_out"][H:] + a["b_out"]
    return y, (x, h_fwd, h_bwd, steps_f, steps_b)


def forward(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Deterministic sequence output, shape T x output_size."""
    y, _ = _forward_cached(params, np.asarray(x, dtype=float))
    return y


def _backward(params: NetworkParams, cache, dy, want_param_grads=True):
    cfg = params.config
    a = params.arrays
    x, h_fwd, h_bwd, steps_f, steps_b = cache
    H = cfg.hidden_size
    _, back = _cell_fns(cfg.cell)

    d_hf = dy @ a["w_out"][:H].T
    d_hb = dy @ a["w_out"][H:].T
    (gf, dx_f) = back(a["wx_f"], a["wh_f"], steps_f, d_hf, want_param_grads)
    (gb, dx_b_rev) = back(a["wx_b"], a["wh_b"], steps_b, d_hb[::-1], want_param_grads)
    dx = dx_f + dx_b_rev[::-1]
    if not want_param_grads:
        return None, dx

    grads = {
        "wx_f": gf[0],
        "wh_f": gf[1],
        "b_f": gf[2],
        "wx_b": gb[0],
        "wh_b": gb[1],
        "b_b": gb[2],
        "w_out": np.vstack([h_fwd.T @ dy, h_bwd.T @ dy]),
        "b_out": dy.sum(axis=0),
    }
    return grads, dx


def loss_and_grads(params: NetworkParams, x: np.ndarray, target: np.ndarray):
    """MSE over all steps and output dims, with full-BPTT parameter grads."""
    x = np.asarray(x, dtype=float)
    target = np.asarray(target, dtype=float)
    y, cache = _forward_cached(params, x)
    if target.shape != y.shape:
        raise ValueError(f"target shape {target.shape} does not match output {y.shape}")
    diff = y - target
    mse = float(np.mean(diff * diff))
    dy = (2.0 / diff.size) * diff
    grads, _ = _backward(params, cache, dy)
    return mse, grads


def input_jacobian(params: NetworkParams, x: np.ndarray, output_dim: int) -> np.ndarray:
    """Exact Jacobian G[i, t, j] = d y[i, output_dim] / d x[t, j].

    One reverse-mode pass per output step over a single shared forward
    cache; passes are independent of each other.
    """
    x = np.asarray(x, dtype=float)
    if not 0 <= output_dim < params.config.output_size:
        raise ValueError(f"output dim {output_dim} out of range")
    y, cache = _forward_cached(params, x)
    T = x.shape[0]
    G = np.zeros((T, T, x.shape[1]))
    dy = np.zeros_like(y)
    for i in range(T):
        dy[i, output_dim] = 1.0
        _, dx = _backward(params, cache, dy, want_param_grads=False)
        G[i] = dx
        dy[i, output_dim] = 0.0
    return G


# ---------------------------------------------------------------------------
# Training

class Adam:
    """Adaptive moment estimation over a keyed set of arrays."""

    def __init__(self, arrays: dict[str, np.ndarray], lr, beta1, beta2, eps):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k in arrays:
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            arrays[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


@dataclass
class EpochStats:
    epoch: int
    train_mse: float
    holdout_mse: float


def _holdout_split(n: int, fraction: float, rng) -> tuple[list[int], list[int]]:
    if n == 1:
        return [0], [0]
    order = list(rng.permutation(n))
    n_hold = min(n - 1, max(1, int(round(fraction * n))))
    return order[n_hold:], order[:n_hold]


def train(dataset: list[tuple[np.ndarray, np.ndarray]], config: NetworkConfig,
          train_config: TrainingConfig = TrainingConfig()):
    """Train with Adam, one piece per step, gradients clipped at a global norm.

    A seeded fraction of the pieces is held out; training stops after
    ``patience`` epochs without holdout improvement (or when the running
    train MSE drops below ``min_train_mse``, when set) and the parameters
    best on the holdout are returned together with the per-epoch
    (train, holdout) loss history.
    """
    if not dataset:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(train_config.seed)
    train_idx, hold_idx = _holdout_split(len(dataset), train_config.holdout_fraction, rng)

    params = init(config)
    adam = Adam(params.arrays, train_config.learning_rate, train_config.beta1,
                train_config.beta2, train_config.eps)

    history: list[EpochStats] = []
    best = params.copy()
    best_loss = math.inf
    stale = 0
    for epoch in range(train_config.max_epochs):
        order = rng.permutation(len(train_idx))
        train_losses = []
        for j in order:
            x, target = dataset[train_idx[j]]
            mse, grads = loss_and_grads(params, x, target)
            clip_global_norm(grads, train_config.clip_norm)
            adam.step(params.arrays, grads)
            train_losses.append(mse)
        train_mse = float(np.mean(train_losses))

        hold_losses = []
        for j in hold_idx:
            x, target = dataset[j]
            y = forward(params, x)
            hold_losses.append(float(np.mean((y - target) ** 2)))
        holdout_mse = float(np.mean(hold_losses))
        history.append(EpochStats(epoch, train_mse, holdout_mse))

        if holdout_mse < best_loss:
            best_loss = holdout_mse
            best = params.copy()
            stale = 0
        else:
            stale += 1
            if stale >= train_config.patience:
                break
        if train_config.min_train_mse is not None and train_mse < train_config.min_train_mse:
            best = params.copy()
            break
    return best, history
