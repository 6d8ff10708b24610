"""
Fully connected ReLU regression networks, written directly in numpy.

Parameters live in one flat float64 vector laid out as
``[W_0, b_0, W_1, b_1, ...]`` with each ``W_l`` row-major of shape
``(d_{l+1}, d_l)``.  Hidden layers compute ``a = relu(W a_prev + b)``; the
output layer is affine.

``forward``/``backward``/``adam_step`` are the reference implementation.
Training runs an equivalent compiled kernel (``engine="numba"``) by default;
``engine="numpy"`` trains through the reference functions.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba
import numpy as np

from .dataset import Dataset, NormalizationStats

MODEL_FORMAT = "aldsat-mlp"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """Raised when a model document cannot be loaded."""

    def __init__(self, reason: str, field: str | None = None):
        super().__init__(reason if field is None else f"{field}: {reason}")
        self.reason = reason
        self.field = field


def architecture(n_points: int, hidden=()) -> tuple[int, ...]:
    """Layer widths for ``n_points`` thickness inputs plus the dose time."""
    hidden = tuple(int(h) for h in hidden)
    if any(h < 1 for h in hidden):
        raise ValueError("hidden widths must be positive")
    return (n_points + 1, *hidden, 1)


def count_parameters(dims) -> int:
    return sum(d_in * d_out + d_out for d_in, d_out in zip(dims[:-1], dims[1:]))


def _offsets(dims):
    offs = []
    pos = 0
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        offs.append((pos, pos + d_in * d_out, pos + d_in * d_out + d_out))
        pos += d_in * d_out + d_out
    return offs


def split_params(dims, flat: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Views of a flat parameter (or gradient) vector as weight matrices and bias vectors."""
    weights, biases = [], []
    for (w0, b0, b1), d_in, d_out in zip(_offsets(dims), dims[:-1], dims[1:]):
        weights.append(flat[w0:b0].reshape(d_out, d_in))
        biases.append(flat[b0:b1])
    return weights, biases


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 100
    batch_size: int = 64
    shuffle_seed: int = 0
    init_seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or self.epsilon <= 0:
            raise ValueError("learning_rate must be >= 0 and epsilon > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam decay rates must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


@dataclass(eq=False)
class Mlp:
    dims: tuple[int, ...]
    params: np.ndarray
    stats: NormalizationStats | None = None
    init_seed: int | None = None
    config: TrainConfig | None = None

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) < 2 or self.dims[-1] != 1:
            raise ValueError("architecture must end in a single output")
        self.params = np.ascontiguousarray(self.params, dtype=np.float64)
        if self.params.shape != (count_parameters(self.dims),):
            raise ValueError(f"expected {count_parameters(self.dims)} parameters, got {self.params.shape}")

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def n_inputs(self) -> int:
        return self.dims[0]

    @property
    def hidden(self) -> tuple[int, ...]:
        return self.dims[1:-1]

    @property
    def weights(self) -> list[np.ndarray]:
        return split_params(self.dims, self.params)[0]

    @property
    def biases(self) -> list[np.ndarray]:
        return split_params(self.dims, self.params)[1]

    def copy(self) -> "Mlp":
        return Mlp(self.dims, self.params.copy(), self.stats, self.init_seed, self.config)


def init_mlp(dims, init_seed: int = 0) -> Mlp:
    """Uniform(-s, s) weights with s = sqrt(6 / fan_in); zero biases."""
    dims = tuple(dims)
    rng = np.random.default_rng([init_seed, 0])
    params = np.zeros(count_parameters(dims))
    for W, d_in in zip(split_params(dims, params)[0], dims[:-1]):
        s = np.sqrt(6.0 / d_in)
        W[...] = rng.uniform(-s, s, size=W.shape)
    return Mlp(dims, params, init_seed=init_seed)


# ---------------------------------------------------------------------------
# reference forward / backward / Adam
# ---------------------------------------------------------------------------


def forward(mlp: Mlp, x):
    """Evaluate the network on one input vector or a batch of rows.

    Returns ``(output, cache)`` where ``cache`` holds the activation entering
    each layer followed by the final output; ``output`` is a scalar for a
    single vector and a 1-D array for a batch.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = np.atleast_2d(x)
    if a.shape[1] != mlp.n_inputs:
        raise ValueError(f"input has {a.shape[1]} features, network expects {mlp.n_inputs}")
    weights, biases = split_params(mlp.dims, mlp.params)
    cache = [a]
    last = len(weights) - 1
    for l, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W.T + b
        a = z if l == last else np.maximum(z, 0.0)
        cache.append(a)
    out = a[:, 0]
    return (float(out[0]) if single else out), cache


def mse_loss(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape:
        raise ValueError("predictions and targets differ in shape")
    return float(np.mean((predictions - targets) ** 2))


def backward(mlp: Mlp, cache, d_output) -> np.ndarray:
    """Gradient of the loss w.r.t. every parameter, in the flat layout.

    ``d_output`` is dL/d(output) per batch row.  Hidden units with
    pre-activation exactly 0 pass no gradient.
    """
    weights, _ = split_params(mlp.dims, mlp.params)
    delta = np.asarray(d_output, dtype=np.float64).reshape(-1, 1)
    if delta.shape[0] != cache[0].shape[0] or len(cache) != len(weights) + 1:
        raise ValueError("upstream gradient does not match the cached batch")
    grad = np.zeros_like(mlp.params)
    gW, gb = split_params(mlp.dims, grad)
    for l in range(len(weights) - 1, -1, -1):
        a_prev = cache[l]
        gW[l][...] = delta.T @ a_prev
        gb[l][...] = delta.sum(axis=0)
        if l > 0:
            # ReLU output is positive exactly where the pre-activation is
            delta = (delta @ weights[l]) * (a_prev > 0)
    return grad


def mse_gradient(predictions, targets) -> np.ndarray:
    """dL/d(prediction) for the mean squared error."""
    predictions = np.asarray(predictions, dtype=np.float64)
    return 2.0 * (predictions - np.asarray(targets, dtype=np.float64)) / predictions.size


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, mlp: Mlp) -> "AdamState":
        return cls(np.zeros_like(mlp.params), np.zeros_like(mlp.params), 0)


def adam_step(mlp: Mlp, grads: np.ndarray, state: AdamState, config: TrainConfig) -> tuple[Mlp, AdamState]:
    """Bias-corrected Adam update, in place on ``mlp.params`` and ``state``."""
    if grads.shape != mlp.params.shape or state.m.shape != mlp.params.shape:
        raise ValueError("gradient/state shapes do not match the parameters")
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grads
    state.v *= b2
    state.v += (1.0 - b2) * grads * grads
    m_hat = state.m / (1.0 - b1**state.t)
    v_hat = state.v / (1.0 - b2**state.t)
    mlp.params -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
    return mlp, state


# ---------------------------------------------------------------------------
# compiled training kernel
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _batch_gradient(params, dims, w_off, b_off, X, y, idx, start, stop, grad, act, delta, delta_prev):
    """Accumulate the MSE gradient of rows idx[start:stop] into ``grad``; return the summed squared error."""
    n_layers = dims.size - 1
    n_batch = stop - start
    grad[:] = 0.0
    sq_err = 0.0
    for s in range(start, stop):
        r = idx[s]
        # forward; act[l] holds the activation entering layer l
        for j in range(dims[0]):
            act[0, j] = X[r, j]
        for l in range(n_layers):
            d_in = dims[l]
            d_out = dims[l + 1]
            for o in range(d_out):
                z = params[b_off[l] + o]
                base = w_off[l] + o * d_in
                for i in range(d_in):
                    z += params[base + i] * act[l, i]
                if l < n_layers - 1 and z < 0.0:
                    z = 0.0
                act[l + 1, o] = z
        err = act[n_layers, 0] - y[r]
        sq_err += err * err
        # backward
        delta[0] = 2.0 * err / n_batch
        for l in range(n_layers - 1, -1, -1):
            d_in = dims[l]
            d_out = dims[l + 1]
            for o in range(d_out):
                g = delta[o]
                grad[b_off[l] + o] += g
                base = w_off[l] + o * d_in
                for i in range(d_in):
                    grad[base + i] += g * act[l, i]
            if l > 0:
                for i in range(d_in):
                    acc = 0.0
                    if act[l, i] > 0.0:
                        for o in range(d_out):
                            acc += delta[o] * params[w_off[l] + o * d_in + i]
                    delta_prev[i] = acc
                for i in range(d_in):
                    delta[i] = delta_prev[i]
    return sq_err


@numba.njit(cache=True)
def _train_epoch(params, m, v, t, dims, w_off, b_off, X, y, idx, batch_size, lr, b1, b2, eps):
    n = idx.size
    width = 0
    for d in dims:
        width = max(width, d)
    grad = np.zeros_like(params)
    act = np.zeros((dims.size, width))
    delta = np.zeros(width)
    delta_prev = np.zeros(width)
    total = 0.0
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        total += _batch_gradient(params, dims, w_off, b_off, X, y, idx, start, stop, grad, act, delta, delta_prev)
        t += 1
        c1 = 1.0 - b1**t
        c2 = 1.0 - b2**t
        for k in range(params.size):
            g = grad[k]
            m[k] = b1 * m[k] + (1.0 - b1) * g
            v[k] = b2 * v[k] + (1.0 - b2) * g * g
            params[k] -= lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + eps)
    return t, total / n


def _kernel_layout(dims):
    offs = _offsets(dims)
    return (
        np.asarray(dims, dtype=np.int64),
        np.asarray([o[0] for o in offs], dtype=np.int64),
        np.asarray([o[1] for o in offs], dtype=np.int64),
    )


def batch_gradient(mlp: Mlp, X, y) -> tuple[np.ndarray, float]:
    """Compiled-kernel MSE gradient over a whole batch; returns (gradient, loss)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    dims, w_off, b_off = _kernel_layout(mlp.dims)
    width = max(mlp.dims)
    grad = np.zeros_like(mlp.params)
    idx = np.arange(len(y), dtype=np.int64)
    sq = _batch_gradient(
        mlp.params, dims, w_off, b_off, X, y, idx, 0, len(y), grad,
        np.zeros((len(dims), width)), np.zeros(width), np.zeros(width),
    )
    return grad, sq / len(y)


# ---------------------------------------------------------------------------
# training and inference
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    mlp: Mlp
    loss_history: list[float]  # training-set MSE after each epoch
    initial_loss: float
    state: AdamState = field(repr=False, default=None)


def train(mlp: Mlp, train_data: Dataset, config: TrainConfig, engine: str = "numba") -> TrainResult:
    """Minibatch Adam on standardized inputs/targets; returns a trained copy.

    Rows are reshuffled every epoch from ``config.shuffle_seed``; the final
    partial batch is kept.  The recorded loss is the full training-set MSE in
    standardized log space after each epoch.
    """
    if len(train_data) == 0:
        raise ValueError("cannot train on an empty dataset")
    stats = train_data.stats or mlp.stats
    if stats is None:
        raise ValueError("training data carries no normalization stats")
    X, y = train_data.standardized(stats)
    X = np.ascontiguousarray(X)
    y = np.ascontiguousarray(y)
    if X.shape[1] != mlp.n_inputs:
        raise ValueError(f"dataset has {X.shape[1]} features, network expects {mlp.n_inputs}")

    model = Mlp(mlp.dims, mlp.params.copy(), stats, mlp.init_seed, config)
    state = AdamState.zeros(model)
    rng = np.random.default_rng([config.shuffle_seed, 1])
    initial = mse_loss(forward(model, X)[0], y)
    history = []
    dims, w_off, b_off = _kernel_layout(model.dims)
    for _ in range(config.epochs):
        order = rng.permutation(len(y)).astype(np.int64)
        if engine == "numba":
            state.t, _ = _train_epoch(
                model.params, state.m, state.v, state.t, dims, w_off, b_off, X, y, order,
                config.batch_size, config.learning_rate, config.beta1, config.beta2, config.epsilon,
            )
        elif engine == "numpy":
            for start in range(0, len(order), config.batch_size):
                rows = order[start : start + config.batch_size]
                pred, cache = forward(model, X[rows])
                adam_step(model, backward(model, cache, mse_gradient(pred, y[rows])), state, config)
        else:
            raise ValueError(f"unknown engine {engine!r}")
        loss = mse_loss(forward(model, X)[0], y)
        if not np.isfinite(loss):
            raise FloatingPointError(f"training diverged (loss={loss})")
        history.append(loss)
    return TrainResult(model, history, initial, state)


def predict_log10(mlp: Mlp, thickness, dose_time) -> np.ndarray:
    if mlp.stats is None:
        raise ValueError("model has no normalization stats")
    thickness = np.atleast_2d(np.asarray(thickness, dtype=np.float64))
    if thickness.shape[1] != mlp.n_inputs - 1:
        raise ValueError(f"expected {mlp.n_inputs - 1} thickness values, got {thickness.shape[1]}")
    dose = np.atleast_1d(np.asarray(dose_time, dtype=np.float64))
    raw = np.column_stack([thickness, np.log10(dose)])
    z = (raw - mlp.stats.input_mean) / mlp.stats.input_std
    out, _ = forward(mlp, z)
    return out * mlp.stats.target_std + mlp.stats.target_mean


def predict_tsat(mlp: Mlp, thickness, dose_time):
    """Saturation time (s) from a thickness profile (nm) and dose time (s).

    Accepts one profile or a batch of rows.
    """
    t = 10.0 ** predict_log10(mlp, thickness, dose_time)
    return float(t[0]) if np.ndim(thickness) == 1 else t


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def model_to_dict(mlp: Mlp) -> dict:
    weights, biases = split_params(mlp.dims, mlp.params)
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "dims": list(mlp.dims),
        "weights": [W.tolist() for W in weights],
        "biases": [b.tolist() for b in biases],
        "stats": None if mlp.stats is None else mlp.stats.to_dict(),
        "init_seed": mlp.init_seed,
        "train_config": None if mlp.config is None else asdict(mlp.config),
    }


def model_from_dict(doc: dict) -> Mlp:
    if doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"not a model document (format={doc.get('format')!r})", "format")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported version {doc.get('version')!r}", "version")
    for key in ("dims", "weights", "biases", "stats"):
        if key not in doc:
            raise ModelFormatError("missing", key)
    if doc["stats"] is None:
        raise ModelFormatError("model has no normalization stats", "stats")
    dims = tuple(doc["dims"])
    params = np.zeros(count_parameters(dims))
    weights, biases = split_params(dims, params)
    try:
        for W, b, w_src, b_src in zip(weights, biases, doc["weights"], doc["biases"], strict=True):
            W[...] = np.asarray(w_src, dtype=np.float64)
            b[...] = np.asarray(b_src, dtype=np.float64)
        stats = NormalizationStats.from_dict(doc["stats"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed parameters: {exc}", "weights") from exc
    config = None if doc.get("train_config") is None else TrainConfig(**doc["train_config"])
    return Mlp(dims, params, stats, doc.get("init_seed"), config)


def save_model(mlp: Mlp, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(mlp), indent=1) + "\n")


def load_model(path) -> Mlp:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from exc
    return model_from_dict(doc)
