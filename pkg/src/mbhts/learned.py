"""Supervised surrogate of the joint allocator.

A fully-connected network maps min-max normalized channel magnitudes to
min-max normalized JointOpt powers.  At inference the output is
denormalized and rescaled to spend the whole budget; the satisfied set is
then read off the predicted powers like any other allocation.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .allocators import AllocationResult, joint_optimize
from .errors import CorruptModelError, DivergenceError, InvalidConfigurationError
from .link_metrics import rates, satisfied_set
from .precoding import coupling_matrix, make_precoder
from .scenario import draw_channel

__all__ = [
    "NormStats",
    "Dataset",
    "MlpModel",
    "TrainConfig",
    "LearnedAllocator",
    "build_dataset",
    "fit_normalization",
    "normalize_features",
    "normalize_labels",
    "denormalize_labels",
    "mlp_forward",
    "mse_loss",
    "train",
    "predict_allocation",
    "save_model",
    "load_model",
]

MAGIC = "MBHTS-MLP 1"
HIDDEN = (128, 64)


# -- data -------------------------------------------------------------------------

@dataclass
class Dataset:
    """Channel-magnitude features and JointOpt power labels.

    ``test_mu`` keeps the test coupling matrices and ``test_label_ms`` the
    JointOpt run times, so predictions can be scored and timed against the
    model-based solver on the very same drops.
    """

    x_train: np.ndarray
    p_train: np.ndarray
    x_test: np.ndarray
    p_test: np.ndarray
    test_mu: np.ndarray
    test_label_ms: np.ndarray
    xi: float
    precoder: str
    max_power: float


def _label(params, seed, xi, precoder):
    _, channel = draw_channel(params, seed)
    W = make_precoder(precoder, channel.H, params.noise_power, params.max_power_w)
    mu = coupling_matrix(channel.H, W)
    result = joint_optimize(mu, params.noise_power, params.bandwidth_mhz, xi, params.max_power_w)
    return channel.gain_features(), result.powers, mu, result.wall_time_ms


def build_dataset(n_train, n_test, params, seed=0, xi=500.0, precoder="rzf"):
    """Label ``n_train + n_test`` independent drops with JointOpt.

    Drop ``i`` uses seed ``seed + i``; the test drops follow the training
    ones, so the split is deterministic.
    """
    if n_train <= 0 or n_test <= 0:
        raise InvalidConfigurationError("dataset sizes must be positive")
    rows = [_label(params, seed + i, xi, precoder) for i in range(n_train + n_test)]
    x = np.array([r[0] for r in rows])
    p = np.array([r[1] for r in rows])
    mu = np.array([r[2] for r in rows[n_train:]])
    ms = np.array([r[3] for r in rows[n_train:]])
    return Dataset(x[:n_train], p[:n_train], x[n_train:], p[n_train:], mu, ms,
                   float(xi), precoder, params.max_power_w)


@dataclass
class NormStats:
    x_min: np.ndarray
    x_max: np.ndarray
    p_min: np.ndarray
    p_max: np.ndarray


def fit_normalization(x_train, p_train):
    """Per-coordinate ranges of the training features and labels."""
    x_train = np.asarray(x_train, dtype=float)
    p_train = np.asarray(p_train, dtype=float)
    return NormStats(x_train.min(axis=0), x_train.max(axis=0),
                     p_train.min(axis=0), p_train.max(axis=0))


def _scale(v, lo, hi):
    span = hi - lo
    flat = span <= 0
    if np.any(flat):
        warnings.warn(f"{int(flat.sum())} coordinate(s) have zero range; mapped to 0",
                      RuntimeWarning, stacklevel=3)
    out = (np.asarray(v, dtype=float) - lo) / np.where(flat, 1.0, span)
    return np.where(flat, 0.0, out)


def normalize_features(x, stats):
    return _scale(x, stats.x_min, stats.x_max)


def normalize_labels(p, stats):
    return _scale(p, stats.p_min, stats.p_max)


def denormalize_labels(p_norm, stats):
    return np.asarray(p_norm) * (stats.p_max - stats.p_min) + stats.p_min


# -- network ----------------------------------------------------------------------

def _relu(z):
    return np.maximum(z, 0.0)


_TINY = np.finfo(float).tiny
_BELOW_ONE = np.nextafter(1.0, 0.0)


def _sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    # keep the open range even where the logistic rounds to 0 or 1
    return np.clip(out, _TINY, _BELOW_ONE)


_ACTIVATIONS = {"relu": _relu, "sigmoid": _sigmoid}


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 300
    patience: int = 10
    validation_fraction: float = 0.1
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class MlpModel:
    """Dense network with rectifier hidden layers and a logistic output."""

    weights: list
    biases: list
    activations: tuple
    hyper: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def initialize(cls, sizes, seed=0, hyper=None):
        """Uniform weights with limit ``sqrt(6 / fan_in)``, zero biases."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        acts = ("relu",) * (len(sizes) - 2) + ("sigmoid",)
        return cls(weights, biases, acts, hyper or TrainConfig(seed=seed))

    @classmethod
    def for_system(cls, n_users, n_beams, seed=0, hyper=None):
        return cls.initialize([n_users * n_beams, *HIDDEN, n_users], seed, hyper)

    @property
    def sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self):
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        self.activations, self.hyper)


def _forward(model, x):
    """Output plus the per-layer inputs and pre-activations needed by backprop."""
    a = np.atleast_2d(x)
    inputs, pre = [], []
    for W, b, act in zip(model.weights, model.biases, model.activations):
        inputs.append(a)
        z = a @ W + b
        pre.append(z)
        a = _ACTIVATIONS[act](z)
    return a, inputs, pre


def mlp_forward(model, x_in):
    """Normalized power prediction in (0, 1)^K for one input or a batch."""
    out = _forward(model, x_in)[0]
    return out[0] if np.ndim(x_in) == 1 else out


def mse_loss(pred, target):
    """Mean over samples of the squared error summed over users."""
    return float(np.mean(np.sum((pred - target) ** 2, axis=-1)))


def loss_and_gradients(model, x, y):
    """MSE and its gradient for every weight and bias."""
    out, inputs, pre = _forward(model, x)
    n = out.shape[0]
    loss = mse_loss(out, y)
    grads_w, grads_b = [None] * len(model.weights), [None] * len(model.weights)
    delta = 2.0 * (out - y) / n
    for i in reversed(range(len(model.weights))):
        if model.activations[i] == "sigmoid":
            delta = delta * out * (1.0 - out) if i == len(model.weights) - 1 else \
                delta * _sigmoid(pre[i]) * (1.0 - _sigmoid(pre[i]))
        else:
            delta = delta * (pre[i] > 0)
        grads_w[i] = inputs[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i:
            delta = delta @ model.weights[i].T
    return loss, grads_w, grads_b


def train(model, x_train, y_train, x_val=None, y_val=None, hyper=None):
    """Mini-batch Adam on the MSE with early stopping on validation MSE.

    Inputs and targets must already be normalized.  Without an explicit
    validation set the last ``validation_fraction`` of the (seeded,
    shuffled) training set is held out.  Returns the best-validation
    model and a history dict whose entry 0 is the untrained model.
    """
    hyper = hyper or model.hyper
    rng = np.random.default_rng(hyper.seed)
    x_train = np.asarray(x_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float)
    if len(x_train) == 0:
        raise InvalidConfigurationError("empty training set")
    if x_val is None:
        order = rng.permutation(len(x_train))
        n_val = max(1, int(round(hyper.validation_fraction * len(x_train))))
        if n_val >= len(x_train):
            n_val = 0
        val_idx, fit_idx = order[len(order) - n_val:], order[:len(order) - n_val]
        x_val, y_val = x_train[val_idx], y_train[val_idx]
        x_train, y_train = x_train[fit_idx], y_train[fit_idx]
    model = model.copy()
    params = model.weights + model.biases
    m = [np.zeros_like(q) for q in params]
    v = [np.zeros_like(q) for q in params]
    step = 0

    def evaluate():
        tr = mse_loss(mlp_forward(model, x_train), y_train)
        va = mse_loss(mlp_forward(model, x_val), y_val) if len(x_val) else tr
        return tr, va

    tr, va = evaluate()
    history = {"train": [tr], "validation": [va]}
    best, best_val, stale = model.copy(), va, 0
    for epoch in range(1, hyper.epochs + 1):
        order = rng.permutation(len(x_train))
        for start in range(0, len(order), hyper.batch_size):
            batch = order[start:start + hyper.batch_size]
            loss, gw, gb = loss_and_gradients(model, x_train[batch], y_train[batch])
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            step += 1
            for q, g, mq, vq in zip(params, gw + gb, m, v):
                mq *= hyper.beta1
                mq += (1 - hyper.beta1) * g
                vq *= hyper.beta2
                vq += (1 - hyper.beta2) * g * g
                m_hat = mq / (1 - hyper.beta1 ** step)
                v_hat = vq / (1 - hyper.beta2 ** step)
                q -= hyper.learning_rate * m_hat / (np.sqrt(v_hat) + hyper.eps)
        tr, va = evaluate()
        if not (np.isfinite(tr) and np.isfinite(va)):
            raise DivergenceError(epoch)
        history["train"].append(tr)
        history["validation"].append(va)
        if va < best_val:
            best, best_val, stale = model.copy(), va, 0
        else:
            stale += 1
            if stale >= hyper.patience:
                break
    return best, history


# -- inference ----------------------------------------------------------------------

def predict_allocation(model, stats, x, max_power):
    """Budget-spending power vector(s) predicted from raw channel magnitudes."""
    x = np.asarray(x, dtype=float)
    p = denormalize_labels(mlp_forward(model, normalize_features(x, stats)), stats)
    p = np.atleast_2d(p)
    total = p.sum(axis=1, keepdims=True)
    empty = total[:, 0] <= 0
    if np.any(empty):
        warnings.warn("predicted powers sum to zero; falling back to equal power",
                      RuntimeWarning, stacklevel=2)
        p[empty] = 1.0
        total = p.sum(axis=1, keepdims=True)
    p = max_power * p / total
    return p[0] if x.ndim == 1 else p


@dataclass
class LearnedAllocator:
    """Trained network bundled with its normalization statistics."""

    model: MlpModel
    stats: NormStats
    xi: float = float("nan")
    precoder: str = ""

    def allocate(self, channel, mu, noise_power, bandwidth, xi, max_power):
        start = time.perf_counter()
        p = predict_allocation(self.model, self.stats, channel.gain_features(), max_power)
        elapsed = 1e3 * (time.perf_counter() - start)
        r = rates(p, mu, noise_power, bandwidth)
        Q = satisfied_set(p, mu, noise_power, bandwidth, xi)
        return AllocationResult(p, Q, r, "Learned", 0, [(0, len(Q), float(r.sum()))], elapsed)


def fit_allocator(dataset, seed=0, hyper=None):
    """Normalize, train and bundle; returns the allocator and training history.

    The test split doubles as the validation set for early stopping.
    """
    stats = fit_normalization(dataset.x_train, dataset.p_train)
    K = dataset.p_train.shape[1]
    N = dataset.x_train.shape[1] // K
    hyper = hyper or TrainConfig(seed=seed)
    model = MlpModel.for_system(K, N, seed=seed, hyper=hyper)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        x_tr = normalize_features(dataset.x_train, stats)
        y_tr = normalize_labels(dataset.p_train, stats)
        x_te = normalize_features(dataset.x_test, stats)
        y_te = normalize_labels(dataset.p_test, stats)
    model, history = train(model, x_tr, y_tr, x_te, y_te, hyper)
    return LearnedAllocator(model, stats, dataset.xi, dataset.precoder), history


# -- persistence -------------------------------------------------------------------------

def save_model(allocator, path):
    """Write a versioned text file: magic line, then one JSON document."""
    model, stats = allocator.model, allocator.stats
    doc = {
        "sizes": model.sizes,
        "activations": list(model.activations),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "stats": {k: getattr(stats, k).tolist() for k in ("x_min", "x_max", "p_min", "p_max")},
        "hyper": vars(model.hyper),
        "xi": allocator.xi,
        "precoder": allocator.precoder,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MAGIC + "\n")
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        body = fh.read()
    if header != MAGIC:
        raise CorruptModelError(f"{path}: bad header {header!r}")
    try:
        doc = json.loads(body)
        sizes = doc["sizes"]
        weights = [np.array(w, dtype=float) for w in doc["weights"]]
        biases = [np.array(b, dtype=float) for b in doc["biases"]]
        stats = NormStats(*(np.array(doc["stats"][k], dtype=float)
                            for k in ("x_min", "x_max", "p_min", "p_max")))
        activations = tuple(doc["activations"])
        hyper = TrainConfig(**doc.get("hyper", {}))
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptModelError(f"{path}: {exc}") from exc
    if len(weights) != len(sizes) - 1 or len(biases) != len(weights) \
            or len(activations) != len(weights):
        raise CorruptModelError(f"{path}: layer count mismatch")
    for i, (W, b) in enumerate(zip(weights, biases)):
        if W.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
            raise CorruptModelError(f"{path}: layer {i} has shape {W.shape}/{b.shape}")
    if any(a not in _ACTIVATIONS for a in activations):
        raise CorruptModelError(f"{path}: unknown activation in {activations}")
    if stats.x_min.shape != (sizes[0],) or stats.p_min.shape != (sizes[-1],):
        raise CorruptModelError(f"{path}: normalization stats do not match layer sizes")
    model = MlpModel(weights, biases, activations, hyper)
    return LearnedAllocator(model, stats, float(doc.get("xi", float("nan"))),
                            doc.get("precoder", ""))
