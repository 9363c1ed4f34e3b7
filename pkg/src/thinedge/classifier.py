"""Edge / non-edge classification of descriptors.

A small fully-connected ReLU network trained with class-weighted
cross-entropy and Adam, plus the nearest-mean threshold baseline.
"""
from __future__ import annotations

import ast
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, UnsupportedVersionError

log = logging.getLogger(__name__)

HIDDEN = (64, 64)
MODEL_MAGIC = "thinedge-mlp"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 1024
    learning_rate: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    class_weighting: str = "inverse"  # or "none"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if self.class_weighting not in ("inverse", "none"):
            raise ValueError("class_weighting must be 'inverse' or 'none'")


@dataclass
class MlpModel:
    weights: list  # W[l] has shape (fan_in, fan_out)
    biases: list
    mean: np.ndarray
    std: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def layer_dims(self) -> list:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def bandwidth(self) -> int:
        return self.layer_dims[0]


def init_model(dims, seed: int = 0, mean=None, std=None) -> MlpModel:
    """Glorot-uniform weights, zero biases, identity input scaling."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    mean = np.zeros(dims[0]) if mean is None else np.asarray(mean, float)
    std = np.ones(dims[0]) if std is None else np.asarray(std, float)
    return MlpModel(weights, biases, mean, std)


def fit_scaler(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std <= 0] = 1.0
    return mean, std


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(model: MlpModel, x):
    """Return the per-layer activations (scaled input first) and the logits."""
    acts = [(x - model.mean) / model.std]
    h = acts[0]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        if i == last:
            return acts, z
        h = np.maximum(z, 0.0)
        acts.append(h)


def loss_and_grads(model: MlpModel, x, y, class_weights=(1.0, 1.0)):
    """Weighted mean cross-entropy and its gradients w.r.t. every W and b."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    acts, logits = _forward(model, x)
    p = _softmax(logits)
    sw = np.asarray(class_weights, float)[y]
    total = sw.sum()
    loss = -np.sum(sw * np.log(np.clip(p[np.arange(len(y)), y], 1e-300, None))) / total

    delta = p.copy()
    delta[np.arange(len(y)), y] -= 1.0
    delta *= (sw / total)[:, None]
    gw, gb = [None] * len(model.weights), [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return loss, gw, gb


def predict_proba(model: MlpModel, x) -> np.ndarray:
    """Edge probability for each row of ``x`` (or for a single descriptor)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.bandwidth:
        raise ValueError(f"descriptor length {x.shape[1]} != model input {model.bandwidth}")
    _, logits = _forward(model, x)
    p = _softmax(logits)[:, 1]
    return p[0] if single else p


def predict(model: MlpModel, d) -> tuple:
    """(is_edge, edge probability) for one descriptor, or arrays for a batch."""
    p = predict_proba(model, d)
    return p >= 0.5, p


def class_weights_for(y, scheme: str = "inverse") -> np.ndarray:
    if scheme == "none":
        return np.ones(2)
    counts = np.bincount(np.asarray(y, int), minlength=2).astype(float)
    return counts.sum() / (2.0 * counts)


def train(x, y, config: TrainConfig = TrainConfig(), hidden=HIDDEN) -> MlpModel:
    """Train a [B, *hidden, 2] network on descriptors ``x`` with 0/1 labels ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y).astype(int)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("x must be (N, B) with one label per row")
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain both edge and non-edge samples")

    rng = np.random.default_rng(config.seed)
    mean, std = fit_scaler(x)
    model = init_model([x.shape[1], *hidden, 2], seed=int(rng.integers(2**63)), mean=mean, std=std)
    cw = class_weights_for(y, config.class_weighting)

    params = model.weights + model.biases
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(x))
        epoch_loss = 0.0
        for start in range(0, len(x), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, gw, gb = loss_and_grads(model, x[batch], y[batch], cw)
            epoch_loss += loss * len(batch)
            step += 1
            for p, g, a, v in zip(params, gw + gb, m1, m2):
                a *= config.beta1
                a += (1 - config.beta1) * g
                v *= config.beta2
                v += (1 - config.beta2) * g * g
                a_hat = a / (1 - config.beta1**step)
                v_hat = v / (1 - config.beta2**step)
                p -= config.learning_rate * a_hat / (np.sqrt(v_hat) + config.eps)
        log.debug("epoch %d loss %.6f", epoch + 1, epoch_loss / len(x))

    pred = predict_proba(model, x) >= 0.5
    model.meta = {
        **{k: v for k, v in asdict(config).items()},
        "train_accuracy": float(np.mean(pred == y)),
        "train_samples": int(len(x)),
    }
    return model


# ---------------------------------------------------------------- serialization


def _fmt(arr) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(arr))


def save_model(model: MlpModel, path) -> None:
    lines = [f"{MODEL_MAGIC} {MODEL_VERSION}", "layers " + " ".join(map(str, model.layer_dims))]
    for key in sorted(model.meta):
        val = model.meta[key]
        lines.append(f"meta {key} {val!r}")
    lines.append("scaler_mean " + _fmt(model.mean))
    lines.append("scaler_std " + _fmt(model.std))
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        lines.append(f"weight {i} {w.shape[0]} {w.shape[1]}")
        lines.extend(_fmt(row) for row in w)
        lines.append(f"bias {i} " + _fmt(b))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_meta(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def load_model(path) -> MlpModel:
    lines = Path(path).read_text().splitlines()
    pos = 0

    def take(section):
        nonlocal pos
        if pos >= len(lines):
            raise FormatError(f"{path}: truncated model file, missing {section}")
        line = lines[pos]
        pos += 1
        return line

    def floats(text, n, section):
        try:
            vals = np.array([float(v) for v in text.split()])
        except ValueError:
            raise FormatError(f"{path}: malformed numbers in {section}") from None
        if len(vals) != n:
            raise FormatError(f"{path}: {section} has {len(vals)} values, expected {n}")
        return vals

    head = take("header").split()
    if len(head) != 2 or head[0] != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model file")
    if head[1] != str(MODEL_VERSION):
        raise UnsupportedVersionError(f"{path}: model version {head[1]} is not supported")
    tok = take("layers").split()
    if not tok or tok[0] != "layers":
        raise FormatError(f"{path}: expected 'layers' section")
    try:
        dims = [int(v) for v in tok[1:]]
    except ValueError:
        raise FormatError(f"{path}: malformed layers section") from None
    if len(dims) < 2:
        raise FormatError(f"{path}: layers section needs at least 2 dims")

    meta = {}
    while pos < len(lines) and lines[pos].startswith("meta "):
        _, key, val = take("meta").split(" ", 2)
        meta[key] = _parse_meta(val)
    line = take("scaler_mean")
    if not line.startswith("scaler_mean"):
        raise FormatError(f"{path}: expected scaler_mean section")
    mean = floats(line[len("scaler_mean"):], dims[0], "scaler_mean")
    line = take("scaler_std")
    if not line.startswith("scaler_std"):
        raise FormatError(f"{path}: expected scaler_std section")
    std = floats(line[len("scaler_std"):], dims[0], "scaler_std")

    weights, biases = [], []
    for i, (fi, fo) in enumerate(zip(dims[:-1], dims[1:])):
        section = f"weight {i}"
        if take(section).split() != ["weight", str(i), str(fi), str(fo)]:
            raise FormatError(f"{path}: malformed header for {section}")
        w = np.vstack([floats(take(section), fo, section) for _ in range(fi)])
        line = take(f"bias {i}")
        prefix = f"bias {i} "
        if not line.startswith(prefix):
            raise FormatError(f"{path}: expected bias {i} section")
        weights.append(w)
        biases.append(floats(line[len(prefix):], fo, f"bias {i}"))
    if take("end").strip() != "end":
        raise FormatError(f"{path}: missing end marker")
    return MlpModel(weights, biases, mean, std, meta)


# ---------------------------------------------------------------- threshold baseline


@dataclass
class ThresholdBaseline:
    mean_edge_descriptor: np.ndarray
    threshold: float = 1.0


def baseline_fit(edge_descriptors, threshold: float = 1.0) -> ThresholdBaseline:
    d = np.asarray(edge_descriptors, dtype=float)
    if d.ndim != 2 or len(d) == 0:
        raise ValueError("need at least one edge descriptor")
    return ThresholdBaseline(d.mean(axis=0), float(threshold))


def baseline_distance(b: ThresholdBaseline, d) -> np.ndarray:
    return np.linalg.norm(np.asarray(d, dtype=float) - b.mean_edge_descriptor, axis=-1)


def baseline_predict(b: ThresholdBaseline, d):
    return baseline_distance(b, d) <= b.threshold


def baseline_select_threshold(b: ThresholdBaseline, descriptors, labels) -> ThresholdBaseline:
    """Pick the threshold maximising F1 on a validation set."""
    dist = baseline_distance(b, descriptors)
    labels = np.asarray(labels).astype(bool)
    order = np.argsort(dist, kind="stable")
    d, lab = dist[order], labels[order]
    # Candidate thresholds are the distinct distances; take the last index of each.
    last = np.r_[d[1:] != d[:-1], True]
    tp = np.cumsum(lab)[last]
    npred = (np.arange(len(d)) + 1)[last]
    f1 = 2 * tp / (npred + labels.sum())
    return ThresholdBaseline(b.mean_edge_descriptor, float(d[last][np.argmax(f1)]))
