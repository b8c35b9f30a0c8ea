"""Small feed-forward classifier: posteriors for the baselines, penultimate
activations as the embedding space the graph is built over.

Hidden layers are rectified, the output is a softmax, and training is plain
SGD with momentum.  The per-sample training loop is the hottest code in the
whole experiment, so it runs on the kernel backend (compiled when available).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import ConfigurationError, FormatError, ShapeError

MLP1_MAGIC = b"MLP1"


@dataclass
class SgdOptions:
    """Optimizer settings; defaults match the 2-d experiment recipe."""

    learning_rate: float = 0.001
    momentum: float = 0.9
    batch_size: int = 1
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")


class MlpModel:
    """Fully-connected net with fixed layer widths ``[d0, h1, ..., C]``."""

    def __init__(self, widths: list[int], weights: list[np.ndarray], biases: list[np.ndarray]):
        self.widths = [int(w) for w in widths]
        if len(self.widths) < 2:
            raise ConfigurationError("widths needs at least input and output entries")
        if self.widths[-1] < 2:
            raise ConfigurationError("output width (class count) must be >= 2")
        if any(w < 1 for w in self.widths):
            raise ConfigurationError("layer widths must be positive")
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in biases]
        for l, (din, dout) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            if self.weights[l].shape != (din, dout) or self.biases[l].shape != (dout,):
                raise ShapeError(f"layer {l} parameters do not match widths {din}x{dout}")

    @classmethod
    def create(cls, widths: list[int], seed: int = 0) -> "MlpModel":
        """Fresh parameters: uniform fan-in scaled, sqrt(6) gain on weights.

        The gain suits the rectified hidden layers and measurably tightens
        run-to-run spread; biases stay small but nonzero so no unit sits
        exactly on its kink for all-zero inputs.
        """
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for din, dout in zip(widths[:-1], widths[1:]):
            bound = np.sqrt(6.0 / din)
            weights.append(rng.uniform(-bound, bound, size=(din, dout)))
            biases.append(rng.uniform(-1.0, 1.0, size=dout) / np.sqrt(din))
        return cls(list(widths), weights, biases)

    @property
    def num_classes(self) -> int:
        return self.widths[-1]

    @property
    def embedding_dim(self) -> int:
        return self.widths[-2]

    @property
    def num_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy(self) -> "MlpModel":
        return MlpModel(self.widths, [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases])

    def forward_with_embedding(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Softmax posteriors plus the post-activation output of the last hidden layer."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.widths[0]:
            raise ShapeError(f"input width {x.shape[1]} != declared {self.widths[0]}")
        a = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ w + b, 0.0)
        embedding = a
        z = a @ self.weights[-1] + self.biases[-1]
        z = z - z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        return p, embedding

    def forward(self, x) -> np.ndarray:
        return self.forward_with_embedding(x)[0]

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.forward(x), axis=1)


def _flatten_params(model: MlpModel) -> tuple[np.ndarray, np.ndarray]:
    wflat = np.concatenate([w.ravel() for w in model.weights])
    bflat = np.concatenate([b.ravel() for b in model.biases])
    return wflat, bflat


def _unflatten_into(model: MlpModel, wflat: np.ndarray, bflat: np.ndarray) -> None:
    wo = bo = 0
    for l, (din, dout) in enumerate(zip(model.widths[:-1], model.widths[1:])):
        model.weights[l][...] = wflat[wo:wo + din * dout].reshape(din, dout)
        model.biases[l][...] = bflat[bo:bo + dout]
        wo += din * dout
        bo += dout


def train(model: MlpModel, vectors, labels, opt: SgdOptions) -> np.ndarray:
    """SGD with momentum on mean cross-entropy; returns the per-epoch loss trace.

    The shuffle stream is drawn once from ``opt.seed``, so a given (model,
    data, options) triple always yields the same parameter trajectory.
    """
    x = np.ascontiguousarray(np.atleast_2d(vectors), dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.shape[0] == 0:
        raise ConfigurationError("training set is empty")
    if x.shape[1] != model.widths[0]:
        raise ShapeError(f"input width {x.shape[1]} != declared {model.widths[0]}")
    if y.shape != (x.shape[0],):
        raise ShapeError("labels must align with vectors")
    if y.min() < 0 or y.max() >= model.num_classes:
        raise ConfigurationError("training label outside [0, num_classes)")
    if opt.epochs == 0:
        return np.zeros(0)
    n = x.shape[0]
    rng = np.random.default_rng(opt.seed)
    order = np.concatenate([rng.permutation(n) for _ in range(opt.epochs)]).astype(np.int64)
    if opt.batch_size == 1:
        wflat, bflat = _flatten_params(model)
        losses = _backend.sgd_epochs(
            np.asarray(model.widths, dtype=np.int64),
            wflat, bflat,
            np.zeros_like(wflat), np.zeros_like(bflat),
            x, y, order, int(opt.epochs),
            float(opt.learning_rate), float(opt.momentum),
        )
        _unflatten_into(model, wflat, bflat)
        return np.asarray(losses)
    return _train_minibatch(model, x, y, order, opt)


def _train_minibatch(model: MlpModel, x, y, order, opt: SgdOptions) -> np.ndarray:
    n = x.shape[0]
    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    losses = np.zeros(opt.epochs)
    n_layers = len(model.weights)
    for e in range(opt.epochs):
        perm = order[e * n:(e + 1) * n]
        total = 0.0
        for start in range(0, n, opt.batch_size):
            idx = perm[start:start + opt.batch_size]
            acts = [x[idx]]
            a = acts[0]
            for l in range(n_layers - 1):
                a = np.maximum(a @ model.weights[l] + model.biases[l], 0.0)
                acts.append(a)
            z = a @ model.weights[-1] + model.biases[-1]
            z = z - z.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            total += -np.log(np.maximum(p[np.arange(idx.size), y[idx]], 1e-300)).sum()
            delta = p
            delta[np.arange(idx.size), y[idx]] -= 1.0
            delta /= idx.size
            for l in range(n_layers - 1, -1, -1):
                a_prev = acts[l]
                grad_w = a_prev.T @ delta
                grad_b = delta.sum(axis=0)
                if l > 0:
                    delta = (delta @ model.weights[l].T) * (a_prev > 0.0)
                vel_w[l] *= opt.momentum
                vel_w[l] += grad_w
                model.weights[l] -= opt.learning_rate * vel_w[l]
                vel_b[l] *= opt.momentum
                vel_b[l] += grad_b
                model.biases[l] -= opt.learning_rate * vel_b[l]
        losses[e] = total / n
    return losses


def _mean_cross_entropy(model: MlpModel, x, y) -> float:
    p = model.forward(x)
    return float(-np.log(np.maximum(p[np.arange(len(y)), y], 1e-300)).mean())


def _analytic_gradients(model: MlpModel, x, y):
    n = x.shape[0]
    n_layers = len(model.weights)
    acts = [x]
    a = x
    for l in range(n_layers - 1):
        a = np.maximum(a @ model.weights[l] + model.biases[l], 0.0)
        acts.append(a)
    z = a @ model.weights[-1] + model.biases[-1]
    z = z - z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    delta = p
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads_w, grads_b = [None] * n_layers, [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        grads_w[l] = acts[l].T @ delta
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l].T) * (acts[l] > 0.0)
    return grads_w, grads_b


GRAD_MAGNITUDE_FLOOR = 1e-8


def gradient_check(model: MlpModel, vectors, labels, step: float = 1e-5) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Entries where both gradients fall below GRAD_MAGNITUDE_FLOOR are skipped
    (the relative error of a vanishing gradient is noise).
    """
    x = np.ascontiguousarray(np.atleast_2d(vectors), dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    grads_w, grads_b = _analytic_gradients(model, x, y)
    worst = 0.0

    def probe(param: np.ndarray, grad: np.ndarray) -> float:
        local = 0.0
        flat_p = param.ravel()
        flat_g = grad.ravel()
        for i in range(flat_p.size):
            keep = flat_p[i]
            flat_p[i] = keep + step
            up = _mean_cross_entropy(model, x, y)
            flat_p[i] = keep - step
            down = _mean_cross_entropy(model, x, y)
            flat_p[i] = keep
            numeric = (up - down) / (2.0 * step)
            analytic = flat_g[i]
            if abs(numeric) < GRAD_MAGNITUDE_FLOOR and abs(analytic) < GRAD_MAGNITUDE_FLOOR:
                continue
            local = max(local, abs(numeric - analytic) / max(abs(numeric), abs(analytic)))
        return local

    for l in range(len(model.weights)):
        worst = max(worst, probe(model.weights[l], grads_w[l]))
        worst = max(worst, probe(model.biases[l], grads_b[l]))
    return worst


def save_checkpoint(model: MlpModel, path) -> None:
    """MLP1 file: magic, width list, then float32 parameters in layer order."""
    with open(path, "wb") as fh:
        fh.write(MLP1_MAGIC)
        fh.write(struct.pack("<I", len(model.widths)))
        fh.write(np.asarray(model.widths, dtype="<u4").tobytes())
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_checkpoint(path) -> MlpModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != MLP1_MAGIC:
        raise FormatError(f"{path}: bad magic at byte 0 (expected {MLP1_MAGIC!r})")
    if len(blob) < 8:
        raise FormatError(f"{path}: truncated header at byte {len(blob)}")
    (n_widths,) = struct.unpack_from("<I", blob, 4)
    if n_widths < 2:
        raise FormatError(f"{path}: need at least 2 widths, got {n_widths} at byte 4")
    off = 8
    if len(blob) < off + 4 * n_widths:
        raise FormatError(f"{path}: truncated width list at byte {len(blob)}")
    widths = np.frombuffer(blob, dtype="<u4", count=n_widths, offset=off).astype(int).tolist()
    off += 4 * n_widths
    weights, biases = [], []
    for din, dout in zip(widths[:-1], widths[1:]):
        need = 4 * (din * dout + dout)
        if len(blob) < off + need:
            raise FormatError(f"{path}: truncated parameters at byte {len(blob)}")
        w = np.frombuffer(blob, dtype="<f4", count=din * dout, offset=off).reshape(din, dout)
        off += 4 * din * dout
        b = np.frombuffer(blob, dtype="<f4", count=dout, offset=off)
        off += 4 * dout
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    if off != len(blob):
        raise FormatError(f"{path}: {len(blob) - off} trailing bytes at byte {off}")
    return MlpModel(widths, weights, biases)
