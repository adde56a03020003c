"""Feed-forward classifiers: rectifier hiddens, softmax output, trained with
mini-batch gradient descent plus classical momentum.

One architecture serves the action, label, and reentrancy classifiers.
Training is fully deterministic given the seed: weight init, batch order,
and the single-threaded parameter updates all draw from one generator.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

MODEL_MAGIC = b"AMRN"
MODEL_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    hidden_layers: int = 2
    hidden_width: int = 64
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 100
    seed: int = 0
    patience: int = 5  # early stopping on dev accuracy

    def dims(self, n_inputs, n_classes):
        return [n_inputs] + [self.hidden_width] * self.hidden_layers + [n_classes]


@dataclass
class SearchSpace:
    hidden_layers: tuple = (1, 2, 6)
    hidden_width: tuple = (32, 64, 128, 768)
    learning_rate_range: tuple = (1e-4, 1e-1)  # log-uniform
    momentum: tuple = (0.9,)
    batch_size: tuple = (16, 32, 64)
    epochs: int = 100
    trials: int = 5

    def draw(self, rng, seed):
        log_lo, log_hi = np.log(self.learning_rate_range[0]), np.log(self.learning_rate_range[1])
        return TrainConfig(
            hidden_layers=int(rng.choice(self.hidden_layers)),
            hidden_width=int(rng.choice(self.hidden_width)),
            learning_rate=float(np.exp(rng.uniform(log_lo, log_hi))),
            momentum=float(rng.choice(self.momentum)),
            batch_size=int(rng.choice(self.batch_size)),
            epochs=self.epochs,
            seed=seed,
        )


class Mlp:
    """Plain dense net; parameters in float64 for stable gradient checks."""

    def __init__(self, dims, rng=None, weights=None, biases=None):
        self.dims = list(dims)
        if weights is not None:
            self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
            self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
            return
        rng = rng or np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_classes(self):
        return self.dims[-1]

    def copy(self):
        return Mlp(self.dims, weights=[w.copy() for w in self.weights],
                   biases=[b.copy() for b in self.biases])

    def parameters(self):
        return self.weights + self.biases

    def _hidden_states(self, x):
        activations = [x]
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w.T + b, 0.0)
            activations.append(h)
        return activations

    def forward(self, x):
        """Probabilities over classes; accepts a vector or a batch."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.dims[0]:
            raise ValueError(f"input width {x.shape[1]}, expected {self.dims[0]}")
        h = self._hidden_states(x)[-1]
        logits = h @ self.weights[-1].T + self.biases[-1]
        logits -= logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        probs = exp / exp.sum(axis=1, keepdims=True)
        return probs[0] if single else probs

    def loss_and_gradients(self, x, y):
        """Mean cross-entropy over the batch and gradients for all params."""
        x = np.asarray(x, dtype=np.float64)
        n = x.shape[0]
        activations = self._hidden_states(x)
        logits = activations[-1] @ self.weights[-1].T + self.biases[-1]
        logits -= logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        probs = exp / exp.sum(axis=1, keepdims=True)
        loss = -np.mean(np.log(probs[np.arange(n), y] + 1e-300))

        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.biases)
        delta = probs.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n
        for layer in range(len(self.weights) - 1, -1, -1):
            grad_w[layer] = delta.T @ activations[layer]
            grad_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer]) * (activations[layer] > 0)
        return loss, grad_w, grad_b


def evaluate(model, x, y):
    """Argmax accuracy; ties break toward the lowest label id."""
    if len(y) == 0:
        raise ValueError("cannot evaluate on an empty sample set")
    probs = model.forward(x)
    return float(np.mean(np.argmax(probs, axis=1) == y))


def per_class_recall(model, x, y, labels):
    """Recall per label; the honest view when one class dominates."""
    predictions = np.argmax(model.forward(x), axis=1)
    recall = {}
    for class_id, name in enumerate(labels):
        mask = y == class_id
        if mask.any():
            recall[name] = float(np.mean(predictions[mask] == class_id))
    return recall


def train(x, y, n_classes, config, dev=None):
    """Train an Mlp; returns (best model, per-epoch metric records).

    dev: optional (x_dev, y_dev); without it a deterministic 10% tail split
    of the shuffled data is held out.  The checkpoint with the best dev
    accuracy wins; training stops early after `config.patience` epochs
    without improvement.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(x) == 0:
        raise TrainingError("empty training set")
    rng = np.random.default_rng(config.seed)

    if dev is None:
        order = rng.permutation(len(x))
        n_dev = max(1, len(x) // 10) if len(x) >= 2 else 0
        dev_idx, train_idx = order[:n_dev], order[n_dev:]
        if len(train_idx) == 0:
            train_idx = dev_idx
        x_dev, y_dev = x[dev_idx], y[dev_idx]
        x, y = x[train_idx], y[train_idx]
    else:
        x_dev = np.asarray(dev[0], dtype=np.float64)
        y_dev = np.asarray(dev[1], dtype=np.int64)

    present = np.unique(y)
    if len(present) < n_classes:
        missing = sorted(set(range(n_classes)) - set(present.tolist()))
        warnings.warn(f"classes absent from the training data: {missing}", stacklevel=2)

    model = Mlp(config.dims(x.shape[1], n_classes), rng=rng)
    velocity_w = [np.zeros_like(w) for w in model.weights]
    velocity_b = [np.zeros_like(b) for b in model.biases]

    best = model.copy()
    best_acc = -1.0
    best_epoch = -1
    metrics = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(x))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(x), config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grad_w, grad_b = model.loss_and_gradients(x[batch], y[batch])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {n_batches}")
            epoch_loss += loss
            n_batches += 1
            for i in range(len(model.weights)):
                velocity_w[i] = config.momentum * velocity_w[i] - config.learning_rate * grad_w[i]
                velocity_b[i] = config.momentum * velocity_b[i] - config.learning_rate * grad_b[i]
                model.weights[i] += velocity_w[i]
                model.biases[i] += velocity_b[i]
        if len(x_dev):
            dev_probs = model.forward(x_dev)
            dev_loss = -float(
                np.mean(np.log(dev_probs[np.arange(len(y_dev)), y_dev] + 1e-300))
            )
            dev_acc = float(np.mean(np.argmax(dev_probs, axis=1) == y_dev))
        else:
            dev_loss, dev_acc = float("nan"), 0.0
        metrics.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss / max(n_batches, 1),
                "dev_loss": dev_loss,
                "dev_accuracy": dev_acc,
            }
        )
        if dev_acc >= best_acc:  # take the latest checkpoint on plateaus
            best_acc = dev_acc
            best = model.copy()
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break
    return best, metrics


def random_search(space, x, y, n_classes, dev, seed=0):
    """Independent random trials; returns (best config, trial log)."""
    if space.trials < 1:
        raise ValueError("at least one trial required")
    rng = np.random.default_rng(seed)
    log = []
    best_config = None
    best_acc = -1.0
    for trial in range(space.trials):
        config = space.draw(rng, seed=seed + trial)
        model, _ = train(x, y, n_classes, config, dev=dev)
        acc = evaluate(model, dev[0], dev[1])
        log.append({"trial": trial, "config": config, "dev_accuracy": acc})
        if acc > best_acc:
            best_acc = acc
            best_config = config
    return best_config, log


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

def save_model(path, model, classifier, manifest_hash, labels):
    """Header (classifier, manifest hash, layer dims), float32 parameters,
    plus the `.labels` sidecar."""
    hash_bytes = manifest_hash.encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(MODEL_MAGIC)
        handle.write(struct.pack("<HBH", MODEL_VERSION, _classifier_id(classifier), len(hash_bytes)))
        handle.write(hash_bytes)
        handle.write(struct.pack("<I", len(model.dims)))
        handle.write(struct.pack(f"<{len(model.dims)}I", *model.dims))
        for w, b in zip(model.weights, model.biases):
            handle.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            handle.write(np.ascontiguousarray(b, dtype="<f4").tobytes())
    with open(str(path) + ".labels", "w", encoding="utf-8") as handle:
        handle.write("\n".join(labels) + ("\n" if labels else ""))


def load_model(path):
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:4] != MODEL_MAGIC:
        raise TrainingError(f"{path}: bad magic {data[:4]!r}")
    version, cls_id, hash_len = struct.unpack_from("<HBH", data, 4)
    if version != MODEL_VERSION:
        raise TrainingError(f"{path}: unsupported model version {version}")
    pos = 4 + 5
    manifest_hash = data[pos : pos + hash_len].decode("utf-8")
    pos += hash_len
    (n_dims,) = struct.unpack_from("<I", data, pos)
    pos += 4
    dims = list(struct.unpack_from(f"<{n_dims}I", data, pos))
    pos += 4 * n_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = np.frombuffer(data, dtype="<f4", count=fan_in * fan_out, offset=pos).reshape(
            fan_out, fan_in
        )
        pos += fan_in * fan_out * 4
        b = np.frombuffer(data, dtype="<f4", count=fan_out, offset=pos)
        pos += fan_out * 4
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    with open(str(path) + ".labels", encoding="utf-8") as handle:
        labels = [line.rstrip("\n") for line in handle if line.strip() != ""]
    classifier = {0: "action", 1: "label", 2: "reentrancy"}[cls_id]
    return Mlp(dims, weights=weights, biases=biases), classifier, manifest_hash, labels


def _classifier_id(classifier):
    return {"action": 0, "label": 1, "reentrancy": 2}[classifier]
