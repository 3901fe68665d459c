"""Forearm sEMG baseline: a small feed-forward net over hand-pose angles.

Architecture is fixed at 22 -> 64 -> 64 -> 32 -> 10 with rectified hidden
units and a linear output. Training uses minibatch Adam on mean squared
error with a seeded shuffle, so runs are bit-reproducible. The 22-dim input
is built from the skeleton's 20 joint angles through a PoseAngleMapping;
the two unmapped channels are zero-filled.

Training data follows a simple CSV schema: 22 angle columns then 10 sEMG
columns, both min-max normalized to [0, 1]. No raw recordings ship with the
package; a same-architecture synthetic teacher generates test data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

LAYER_SIZES = (22, 64, 64, 32, 10)


class EmgError(ValueError):
    pass


@dataclass
class PoseAngleMapping:
    """Maps skeleton DOF angles to the 22 model inputs.

    Each entry is (source dof index or None, sign, offset); None reads 0.
    """

    entries: tuple

    def __post_init__(self):
        if len(self.entries) != LAYER_SIZES[0]:
            raise EmgError(f"mapping must produce {LAYER_SIZES[0]} values")

    @staticmethod
    def identity(dof: int = 20) -> "PoseAngleMapping":
        entries = [(i, 1.0, 0.0) for i in range(dof)]
        entries += [(None, 1.0, 0.0)] * (LAYER_SIZES[0] - dof)
        return PoseAngleMapping(tuple(entries))

    def apply(self, angles: np.ndarray) -> np.ndarray:
        angles = np.atleast_2d(np.asarray(angles, float))
        out = np.zeros((len(angles), LAYER_SIZES[0]))
        for k, (src, sign, offset) in enumerate(self.entries):
            if src is not None:
                if src >= angles.shape[1]:
                    raise EmgError(f"mapping entry {k} references DOF {src}")
                out[:, k] = sign * angles[:, src] + offset
            else:
                out[:, k] = offset
        return out


@dataclass
class MLPModel:
    """Weights, biases and input/output normalization for the fixed net."""

    weights: list          # W_i of shape (in, out)
    biases: list           # b_i of shape (out,)
    input_offset: np.ndarray = field(default_factory=lambda: np.zeros(LAYER_SIZES[0]))
    input_scale: np.ndarray = field(default_factory=lambda: np.ones(LAYER_SIZES[0]))
    output_offset: np.ndarray = field(default_factory=lambda: np.zeros(LAYER_SIZES[-1]))
    output_scale: np.ndarray = field(default_factory=lambda: np.ones(LAYER_SIZES[-1]))

    def __post_init__(self):
        shapes = list(zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]))
        if [w.shape for w in self.weights] != shapes:
            raise EmgError(f"layer shapes must be {shapes}")
        if [b.shape for b in self.biases] != [(n,) for _, n in shapes]:
            raise EmgError("bias shapes do not match layers")
        for arr in (*self.weights, *self.biases):
            if not np.all(np.isfinite(arr)):
                raise EmgError("non-finite parameters")

    @staticmethod
    def initialize(seed: int = 0) -> "MLPModel":
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for n_in, n_out in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]):
            weights.append(rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out)))
            biases.append(np.zeros(n_out))
        return MLPModel(weights, biases)

    # -- persistence --------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "layer_sizes": list(LAYER_SIZES),
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "input_offset": self.input_offset.tolist(),
            "input_scale": self.input_scale.tolist(),
            "output_offset": self.output_offset.tolist(),
            "output_scale": self.output_scale.tolist(),
        }

    @staticmethod
    def from_json(doc: dict) -> "MLPModel":
        if tuple(doc.get("layer_sizes", ())) != LAYER_SIZES:
            raise EmgError(f"unsupported layer sizes {doc.get('layer_sizes')}")
        shapes = list(zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]))
        weights = [np.array(w, float).reshape(s) for w, s in zip(doc["weights"], shapes)]
        biases = [np.array(b, float) for b in doc["biases"]]
        return MLPModel(weights, biases,
                        np.array(doc["input_offset"], float),
                        np.array(doc["input_scale"], float),
                        np.array(doc["output_offset"], float),
                        np.array(doc["output_scale"], float))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def load(path) -> "MLPModel":
        with open(path) as fh:
            return MLPModel.from_json(json.load(fh))


def _forward_cached(model: MLPModel, X: np.ndarray):
    """Forward pass keeping pre-activations for backprop."""
    acts = [X]
    z = X
    last = len(model.weights) - 1
    pre = []
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ W + b
        pre.append(z)
        acts.append(np.maximum(z, 0.0) if i < last else z)
    return acts, pre


def predict_emg(model: MLPModel, inputs: np.ndarray) -> np.ndarray:
    """Deterministic forward pass. inputs (22,) or (N, 22) -> (10,) or (N, 10)."""
    x = np.asarray(inputs, float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != LAYER_SIZES[0]:
        raise EmgError(f"expected {LAYER_SIZES[0]} inputs, got {x.shape[1]}")
    x = (x - model.input_offset) / model.input_scale
    acts, _ = _forward_cached(model, x)
    y = acts[-1] * model.output_scale + model.output_offset
    return y[0] if single else y


def predict_emg_from_pose(model: MLPModel, angles: np.ndarray,
                          mapping: PoseAngleMapping) -> np.ndarray:
    return predict_emg(model, mapping.apply(angles))


def emg_abs_sum(model: MLPModel, angles: np.ndarray, mapping: PoseAngleMapping):
    """L1 norm of the predicted channel vector; the physiological feature."""
    y = predict_emg_from_pose(model, angles, mapping)
    return np.abs(y).sum(axis=-1) if y.ndim > 1 else float(np.abs(y).sum())


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 1e-4
    seed: int = 0
    holdout_fraction: float = 0.1


@dataclass
class TrainReport:
    mae: float
    mse: float
    r2: float
    train_loss: list  # per-epoch MSE on the training split
    n_train: int
    n_holdout: int


def mse_gradients(model: MLPModel, X: np.ndarray, Y: np.ndarray):
    """Loss and analytic parameter gradients for L = mean((f(X) - Y)^2)."""
    acts, pre = _forward_cached(model, X)
    diff = acts[-1] - Y
    loss = float(np.mean(diff ** 2))
    grad = (2.0 / diff.size) * diff
    gW = [None] * len(model.weights)
    gB = [None] * len(model.biases)
    for i in reversed(range(len(model.weights))):
        gW[i] = acts[i].T @ grad
        gB[i] = grad.sum(axis=0)
        if i > 0:
            grad = (grad @ model.weights[i].T) * (pre[i - 1] > 0)
    return loss, gW, gB


def r2_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Coefficient of determination, uniform average over output channels.

    A channel with zero variance scores 0 (the mean predictor convention).
    """
    ss_res = np.sum((y_true - y_pred) ** 2, axis=0)
    ss_tot = np.sum((y_true - y_true.mean(axis=0)) ** 2, axis=0)
    constant = np.ptp(y_true, axis=0) == 0  # exact test: summation noise makes ss_tot ~1e-32
    with np.errstate(divide="ignore", invalid="ignore"):
        per = np.where(constant, 0.0, 1.0 - ss_res / np.where(constant, 1.0, ss_tot))
    return float(per.mean())


def train_emg(X: np.ndarray, Y: np.ndarray,
              config: TrainConfig | None = None) -> tuple[MLPModel, TrainReport]:
    """Fit the net with Adam on a seeded shuffle; report holdout MAE/MSE/R2."""
    config = config or TrainConfig()
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    if len(X) == 0 or len(X) != len(Y):
        raise EmgError("empty or mismatched dataset")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise EmgError("non-finite training data")

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(X))
    n_hold = int(round(len(X) * config.holdout_fraction))
    hold, train = order[:n_hold], order[n_hold:]
    if len(train) == 0:
        raise EmgError("holdout leaves no training data")
    Xtr, Ytr = X[train], Y[train]
    Xho, Yho = X[hold], Y[hold]

    model = MLPModel.initialize(seed=config.seed)
    # standardize both sides from the training split; the stats live on the
    # model so inference undoes them transparently
    model.input_offset = Xtr.mean(axis=0)
    model.input_scale = np.maximum(Xtr.std(axis=0), 1e-9)
    model.output_offset = Ytr.mean(axis=0)
    model.output_scale = np.maximum(Ytr.std(axis=0), 1e-9)
    Xtr = (Xtr - model.input_offset) / model.input_scale
    Ytr = (Ytr - model.output_offset) / model.output_scale
    mW = [np.zeros_like(w) for w in model.weights]
    vW = [np.zeros_like(w) for w in model.weights]
    mB = [np.zeros_like(b) for b in model.biases]
    vB = [np.zeros_like(b) for b in model.biases]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    history = []
    for _ in range(config.epochs):
        perm = rng.permutation(len(Xtr))
        losses = []
        for s in range(0, len(Xtr), config.batch_size):
            idx = perm[s:s + config.batch_size]
            loss, gW, gB = mse_gradients(model, Xtr[idx], Ytr[idx])
            losses.append(loss)
            step += 1
            corr1 = 1.0 - beta1 ** step
            corr2 = 1.0 - beta2 ** step
            for i in range(len(model.weights)):
                mW[i] = beta1 * mW[i] + (1 - beta1) * gW[i]
                vW[i] = beta2 * vW[i] + (1 - beta2) * gW[i] ** 2
                model.weights[i] -= config.learning_rate * (mW[i] / corr1) \
                    / (np.sqrt(vW[i] / corr2) + eps)
                mB[i] = beta1 * mB[i] + (1 - beta1) * gB[i]
                vB[i] = beta2 * vB[i] + (1 - beta2) * gB[i] ** 2
                model.biases[i] -= config.learning_rate * (mB[i] / corr1) \
                    / (np.sqrt(vB[i] / corr2) + eps)
        history.append(float(np.mean(losses)))

    if len(Xho):
        pred = predict_emg(model, Xho)
        mae = float(np.mean(np.abs(pred - Yho)))
        mse = float(np.mean((pred - Yho) ** 2))
        r2 = r2_score(Yho, pred)
    else:
        mae = mse = float("nan")
        r2 = float("nan")
    return model, TrainReport(mae, mse, r2, history, len(Xtr), len(Xho))


def gradient_check(model: MLPModel, X: np.ndarray, Y: np.ndarray,
                   eps: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients."""
    _, gW, gB = mse_gradients(model, X, Y)
    worst = 0.0
    for arrs, grads in ((model.weights, gW), (model.biases, gB)):
        for arr, g in zip(arrs, grads):
            flat = arr.ravel()
            for k in range(flat.size):
                old = flat[k]
                flat[k] = old + eps
                lp, _, _ = mse_gradients(model, X, Y)
                flat[k] = old - eps
                lm, _, _ = mse_gradients(model, X, Y)
                flat[k] = old
                fd = (lp - lm) / (2 * eps)
                denom = max(abs(fd), abs(g.ravel()[k]), 1e-12)
                worst = max(worst, abs(fd - g.ravel()[k]) / denom)
    return worst


# ---------------------------------------------------------------------------
# Synthetic data (tests and demos; raw recordings are not bundled)
# ---------------------------------------------------------------------------

def make_teacher(seed: int = 7) -> MLPModel:
    return MLPModel.initialize(seed=seed)


def synthetic_dataset(teacher: MLPModel, n: int, seed: int = 0,
                      noise: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, LAYER_SIZES[0]))
    Y = predict_emg(teacher, X)
    if noise > 0:
        Y = Y + rng.normal(0.0, noise, size=Y.shape)
    return X, Y
