"""Desk-scale baseline: logistic regression on pooled intensity features.

Images are average-pooled to a small grid and scaled to [0, 1]; the model
is plain L2-regularized logistic regression trained by mini-batch
gradient descent with early stopping. Everything is exactly specified
(zero init, splitmix64 shuffles, stated loss), so training is bit
reproducible and the analytic gradient can be checked against finite
differences. No ML framework is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NonFiniteLoss, SingleClassTrainingSet
from .image import ByteImage, ColorMode
from .labels import Label
from .rng import SplitMix64, fisher_yates

DEFAULT_POOL_SIDE = 16

MODEL_FORMAT_MAGIC = "apkmodal-baseline"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Training protocol knobs. Optimizer 'adam' is accepted as a value for
    config interchange with external harnesses but this module trains SGD only."""

    learning_rate: float = 0.1
    epochs: int = 20
    l2: float = 1e-4
    seed: int = 0
    batch_size: int = 32
    patience: int = 5
    optimizer: str = "sgd"


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    config: TrainConfig
    pool_side: int = DEFAULT_POOL_SIDE
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])


def featurize(image: ByteImage, pool_side: int = DEFAULT_POOL_SIDE) -> np.ndarray:
    """Average-pool to pool_side x pool_side and scale to [0, 1].

    RGB images are converted to intensity by channel mean first. The image
    side must be divisible by pool_side.
    """
    pixels = image.pixels.astype(np.float64)
    if image.spec.color_mode is ColorMode.RGB:
        pixels = pixels.mean(axis=2)
    return pool_pixels(pixels, pool_side)


def pool_pixels(pixels: np.ndarray, pool_side: int = DEFAULT_POOL_SIDE) -> np.ndarray:
    side = pixels.shape[0]
    if side % pool_side != 0:
        raise ValueError(f"image side {side} not divisible by pool side {pool_side}")
    block = side // pool_side
    pooled = pixels.reshape(pool_side, block, pool_side, block).mean(axis=(1, 3))
    return (pooled / 255.0).reshape(-1)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    expz = np.exp(z[~pos])
    out[~pos] = expz / (1.0 + expz)
    return out


def data_loss(weights: np.ndarray, bias: float, features: np.ndarray, targets: np.ndarray) -> float:
    """Mean binary cross-entropy, computed in the overflow-safe log1p form."""
    # divergent parameters overflow to inf/nan here; the training loop turns
    # that into NonFiniteLoss rather than warning
    with np.errstate(over="ignore", invalid="ignore"):
        z = features @ weights + bias
        # log(1 + e^-|z|) + max(z,0) - z*y  ==  -[y log p + (1-y) log(1-p)]
        per_sample = np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0) - z * targets
        return float(per_sample.mean())


def loss_and_grad(
    weights: np.ndarray,
    bias: float,
    features: np.ndarray,
    targets: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, float]:
    """Regularized objective J = BCE + (l2/2)||w||^2 and its exact gradient.

    The bias is not regularized.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        loss = data_loss(weights, bias, features, targets) + 0.5 * l2 * float(weights @ weights)
        residual = _sigmoid(features @ weights + bias) - targets
        grad_w = features.T @ residual / len(targets) + l2 * weights
        grad_b = float(residual.mean())
    return loss, grad_w, grad_b


def train(
    features: np.ndarray,
    targets: np.ndarray,
    config: TrainConfig = TrainConfig(),
    val_features: np.ndarray | None = None,
    val_targets: np.ndarray | None = None,
    pool_side: int = DEFAULT_POOL_SIDE,
) -> LinearModel:
    """Mini-batch gradient descent from zero init, returning the parameters
    of the best epoch by monitored loss.

    The monitored loss is the validation BCE when a validation set is
    given, otherwise the full-training-set BCE. Training stops early once
    the monitored loss has not improved for `patience` epochs.
    """
    if config.optimizer != "sgd":
        raise ValueError(f"optimizer {config.optimizer!r} is not trained here; use 'sgd'")
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if features.ndim != 2 or len(features) != len(targets):
        raise DimensionMismatch(f"features {features.shape} vs targets {targets.shape}")
    classes = np.unique(targets)
    if classes.size < 2:
        raise SingleClassTrainingSet(f"training set has a single class: {classes}")

    if val_features is None:
        monitor_x, monitor_y = features, targets
    else:
        monitor_x = np.asarray(val_features, dtype=np.float64)
        monitor_y = np.asarray(val_targets, dtype=np.float64)

    n, dim = features.shape
    weights = np.zeros(dim)
    bias = 0.0
    best_weights, best_bias = weights.copy(), bias
    best_loss = data_loss(weights, bias, monitor_x, monitor_y)
    history: list[float] = []
    bad_epochs = 0
    rng = SplitMix64(config.seed)

    for _ in range(config.epochs):
        order = list(range(n))
        fisher_yates(order, rng)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            _, grad_w, grad_b = loss_and_grad(weights, bias, features[batch], targets[batch], config.l2)
            weights = weights - config.learning_rate * grad_w
            bias = bias - config.learning_rate * grad_b

        monitored = data_loss(weights, bias, monitor_x, monitor_y)
        if not np.isfinite(monitored) or not np.all(np.isfinite(weights)):
            raise NonFiniteLoss(f"loss became {monitored} (learning rate too large?)")
        history.append(monitored)
        if monitored < best_loss:
            best_loss = monitored
            best_weights, best_bias = weights.copy(), bias
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break

    return LinearModel(weights=best_weights, bias=best_bias, config=config, pool_side=pool_side, history=history)


def predict(model: LinearModel, features: np.ndarray) -> tuple[Label, float]:
    """Score one feature vector. A score of exactly 0.5 flags Malware."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != model.weights.shape:
        raise DimensionMismatch(f"features {features.shape} vs model dim {model.weights.shape}")
    score = float(_sigmoid(np.array([features @ model.weights + model.bias]))[0])
    label = Label.MALWARE if score >= 0.5 else Label.BENIGN
    return label, score


def predict_batch(model: LinearModel, features: np.ndarray) -> tuple[list[Label], np.ndarray]:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.dim:
        raise DimensionMismatch(f"features {features.shape} vs model dim {model.dim}")
    scores = _sigmoid(features @ model.weights + model.bias)
    labels = [Label.MALWARE if s >= 0.5 else Label.BENIGN for s in scores]
    return labels, scores


# -- persistence -----------------------------------------------------------------

def save_model(model: LinearModel, path: str | Path) -> Path:
    """Plain-text format: one key per line, floats at full round-trip precision."""
    cfg = model.config
    lines = [
        f"{MODEL_FORMAT_MAGIC} v{MODEL_FORMAT_VERSION}",
        f"dim {model.dim}",
        f"pool_side {model.pool_side}",
        f"bias {model.bias:.17g}",
        "weights " + " ".join(f"{w:.17g}" for w in model.weights),
        (
            f"config learning_rate={cfg.learning_rate:.17g} epochs={cfg.epochs} "
            f"l2={cfg.l2:.17g} seed={cfg.seed} batch_size={cfg.batch_size} "
            f"patience={cfg.patience} optimizer={cfg.optimizer}"
        ),
    ]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_model(path: str | Path) -> LinearModel:
    text = Path(path).read_text(encoding="utf-8")
    fields: dict[str, str] = {}
    for line_num, line in enumerate(text.splitlines()):
        if line_num == 0:
            if not line.startswith(MODEL_FORMAT_MAGIC):
                raise ValueError(f"{path}: not a baseline model file")
            continue
        key, _, value = line.partition(" ")
        fields[key] = value

    cfg_items = dict(item.split("=", 1) for item in fields["config"].split())
    config = TrainConfig(
        learning_rate=float(cfg_items["learning_rate"]),
        epochs=int(cfg_items["epochs"]),
        l2=float(cfg_items["l2"]),
        seed=int(cfg_items["seed"]),
        batch_size=int(cfg_items["batch_size"]),
        patience=int(cfg_items["patience"]),
        optimizer=cfg_items["optimizer"],
    )
    weights = np.array([float(v) for v in fields["weights"].split()], dtype=np.float64)
    if weights.shape[0] != int(fields["dim"]):
        raise ValueError(f"{path}: weight count {weights.shape[0]} != dim {fields['dim']}")
    return LinearModel(
        weights=weights,
        bias=float(fields["bias"]),
        config=config,
        pool_side=int(fields["pool_side"]),
    )


# -- sklearn-style estimator -------------------------------------------------------

class BaselineClassifier:
    """fit/predict wrapper so the baseline composes with sklearn tooling.

    Implements get_params/set_params by hand; the class does not depend on
    scikit-learn but satisfies its estimator contract (clone, grid search).
    X is a (n, d) matrix of pooled features, y is 0/1 or Label values.
    """

    def __init__(
        self,
        learning_rate: float = 0.1,
        epochs: int = 20,
        l2: float = 1e-4,
        seed: int = 0,
        batch_size: int = 32,
        patience: int = 5,
        pool_side: int = DEFAULT_POOL_SIDE,
    ):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2
        self.seed = seed
        self.batch_size = batch_size
        self.patience = patience
        self.pool_side = pool_side

    def get_params(self, deep: bool = True) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "l2": self.l2,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "patience": self.patience,
            "pool_side": self.pool_side,
        }

    def set_params(self, **params) -> "BaselineClassifier":
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            l2=self.l2,
            seed=self.seed,
            batch_size=self.batch_size,
            patience=self.patience,
        )

    @staticmethod
    def _targets(y) -> np.ndarray:
        return np.array([1.0 if Label(v) is Label.MALWARE else 0.0 for v in y]) if len(y) and isinstance(
            y[0], (str, Label)
        ) else np.asarray(y, dtype=np.float64)

    def fit(self, X, y, X_val=None, y_val=None) -> "BaselineClassifier":
        y_arr = self._targets(y)
        yv = self._targets(y_val) if y_val is not None else None
        self.model_ = train(
            np.asarray(X, dtype=np.float64),
            y_arr,
            self._config(),
            val_features=None if X_val is None else np.asarray(X_val, dtype=np.float64),
            val_targets=yv,
            pool_side=self.pool_side,
        )
        return self

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        _, scores = predict_batch(self.model_, np.asarray(X, dtype=np.float64))
        return np.column_stack([1.0 - scores, scores])

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        labels, _ = predict_batch(self.model_, np.asarray(X, dtype=np.float64))
        return np.array([label.value for label in labels])

    def score(self, X, y) -> float:
        y_arr = self._targets(y)
        predicted = (self.predict_proba(X)[:, 1] >= 0.5).astype(np.float64)
        return float((predicted == y_arr).mean())

    def _check_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise RuntimeError("BaselineClassifier is not fitted; call fit first")
