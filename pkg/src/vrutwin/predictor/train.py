"""Training, evaluation metrics and the constant-velocity baseline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyDataset, EmptyInput, LengthMismatch, ShapeMismatch
from .adam import AdamState, adam_step
from .model import EncoderDecoderModel, ModelConfig, forward_normalized, init_model, loss_and_grads
from .norm import NormParams

log = logging.getLogger(__name__)


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if np.shape(pred) != np.shape(truth):
        raise LengthMismatch(f"shapes {np.shape(pred)} and {np.shape(truth)} differ")
    if p.size == 0:
        raise EmptyInput("no values to compare")
    return p, t


def mae(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def rmse(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


@dataclass
class TrainReport:
    seed: int
    train_mae: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)
    test_rmse: float = math.nan
    n_train: int = 0
    n_val: int = 0

    def curve_csv(self) -> str:
        lines = ["epoch,train_mae,val_mae"]
        for i, (a, b) in enumerate(zip(self.train_mae, self.val_mae), start=1):
            lines.append(f"{i},{a!r},{b!r}")
        return "\n".join(lines) + "\n"


def chronological_split(n: int, split: float) -> int:
    """Number of leading samples that go to training."""
    if not 0.0 < split < 1.0:
        raise ValueError(f"split must lie in (0, 1), got {split}")
    n_train = int(round(n * split))
    return min(max(n_train, 1), n - 1) if n > 1 else n


def _predict_m(model: EncoderDecoderModel, xn: np.ndarray, chunk: int = 512) -> np.ndarray:
    parts = [forward_normalized(model, xn[i:i + chunk]) for i in range(0, len(xn), chunk)]
    return model.norm.denormalize_target(np.concatenate(parts))


def learning_rate_at(config: ModelConfig, epoch: int) -> float:
    """Cosine anneal from ``learning_rate`` down to ``lr_final_fraction`` of it."""
    if config.epochs == 1:
        return config.learning_rate
    frac = epoch / (config.epochs - 1)
    lo = config.learning_rate * config.lr_final_fraction
    return lo + 0.5 * (config.learning_rate - lo) * (1.0 + math.cos(math.pi * frac))


def train(config: ModelConfig, dataset: tuple[np.ndarray, np.ndarray], split: float = 0.8,
          progress: bool = False) -> tuple[EncoderDecoderModel, TrainReport]:
    """Fit a model on raw ``(windows, targets)``; returns the final-epoch model.

    The earliest ``split`` fraction of samples trains, the rest validates.
    Normalization bounds come from the training part only.
    """
    windows, targets = (np.asarray(a, dtype=float) for a in dataset)
    if windows.size == 0 or len(windows) == 0:
        raise EmptyDataset("no training windows")
    if windows.shape[1:] != (config.input_steps, config.features_in):
        raise ShapeMismatch(f"windows {windows.shape[1:]} do not match config")
    if targets.shape != (len(windows), config.output_steps):
        raise ShapeMismatch(f"targets {targets.shape} do not match config")
    n_train = chronological_split(len(windows), split)
    x_tr, y_tr = windows[:n_train], targets[:n_train]
    x_va, y_va = windows[n_train:], targets[n_train:]

    norm = NormParams.fit(x_tr, y_tr)
    model = init_model(config, norm)
    xn_tr, yn_tr = norm.normalize_features(x_tr), norm.normalize_target(y_tr)
    xn_va = norm.normalize_features(x_va)

    rng = np.random.default_rng(config.seed + 1)
    state = AdamState()
    report = TrainReport(seed=config.seed, n_train=n_train, n_val=len(x_va))
    step = 0
    for epoch in range(config.epochs):
        lr = learning_rate_at(config, epoch)
        order = rng.permutation(n_train)
        for start in range(0, n_train, config.batch_size):
            idx = order[start:start + config.batch_size]
            _, grads = loss_and_grads(model, xn_tr[idx], yn_tr[idx])
            # linear warmup: full-size first Adam steps can push every head
            # pre-activation below zero, after which the ReLU passes no gradient
            step += 1
            adam_step(model.params, grads, state, lr=lr * min(1.0, step / max(config.warmup_steps, 1)))
        report.train_mae.append(mae(_predict_m(model, xn_tr), y_tr))
        report.val_mae.append(mae(_predict_m(model, xn_va), y_va) if len(x_va) else math.nan)
        if progress:
            log.info("epoch %d train_mae %.5f val_mae %.5f", epoch + 1, report.train_mae[-1], report.val_mae[-1])
    if len(x_va):
        report.test_rmse = rmse(_predict_m(model, xn_va), y_va)
    return model, report


def evaluate(model: EncoderDecoderModel, windows, targets) -> float:
    """Test RMSE in metres for raw windows and targets."""
    x = model.norm.normalize_features(np.asarray(windows, dtype=float))
    return rmse(_predict_m(model, x), targets)


def constant_velocity_predict(track, steps: int = 8, dt: float = 1.0) -> np.ndarray:
    """k-th value is ``k * dt * latest speed``."""
    if not track.history:
        raise EmptyInput("track has no samples")
    v = track.history[-1].record.speed_mps
    return np.arange(1, steps + 1) * dt * v
