"""Training loop: Adam at lr 0.0005, sparse categorical cross-entropy,
batch 32, up to 40 epochs, early stopping with patience 10 and best-weight
restoration (monitored quantity: validation loss).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data import LabeledDataset, batches
from .errors import DivergedError, InvalidArgumentError
from .model import ModelParams, build_layers
from .preprocess import ClaheConfig, prepare_model_input

# strict-decrease margin so float jitter never resets the patience counter
IMPROVEMENT_DELTA = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0005
    batch_size: int = 32
    max_epochs: int = 40
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if min(self.learning_rate, self.batch_size, self.patience) <= 0 or self.max_epochs < 0:
            raise InvalidArgumentError("training settings must be positive")
        if self.max_epochs > 0 and self.patience > self.max_epochs:
            raise InvalidArgumentError("patience must not exceed max_epochs")


@dataclass
class TrainingHistory:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    wall_time: list[float] = field(default_factory=list)
    best_epoch: int = 0          # 1-based; 0 = no epochs run
    stopped_early: bool = False

    def __len__(self):
        return len(self.train_loss)

    def write_csv(self, path: str):
        with open(path, "w") as f:
            f.write("epoch,train_loss,train_acc,val_loss,val_acc\n")
            for i in range(len(self)):
                f.write(f"{i + 1},{self.train_loss[i]:.6f},{self.train_acc[i]:.6f},"
                        f"{self.val_loss[i]:.6f},{self.val_acc[i]:.6f}\n")


def dataset_tensors(dataset: LabeledDataset, size: int,
                    clahe_cfg: ClaheConfig = ClaheConfig()):
    """Run every sample through the model-input pipeline branch.

    Returns (X (N,3,size,size) float32, y (N,) int64).
    """
    if len(dataset) == 0:
        raise InvalidArgumentError("empty dataset")
    xs = [prepare_model_input(s.load(), size, clahe_cfg) for s in dataset.samples]
    y = np.array([s.label for s in dataset.samples], dtype=np.int64)
    return np.stack(xs), y


def _run_batch(layers, x):
    out = x
    for layer in layers:
        out = layer.forward(out)
    return out


def evaluate_arrays(params: ModelParams, x: np.ndarray, y: np.ndarray,
                    batch_size: int = 32):
    """Mean CE loss and accuracy; argmax ties break to class 0."""
    if len(x) == 0:
        raise InvalidArgumentError("empty dataset")
    layers = build_layers(params)
    losses = []
    correct = 0
    for idx in batches(len(x), batch_size):
        logits = _run_batch(layers, x[idx])
        batch_losses, probs = nn.softmax_ce_forward(logits, y[idx])
        losses.append(batch_losses)
        correct += int(np.sum(np.argmax(probs, axis=1) == y[idx]))
    return float(np.concatenate(losses).mean()), correct / len(x)


def train(params: ModelParams, x_train: np.ndarray, y_train: np.ndarray,
          x_val: np.ndarray, y_val: np.ndarray,
          cfg: TrainConfig = TrainConfig(), monitor_fn=None, verbose=False):
    """Train in place; returns (params, TrainingHistory).

    Early stopping: if the monitored value (validation loss by default) fails
    to improve by at least IMPROVEMENT_DELTA for `patience` consecutive
    epochs, stop and restore the best-epoch parameter snapshot.

    `monitor_fn(epoch, params) -> float` overrides the monitored quantity
    (used by the scripted early-stopping harness).
    """
    if len(x_train) == 0 or len(x_val) == 0:
        raise InvalidArgumentError("train and validation sets must be non-empty")
    history = TrainingHistory()
    if cfg.max_epochs == 0:
        return params, history

    layers = build_layers(params)
    opt = nn.Adam(params.tensors, lr=cfg.learning_rate)
    param_layers = [l for l in layers if l.params]

    best_value = np.inf
    best_snapshot = None
    since_best = 0

    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.monotonic()
        epoch_losses = []
        correct = 0
        for bi, idx in enumerate(batches(len(x_train), cfg.batch_size,
                                         shuffle_seed=cfg.seed, epoch=epoch)):
            xb, yb = x_train[idx], y_train[idx]
            logits = _run_batch(layers, xb)
            losses, probs = nn.softmax_ce_forward(logits, yb)
            loss = float(losses.mean())
            if not np.isfinite(loss):
                raise DivergedError(epoch, bi)
            epoch_losses.append(loss)
            correct += int(np.sum(np.argmax(probs, axis=1) == yb))
            grad = nn.softmax_ce_backward(probs.astype(nn.F32), yb) / nn.F32(len(yb))
            for layer in reversed(layers):
                grad = layer.backward(grad)
            opt.step([g for l in param_layers for g in l.grads])

        val_loss, val_acc = evaluate_arrays(params, x_val, y_val, cfg.batch_size)
        monitored = val_loss if monitor_fn is None else float(monitor_fn(epoch, params))

        history.train_loss.append(float(np.mean(epoch_losses)))
        history.train_acc.append(correct / len(x_train))
        history.val_loss.append(val_loss)
        history.val_acc.append(val_acc)
        history.wall_time.append(time.monotonic() - t0)
        if verbose:
            print(f"epoch {epoch:3d}  train_loss {history.train_loss[-1]:.4f}  "
                  f"train_acc {history.train_acc[-1]:.4f}  val_loss {val_loss:.4f}  "
                  f"val_acc {val_acc:.4f}")

        if monitored < best_value - IMPROVEMENT_DELTA:
            best_value = monitored
            best_snapshot = params.copy()
            history.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                history.stopped_early = True
                break

    if history.stopped_early and best_snapshot is not None:
        for dst, src in zip(params.tensors, best_snapshot.tensors):
            np.copyto(dst, src)
    return params, history


def evaluate(params: ModelParams, dataset: LabeledDataset, size: int,
             clahe_cfg: ClaheConfig = ClaheConfig(), batch_size: int = 32):
    """Pipeline-preprocess a dataset and report (mean loss, accuracy)."""
    x, y = dataset_tensors(dataset, size, clahe_cfg)
    return evaluate_arrays(params, x, y, batch_size)
