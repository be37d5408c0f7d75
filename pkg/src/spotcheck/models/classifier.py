"""Training loop and trained-model wrapper.

Plain SGD with momentum; the kept parameters are the ones with the best
validation loss seen during training. Images are stored as uint8 and
converted per batch to keep memory flat.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import DivergenceError
from .nn import ConvNetConfig, SmallConvNet, bce_with_logits


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    max_epochs: int = 20
    patience: int = 4
    min_delta: float = 1e-3  # smallest val-loss drop that counts as progress
    resolution: int = 64
    channels: tuple[int, ...] = (8, 16, 32)
    dtype: str = "float32"

    def to_json(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        if "channels" in obj:
            obj["channels"] = tuple(obj["channels"])
        return cls(**obj)


INPUT_CENTER = 0.5
INPUT_SCALE = 0.25  # zero-centered inputs; uncentered ones stall SGD and can kill the rectifiers


def _to_batch(images: np.ndarray, idx, dtype) -> np.ndarray:
    """uint8 (n, h, w, 3) -> zero-centered float (b, 3, h, w)."""
    x = images[idx].astype(dtype) / np.asarray(255.0, dtype=dtype)
    x = (x - np.asarray(INPUT_CENTER, dtype=dtype)) / np.asarray(INPUT_SCALE, dtype=dtype)
    return np.ascontiguousarray(x.transpose(0, 3, 1, 2))


class CnnModel:
    """A trained classifier exposing representations and confidences."""

    def __init__(self, net: SmallConvNet, train_cfg: TrainConfig, history: dict):
        self.net = net
        self.train_cfg = train_cfg
        self.history = history

    @property
    def rep_dim(self) -> int:
        return self.net.rep_dim

    def _forward_batches(self, images: np.ndarray, batch_size: int = 256):
        dtype = np.dtype(self.net.cfg.dtype)
        logits_all, reps_all = [], []
        for start in range(0, len(images), batch_size):
            idx = slice(start, start + batch_size)
            logits, rep = self.net.forward(_to_batch(images, idx, dtype))
            logits_all.append(logits)
            reps_all.append(rep)
        return np.concatenate(logits_all), np.concatenate(reps_all)

    def represent(self, images: np.ndarray) -> np.ndarray:
        return self._forward_batches(images)[1].astype(np.float64)

    def confidence(self, images: np.ndarray) -> np.ndarray:
        logits = self._forward_batches(images)[0].astype(np.float64)
        return 1.0 / (1.0 + np.exp(-logits))

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = {
            "net": {
                "in_channels": self.net.cfg.in_channels,
                "resolution": self.net.cfg.resolution,
                "channels": list(self.net.cfg.channels),
                "dtype": self.net.cfg.dtype,
            },
            "train_cfg": self.train_cfg.to_json(),
            "history": self.history,
        }
        np.savez(path, meta=json.dumps(meta, sort_keys=True), **self.net.params)

    @classmethod
    def load(cls, path: Path) -> "CnnModel":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            params = {k: data[k] for k in data.files if k != "meta"}
        net_cfg = ConvNetConfig(
            in_channels=meta["net"]["in_channels"],
            resolution=meta["net"]["resolution"],
            channels=tuple(meta["net"]["channels"]),
            dtype=meta["net"]["dtype"],
        )
        net = SmallConvNet(net_cfg, seed=0)
        net.set_params(params)
        return cls(net, TrainConfig.from_json(meta["train_cfg"]), meta["history"])


def _epoch_val_loss(net: SmallConvNet, images, labels, dtype, batch_size=256) -> float:
    total, n = 0.0, len(images)
    for start in range(0, n, batch_size):
        idx = slice(start, min(start + batch_size, n))
        logits, _ = net.forward(_to_batch(images, idx, dtype))
        y = labels[idx].astype(np.float64)
        loss, _ = bce_with_logits(logits.astype(np.float64), y)
        total += loss * (idx.stop - idx.start)
    return total / n


def train_classifier(
    train_images: np.ndarray,
    train_labels: np.ndarray,
    val_images: np.ndarray,
    val_labels: np.ndarray,
    cfg: TrainConfig,
    seed: int,
) -> CnnModel:
    """Fits the classifier on (possibly label-flipped) training labels and
    returns the parameters with the best validation loss.

    Raises DivergenceError if the training loss becomes non-finite.
    """
    dtype = np.dtype(cfg.dtype)
    net_cfg = ConvNetConfig(resolution=cfg.resolution, channels=cfg.channels, dtype=cfg.dtype)
    net = SmallConvNet(net_cfg, seed=seed)
    velocity = {k: np.zeros_like(v) for k, v in net.params.items()}
    rng = np.random.default_rng([seed, 29])

    n = len(train_images)
    best_val = np.inf
    best_params = net.copy_params()
    best_epoch = -1
    stop_ref = np.inf
    epochs_since_improvement = 0
    train_curve, val_curve = [], []

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            x = _to_batch(train_images, idx, dtype)
            y = train_labels[idx].astype(dtype)
            loss, grads = net.loss_and_grads(x, y)
            if not np.isfinite(loss):
                raise DivergenceError(f"training loss became {loss} at epoch {epoch}")
            epoch_loss += loss * len(idx)
            for k, g in grads.items():
                velocity[k] = cfg.momentum * velocity[k] - cfg.learning_rate * g
                net.params[k] += velocity[k]
        train_curve.append(epoch_loss / n)

        val_loss = _epoch_val_loss(net, val_images, val_labels, dtype)
        val_curve.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_params = net.copy_params()
            best_epoch = epoch
        if val_loss < stop_ref - cfg.min_delta:
            stop_ref = val_loss
            epochs_since_improvement = 0
        else:
            epochs_since_improvement += 1
            if epochs_since_improvement >= cfg.patience:
                break

    net.set_params(best_params)
    history = {
        "train_loss": train_curve,
        "val_loss": val_curve,
        "best_epoch": best_epoch,
        "best_val_loss": best_val,
        "seed": seed,
    }
    return CnnModel(net, cfg, history)
