"""Mini-batch RMSProp training with per-epoch exponential LR decay and early stopping."""

from __future__ import annotations

import io
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .errors import DivergedLoss, SingleClassTraining
from .network import NetworkConfig, bce_with_logits, forward_logits, init_params, loss_and_grads

log = logging.getLogger(__name__)

MODEL_FORMAT = "wearrhythm-model/1"


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    lr: float = 0.001
    lr_decay: float = 0.9  # lr at epoch e is lr * lr_decay**e
    rho: float = 0.9
    eps: float = 1e-8
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("batch_size", "lr", "lr_decay", "rho", "eps", "max_epochs", "patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class RMSProp:
    """acc <- rho*acc + (1-rho)*g^2;  w <- w - lr * g / (sqrt(acc) + eps)."""

    def __init__(self, params, rho=0.9, eps=1e-8):
        self.rho = rho
        self.eps = eps
        self.acc = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads, lr):
        for k, g in grads.items():
            acc = self.acc[k]
            acc *= self.rho
            acc += (1.0 - self.rho) * g * g
            params[k] -= lr * g / (np.sqrt(acc) + self.eps)


@dataclass
class TrainLog:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("epoch,lr,train_loss,val_loss\n")
        for row in self.epochs:
            val = "" if row["val_loss"] is None else repr(row["val_loss"])
            buf.write(f"{row['epoch']},{row['lr']!r},{row['train_loss']!r},{val}\n")
        return buf.getvalue()


def _batch_inputs(cfg, sensor, rhythm, idx):
    return (sensor[idx] if cfg.uses_sensor else None,
            rhythm[idx] if cfg.uses_rhythm else None)


def evaluate_loss(params, cfg, sensor, rhythm, y) -> float:
    logits, _ = forward_logits(params, cfg, *_batch_inputs(cfg, sensor, rhythm, slice(None)))
    return bce_with_logits(logits, y)


def train(cfg: NetworkConfig, tc: TrainConfig, sensor, rhythm, y, *, val=None):
    """Fit a fresh network.

    Parameters
    ----------
    sensor : (N, T, sensor_dim) array or None when the config ignores it
    rhythm : (N, rhythm_dim) array or None when the config ignores it
    y : (N,) binary labels
    val : optional (sensor, rhythm, y) used for early stopping; without it
        the training loss is monitored.

    Returns
    -------
    params : dict of the best-monitored-epoch weights
    log : TrainLog
    """
    y = np.asarray(y, dtype=float)
    if np.bincount(y.astype(int), minlength=2).min() < 2:
        raise SingleClassTraining("training data needs at least 2 samples of each class")
    sensor = None if sensor is None else np.asarray(sensor, dtype=float)
    rhythm = None if rhythm is None else np.asarray(rhythm, dtype=float)

    rng = np.random.default_rng(tc.seed)
    params = init_params(cfg, rng)
    opt = RMSProp(params, tc.rho, tc.eps)
    history = TrainLog()
    best = (np.inf, -1, None)
    n = y.size
    since_best = 0

    for epoch in range(tc.max_epochs):
        lr = tc.lr * tc.lr_decay ** epoch
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, tc.batch_size):
            idx = order[start:start + tc.batch_size]
            s_b, r_b = _batch_inputs(cfg, sensor, rhythm, idx)
            loss, grads = loss_and_grads(params, cfg, s_b, r_b, y[idx], train=True, rng=rng)
            if not np.isfinite(loss):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}")
            opt.step(params, grads, lr)
            total += loss * idx.size
        train_loss = evaluate_loss(params, cfg, sensor, rhythm, y)
        val_loss = None if val is None else evaluate_loss(params, cfg, *val[:2], val[2])
        history.epochs.append({"epoch": epoch, "lr": lr, "train_loss": train_loss,
                               "val_loss": val_loss, "batch_loss": total / n})
        monitored = train_loss if val_loss is None else val_loss
        if not np.isfinite(monitored):
            raise DivergedLoss(f"non-finite monitored loss at epoch {epoch}")
        if monitored < best[0]:
            best = (monitored, epoch, {k: v.copy() for k, v in params.items()})
            since_best = 0
        else:
            since_best += 1
            if since_best >= tc.patience:
                history.stopped_early = True
                break
    history.best_epoch = best[1]
    return best[2], history


# ---------------------------------------------------------------- persistence


def save_model(path, params, cfg: NetworkConfig, **extra) -> None:
    """npz archive: one array per parameter plus a JSON metadata blob.

    ``extra`` must be JSON-serializable except for ndarray values, which are
    stored as arrays under ``extra/<key>``.
    """
    meta = {"format": MODEL_FORMAT, "version": __version__, "network": cfg.to_dict(), "extra": {}}
    arrays = {f"param/{k}": v for k, v in params.items()}
    for k, v in extra.items():
        if isinstance(v, np.ndarray):
            arrays[f"extra/{k}"] = v
        else:
            meta["extra"][k] = v
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path):
    """Returns (params, NetworkConfig, extra dict)."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path}: not a {MODEL_FORMAT} archive")
        params = {k[len("param/"):]: data[k].copy() for k in data.files if k.startswith("param/")}
        extra = dict(meta["extra"])
        extra.update({k[len("extra/"):]: data[k].copy() for k in data.files if k.startswith("extra/")})
    return params, NetworkConfig(**meta["network"]), extra


def train_config_dict(tc: TrainConfig) -> dict:
    return asdict(tc)
