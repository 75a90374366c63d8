"""Training loop: Adam, linear learning-rate decay, random view subsets,
weighted losses, best-validation checkpointing, and field fine-tuning.

Sequence models consume all available views per spike; the MLP trains at
its evaluation view count, drawing a fresh random view subset for every
sample each epoch so all views are seen over training.  Validation runs
with dropout off on the canonical (capture-order) view subset, using the
weighted loss with weights derived from the training distribution.
"""

import copy
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericError
from . import nn
from .nn import (
    RegressorModel,
    compute_bin_weights,
    init_lstm_params,
    init_mlp_params,
    lstm_forward,
    lstm_backward,
    mlp_forward,
    mlp_backward,
    scaled_mse,
    scaled_mse_grad,
    seq_scaled_mse,
    seq_scaled_mse_grad,
    weights_for,
    _dropout_mask,
)


@dataclass
class TrainConfig:
    architecture: str = "mlp"
    view_count: int = 6
    epochs: int = 500
    batch_size: int = 32
    lr_start: float = 1e-4
    lr_end: float = 1e-6
    dropout: float = 0.5
    bin_count: int = 20
    hidden: tuple = (256, 64)
    lstm_hidden: int = 64
    seed: int = 0
    celu_alpha: float = 1.0
    seq_aggregate: str = "mean"

    def __post_init__(self):
        if self.architecture not in nn.ARCHITECTURES:
            raise ConfigError(f"unknown architecture '{self.architecture}'")
        if self.view_count not in (1, 2, 4, 6):
            raise ConfigError(f"unsupported view_count {self.view_count}")


@dataclass
class TrainingSet:
    """Per-spike feature stacks (N, V, D) and measured volumes (N,)."""

    features: np.ndarray
    volumes: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, float)
        self.volumes = np.asarray(self.volumes, float)
        if self.features.ndim != 3:
            raise DataError("features must be (spikes, views, dims)")
        if len(self.features) != len(self.volumes):
            raise DataError("features/volumes length mismatch")
        if len(self.features) == 0:
            raise DataError("empty split")
        if not np.all(np.isfinite(self.features)):
            raise DataError("non-finite feature values")

    @property
    def n_views(self):
        return self.features.shape[1]

    @property
    def feature_dim(self):
        return self.features.shape[2]


class Adam:
    """Adam with standard moments (0.9, 0.999) and eps 1e-8."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] -= lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


def lr_schedule(epoch, total_epochs, lr_start, lr_end):
    """Linear decay from lr_start to lr_end over the training run."""
    if total_epochs <= 1:
        return lr_start
    frac = epoch / (total_epochs - 1)
    return lr_start + (lr_end - lr_start) * frac


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


def history_csv(history):
    lines = ["epoch,train_loss,val_loss,lr"]
    for h in history:
        lines.append(f"{h.epoch},{h.train_loss!r},{h.val_loss!r},{h.lr!r}")
    return "\n".join(lines) + "\n"


def _init_model(cfg, feature_dim, mean, std, rng):
    if cfg.architecture == "mlp":
        params = init_mlp_params(feature_dim, cfg.hidden, rng)
    else:
        params = init_lstm_params(feature_dim, cfg.lstm_hidden, rng)
    return RegressorModel(
        architecture=cfg.architecture,
        params=params,
        target_mean=mean,
        target_std=std,
        feature_dim=feature_dim,
        rng_seed=cfg.seed,
        celu_alpha=cfg.celu_alpha,
        seq_aggregate=cfg.seq_aggregate,
        config=asdict(cfg),
    )


def _sample_view_subsets(rng, n, total, k):
    """Per-sample random k-subsets of range(total), uniformly."""
    scores = rng.random((n, total))
    return np.argsort(scores, axis=1)[:, :k]


def _batch_forward_backward(model, cfg, feats, targets, weights, rng):
    """One training batch: returns (loss, grads)."""
    b = len(feats)
    if model.architecture == "mlp":
        total = feats.shape[1]
        if cfg.view_count < total:
            idx = _sample_view_subsets(rng, b, total, cfg.view_count)
            chosen = feats[np.arange(b)[:, None], idx]
        else:
            chosen = feats
        x = chosen.mean(axis=1)
        n_hidden = len(cfg.hidden)
        masks = [
            _dropout_mask(rng, (b, cfg.hidden[i]), cfg.dropout)
            for i in range(n_hidden)
        ]
        preds, cache = mlp_forward(
            model.params, x, alpha=cfg.celu_alpha, dropout_masks=masks
        )
        loss = scaled_mse(preds, targets, weights)
        grads = mlp_backward(
            model.params, cache, scaled_mse_grad(preds, targets, weights),
            alpha=cfg.celu_alpha,
        )
        return loss, grads
    steps = feats.shape[1]
    masks = [
        _dropout_mask(rng, (b, cfg.lstm_hidden), cfg.dropout) for _ in range(steps)
    ]
    preds, cache = lstm_forward(model.params, feats, dropout_masks=masks)
    if model.architecture == "lstm_seq2seq":
        loss = seq_scaled_mse(preds, targets, weights)
        dpreds = seq_scaled_mse_grad(preds, targets, weights)
    else:
        last = preds[:, -1]
        loss = scaled_mse(last, targets, weights)
        dpreds = np.zeros_like(preds)
        dpreds[:, -1] = scaled_mse_grad(last, targets, weights)
    grads = lstm_backward(model.params, cache, dpreds)
    return loss, grads


def _eval_loss(model, cfg, data, targets_norm, weights):
    """Weighted loss with dropout off, canonical view subset for the MLP."""
    if model.architecture == "mlp":
        k = min(cfg.view_count, data.n_views)
        x = data.features[:, :k].mean(axis=1)
        preds, _ = mlp_forward(model.params, x, alpha=cfg.celu_alpha)
        return scaled_mse(preds, targets_norm, weights)
    preds, _ = lstm_forward(model.params, data.features)
    if model.architecture == "lstm_seq2seq":
        return seq_scaled_mse(preds, targets_norm, weights)
    return scaled_mse(preds[:, -1], targets_norm, weights)


def train(train_set, val_set, cfg):
    """Optimize on the training split; return the best-validation model.

    Targets are normalized by training mean/std; each sample's loss weight
    is the inverse frequency of its volume bin.  The snapshot with the
    lowest validation loss wins; reruns with the same seed are
    bit-identical.
    """
    if train_set.feature_dim != val_set.feature_dim:
        raise DataError("train/val feature dimensions differ")
    mean = float(train_set.volumes.mean())
    std = float(train_set.volumes.std())
    if std <= 0:
        raise NumericError("training volumes are constant; cannot normalize")

    train_w = compute_bin_weights(train_set.volumes, cfg.bin_count)
    val_w = weights_for(val_set.volumes, train_w)
    y_train = (train_set.volumes - mean) / std
    y_val = (val_set.volumes - mean) / std

    rng = np.random.default_rng(np.random.PCG64(cfg.seed))
    model = _init_model(cfg, train_set.feature_dim, mean, std, rng)
    opt = Adam(model.params)

    history = []
    best_val = np.inf
    best_params = model.copy_params()
    n = len(train_set.volumes)
    for epoch in range(cfg.epochs):
        lr = lr_schedule(epoch, cfg.epochs, cfg.lr_start, cfg.lr_end)
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            sel = perm[lo : lo + cfg.batch_size]
            loss, grads = _batch_forward_backward(
                model, cfg,
                train_set.features[sel], y_train[sel], train_w.weights[sel], rng,
            )
            opt.step(model.params, grads, lr)
            total += loss * len(sel)
        train_loss = total / n
        val_loss = _eval_loss(model, cfg, val_set, y_val, val_w)
        if not np.isfinite(val_loss):
            raise NumericError(f"validation loss diverged at epoch {epoch}")
        if val_loss < best_val:
            best_val = val_loss
            best_params = model.copy_params()
        history.append(
            EpochRecord(epoch=epoch, train_loss=train_loss, val_loss=val_loss, lr=lr)
        )
    model.params = best_params
    return model, history


def fine_tune(model, field_train, field_val, cfg):
    """Continue optimization on single-view field data.

    Target normalization switches to the field training statistics; the
    optimizer restarts from the given weights.  Zero epochs replaces only
    the statistics.
    """
    if field_train.n_views != 1 or field_val.n_views != 1:
        raise DataError("field fine-tuning expects single-view data")
    if cfg.view_count != 1:
        raise ConfigError("fine-tuning view_count must be 1")
    if field_train.feature_dim != model.feature_dim:
        raise DataError("field feature dimension does not match the model")
    if cfg.architecture != model.architecture:
        raise ConfigError("fine-tune architecture must match the model")

    seeded = copy.deepcopy(model)
    mean = float(field_train.volumes.mean())
    std = float(field_train.volumes.std())
    if std <= 0:
        raise NumericError("field volumes are constant; cannot normalize")
    seeded.target_mean = mean
    seeded.target_std = std
    if cfg.epochs == 0:
        return seeded, []

    train_w = compute_bin_weights(field_train.volumes, cfg.bin_count)
    val_w = weights_for(field_val.volumes, train_w)
    y_train = (field_train.volumes - mean) / std
    y_val = (field_val.volumes - mean) / std

    rng = np.random.default_rng(np.random.PCG64(cfg.seed))
    opt = Adam(seeded.params)
    history = []
    best_val = np.inf
    best_params = seeded.copy_params()
    n = len(field_train.volumes)
    for epoch in range(cfg.epochs):
        lr = lr_schedule(epoch, cfg.epochs, cfg.lr_start, cfg.lr_end)
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            sel = perm[lo : lo + cfg.batch_size]
            loss, grads = _batch_forward_backward(
                seeded, cfg,
                field_train.features[sel], y_train[sel], train_w.weights[sel], rng,
            )
            opt.step(seeded.params, grads, lr)
            total += loss * len(sel)
        val_loss = _eval_loss(seeded, cfg, field_val, y_val, val_w)
        if val_loss < best_val:
            best_val = val_loss
            best_params = seeded.copy_params()
        history.append(
            EpochRecord(epoch=epoch, train_loss=total / n, val_loss=val_loss, lr=lr)
        )
    seeded.params = best_params
    return seeded, history


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_model(model, path):
    """Self-describing .npz checkpoint: weights plus a JSON metadata blob."""
    meta = {
        "architecture": model.architecture,
        "target_mean": repr(model.target_mean),
        "target_std": repr(model.target_std),
        "feature_dim": model.feature_dim,
        "rng_seed": model.rng_seed,
        "celu_alpha": model.celu_alpha,
        "seq_aggregate": model.seq_aggregate,
        "config": model.config,
        "param_names": sorted(model.params),
    }
    arrays = {f"param_{k}": v for k, v in model.params.items()}
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), np.uint8), **arrays)
    return path


def load_model(path):
    with np.load(path) as blob:
        meta = json.loads(bytes(blob["meta"]).decode())
        params = {k: blob[f"param_{k}"].copy() for k in meta["param_names"]}
    return RegressorModel(
        architecture=meta["architecture"],
        params=params,
        target_mean=float(meta["target_mean"]),
        target_std=float(meta["target_std"]),
        feature_dim=int(meta["feature_dim"]),
        rng_seed=int(meta["rng_seed"]),
        celu_alpha=float(meta["celu_alpha"]),
        seq_aggregate=meta["seq_aggregate"],
        config=meta["config"],
    )
