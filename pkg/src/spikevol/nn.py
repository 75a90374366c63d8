"""From-scratch regressors on silhouette features: weighted losses, an MLP
with CeLU activations, and an LSTM with per-step (deep) supervision.

Everything is float64 numpy with hand-derived backpropagation; the
gradient_check oracle compares analytic gradients against central finite
differences element by element.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError

GATE_ORDER = "ifgo"  # input, forget, cell candidate, output


# ---------------------------------------------------------------------------
# sample weighting and losses
# ---------------------------------------------------------------------------

@dataclass
class LossWeights:
    """Inverse-frequency sample weights from histogram binning.

    weights attain a maximum of exactly 1 and are strictly positive;
    edges/freqs allow re-weighting held-out samples against the training
    distribution.
    """

    weights: np.ndarray
    bin_count: int
    edges: np.ndarray
    freqs: np.ndarray


def compute_bin_weights(volumes, bin_count=20):
    """w_i = (1 / freq(bin of i)) normalized to max 1, equal-width bins."""
    v = np.asarray(volumes, float)
    if v.size == 0:
        raise DataError("cannot weight an empty volume list")
    if bin_count < 1:
        raise DataError("bin_count must be >= 1")
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        edges = np.array([lo, lo + 1.0])
        bins = np.zeros(v.size, int)
        freqs = np.array([v.size])
    else:
        edges = np.linspace(lo, hi, bin_count + 1)
        width = (hi - lo) / bin_count
        bins = np.minimum(((v - lo) / width).astype(int), bin_count - 1)
        freqs = np.bincount(bins, minlength=bin_count)
    raw = 1.0 / freqs[bins]
    weights = raw / raw.max()
    return LossWeights(
        weights=weights, bin_count=len(freqs), edges=edges, freqs=freqs
    )


def weights_for(volumes, loss_weights):
    """Weights for new samples under an existing binning.

    Out-of-range values clip to the edge bins; values landing in empty
    training bins get the maximum weight 1.
    """
    v = np.asarray(volumes, float)
    edges = loss_weights.edges
    width = edges[1] - edges[0]
    bins = np.clip(((v - edges[0]) / width).astype(int), 0, len(loss_weights.freqs) - 1)
    freqs = loss_weights.freqs[bins]
    raw = np.where(freqs > 0, 1.0 / np.maximum(freqs, 1), 1.0)
    norm = (1.0 / loss_weights.freqs[loss_weights.freqs > 0]).max()
    return np.minimum(raw / norm, 1.0)


def scaled_mse(preds, targets, weights):
    """(1/N) sum_i w_i (y_i - yhat_i)^2."""
    p, y, w = (np.asarray(a, float) for a in (preds, targets, weights))
    if not (p.shape == y.shape == w.shape):
        raise DataError("preds, targets, weights must have identical shapes")
    return float(np.mean(w * (y - p) ** 2))


def scaled_mse_grad(preds, targets, weights):
    p, y, w = (np.asarray(a, float) for a in (preds, targets, weights))
    return 2.0 * w * (p - y) / p.size


def seq_scaled_mse(step_preds, targets, weights):
    """(1/N) sum_i sum_j w_i (y_i - yhat_ij)^2 over all sequence steps."""
    p = np.asarray(step_preds, float)
    y = np.asarray(targets, float)
    w = np.asarray(weights, float)
    if p.ndim != 2:
        raise DataError("step predictions must form a rectangular N x J matrix")
    if p.shape[0] != y.shape[0] or y.shape != w.shape:
        raise DataError("targets/weights must match the prediction row count")
    return float(np.sum(w[:, None] * (y[:, None] - p) ** 2) / p.shape[0])


def seq_scaled_mse_grad(step_preds, targets, weights):
    p = np.asarray(step_preds, float)
    y = np.asarray(targets, float)
    w = np.asarray(weights, float)
    return 2.0 * w[:, None] * (p - y[:, None]) / p.shape[0]


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def celu(x, alpha=1.0):
    return np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0) / alpha))


def celu_grad(x, alpha=1.0):
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0) / alpha))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# parameter initialization
# ---------------------------------------------------------------------------

def init_mlp_params(feature_dim, hidden, rng):
    """Glorot-uniform MLP parameters; final layer maps to one scalar."""
    sizes = [feature_dim, *hidden, 1]
    params = {}
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params[f"W{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"b{i}"] = np.zeros(fan_out)
    return params


def init_lstm_params(feature_dim, hidden, rng):
    """Glorot-uniform LSTM parameters with forget-gate bias 1."""
    bound_x = np.sqrt(6.0 / (feature_dim + hidden))
    bound_h = np.sqrt(6.0 / (hidden + hidden))
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    return {
        "Wx": rng.uniform(-bound_x, bound_x, size=(4 * hidden, feature_dim)),
        "Wh": rng.uniform(-bound_h, bound_h, size=(4 * hidden, hidden)),
        "b": b,
        "head_W": rng.uniform(-bound_h, bound_h, size=hidden),
        "head_b": np.zeros(1),
    }


def _dropout_mask(rng, shape, p):
    if p <= 0:
        return np.ones(shape)
    return (rng.random(shape) >= p) / (1.0 - p)


# ---------------------------------------------------------------------------
# MLP
# ---------------------------------------------------------------------------

def mlp_forward(params, x, alpha=1.0, dropout_masks=None):
    """Predictions (B,) and the cache needed for backprop.

    dropout_masks: optional list of inverted-dropout masks, one per hidden
    layer; omit them for evaluation.
    """
    n_layers = len([k for k in params if k.startswith("W")])
    h = np.asarray(x, float)
    cache = {"inputs": [], "pre": [], "masks": dropout_masks}
    for i in range(n_layers):
        cache["inputs"].append(h)
        z = h @ params[f"W{i}"] + params[f"b{i}"]
        cache["pre"].append(z)
        if i < n_layers - 1:
            h = celu(z, alpha)
            if dropout_masks is not None:
                h = h * dropout_masks[i]
        else:
            h = z
    return h[:, 0], cache


def mlp_backward(params, cache, dpred, alpha=1.0):
    n_layers = len(cache["pre"])
    grads = {}
    delta = np.asarray(dpred, float)[:, None]
    for i in reversed(range(n_layers)):
        if i < n_layers - 1:
            if cache["masks"] is not None:
                delta = delta * cache["masks"][i]
            delta = delta * celu_grad(cache["pre"][i], alpha)
        grads[f"W{i}"] = cache["inputs"][i].T @ delta
        grads[f"b{i}"] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params[f"W{i}"].T
    return grads


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

def lstm_forward(params, x, dropout_masks=None):
    """Per-step predictions (B, T) and the backprop cache.

    Standard gated cell (input/forget/output gates plus cell candidate)
    unrolled over the view sequence; the scalar head is applied to every
    step's hidden state.  dropout_masks, when given, multiply the hidden
    state ahead of the head at each step.
    """
    x = np.asarray(x, float)
    if x.ndim != 3:
        raise DataError("LSTM input must be (batch, steps, features)")
    batch, steps, _ = x.shape
    hidden = params["Wh"].shape[1]
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    preds = np.zeros((batch, steps))
    cache = {"x": x, "steps": [], "masks": dropout_masks}
    hs = hidden
    for t in range(steps):
        z = x[:, t] @ params["Wx"].T + h @ params["Wh"].T + params["b"]
        i = _sigmoid(z[:, 0:hs])
        f = _sigmoid(z[:, hs : 2 * hs])
        g = np.tanh(z[:, 2 * hs : 3 * hs])
        o = _sigmoid(z[:, 3 * hs : 4 * hs])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        hd = h_new if dropout_masks is None else h_new * dropout_masks[t]
        preds[:, t] = hd @ params["head_W"] + params["head_b"][0]
        cache["steps"].append(
            {"h_prev": h, "c_prev": c, "i": i, "f": f, "g": g, "o": o,
             "c": c_new, "tc": tc, "h": h_new, "hd": hd}
        )
        h, c = h_new, c_new
    return preds, cache


def lstm_backward(params, cache, dpreds):
    x = cache["x"]
    batch, steps, _ = x.shape
    hidden = params["Wh"].shape[1]
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))
    masks = cache["masks"]
    for t in reversed(range(steps)):
        st = cache["steps"][t]
        dy = np.asarray(dpreds, float)[:, t]
        grads["head_W"] += st["hd"].T @ dy
        grads["head_b"] += dy.sum(keepdims=True)
        dhd = dy[:, None] * params["head_W"][None, :]
        if masks is not None:
            dhd = dhd * masks[t]
        dh = dhd + dh_next
        do = dh * st["tc"]
        dc = dc_next + dh * st["o"] * (1.0 - st["tc"] ** 2)
        di = dc * st["g"]
        df = dc * st["c_prev"]
        dg = dc * st["i"]
        dc_next = dc * st["f"]
        dzi = di * st["i"] * (1.0 - st["i"])
        dzf = df * st["f"] * (1.0 - st["f"])
        dzg = dg * (1.0 - st["g"] ** 2)
        dzo = do * st["o"] * (1.0 - st["o"])
        dz = np.concatenate([dzi, dzf, dzg, dzo], axis=1)
        grads["Wx"] += dz.T @ x[:, t]
        grads["Wh"] += dz.T @ st["h_prev"]
        grads["b"] += dz.sum(axis=0)
        dh_next = dz @ params["Wh"]
    return grads


# ---------------------------------------------------------------------------
# model container and prediction
# ---------------------------------------------------------------------------

ARCHITECTURES = ("mlp", "lstm_seq2seq", "lstm_seq2one")


@dataclass
class RegressorModel:
    """Trained regressor: weights plus target normalization statistics."""

    architecture: str
    params: dict
    target_mean: float
    target_std: float
    feature_dim: int
    rng_seed: int = 0
    celu_alpha: float = 1.0
    seq_aggregate: str = "mean"
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise DataError(f"unknown architecture '{self.architecture}'")
        if not self.target_std > 0:
            raise DataError("target_std must be positive")

    def copy_params(self):
        return {k: v.copy() for k, v in self.params.items()}


def forward_mlp(model, views):
    """Normalized prediction from the mean of the view features."""
    views = np.atleast_2d(np.asarray(views, float))
    if views.shape[1] != model.feature_dim:
        raise DataError(
            f"feature dim {views.shape[1]} != model dim {model.feature_dim}"
        )
    pooled = views.mean(axis=0, keepdims=True)
    pred, _ = mlp_forward(model.params, pooled, alpha=model.celu_alpha)
    return float(pred[0])


def forward_lstm(model, views):
    """Per-step normalized predictions over views in capture order."""
    views = np.atleast_2d(np.asarray(views, float))
    if views.shape[1] != model.feature_dim:
        raise DataError(
            f"feature dim {views.shape[1]} != model dim {model.feature_dim}"
        )
    preds, _ = lstm_forward(model.params, views[None, :, :])
    return preds[0]


def predict_volume(model, views):
    """Denormalized volume in mm^3 from a view feature stack."""
    if model.architecture == "mlp":
        norm = forward_mlp(model, views)
    else:
        steps = forward_lstm(model, views)
        if model.architecture == "lstm_seq2one" or model.seq_aggregate == "last":
            norm = float(steps[-1])
        else:
            norm = float(steps.mean())
    return norm * model.target_std + model.target_mean


# ---------------------------------------------------------------------------
# gradient check
# ---------------------------------------------------------------------------

def _loss_and_grads(model, x, targets, weights, loss_kind):
    if model.architecture == "mlp":
        pooled = x.mean(axis=1) if x.ndim == 3 else x
        preds, cache = mlp_forward(model.params, pooled, alpha=model.celu_alpha)
        if loss_kind == "seq":
            step = preds[:, None]
            loss = seq_scaled_mse(step, targets, weights)
            dpred = seq_scaled_mse_grad(step, targets, weights)[:, 0]
        else:
            loss = scaled_mse(preds, targets, weights)
            dpred = scaled_mse_grad(preds, targets, weights)
        grads = mlp_backward(model.params, cache, dpred, alpha=model.celu_alpha)
        return loss, grads
    preds, cache = lstm_forward(model.params, x)
    if loss_kind == "seq":
        loss = seq_scaled_mse(preds, targets, weights)
        dpreds = seq_scaled_mse_grad(preds, targets, weights)
    else:
        last = preds[:, -1]
        loss = scaled_mse(last, targets, weights)
        dpreds = np.zeros_like(preds)
        dpreds[:, -1] = scaled_mse_grad(last, targets, weights)
    grads = lstm_backward(model.params, cache, dpreds)
    return loss, grads


def gradient_check(model, x, targets, weights, loss_kind="scalar", step=1e-5):
    """Max relative error between analytic and central-difference gradients.

    Every element of every parameter tensor is perturbed by +-step on the
    normalized scale; dropout is off so the loss is a deterministic
    function of the parameters.
    """
    x = np.asarray(x, float)
    targets = np.asarray(targets, float)
    weights = np.asarray(weights, float)
    _, grads = _loss_and_grads(model, x, targets, weights, loss_kind)
    worst = 0.0
    for name, w in model.params.items():
        flat = w.ravel()
        gflat = grads[name].ravel()
        for idx in range(flat.size):
            keep = flat[idx]
            flat[idx] = keep + step
            up, _ = _loss_and_grads(model, x, targets, weights, loss_kind)
            flat[idx] = keep - step
            dn, _ = _loss_and_grads(model, x, targets, weights, loss_kind)
            flat[idx] = keep
            numeric = (up - dn) / (2.0 * step)
            denom = max(abs(gflat[idx]), abs(numeric), 1e-6)
            worst = max(worst, abs(gflat[idx] - numeric) / denom)
    if not np.isfinite(worst):
        raise NumericError("non-finite gradient encountered")
    return worst
