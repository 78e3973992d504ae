"""GRU + multi-head self-attention classifier with a rhythm-feature branch, in numpy.

Every layer has an explicit forward pass that stores what its backward pass
needs. Parameters live in a plain ``dict[str, ndarray]`` so optimizers and
serialization can treat them uniformly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import NonFiniteActivation, ShapeMismatch


@dataclass(frozen=True)
class NetworkConfig:
    gru_hidden: int = 256
    heads: int = 2  # 0 bypasses attention
    rhythm_fc: int = 256
    joint_fc: int = 128
    joint_layers: int = 2
    dropout: float = 0.25
    seq_len: int = 47
    sensor_dim: int = 10
    rhythm_dim: int = 10
    pooling: str = "mean"  # "mean" | "last"
    rhythm_activation: str = "relu"  # "relu" | "linear"
    dropout_placement: str = "each"  # "each" | "last"
    inputs: str = "both"  # "both" | "sensor" | "rhythm"

    def __post_init__(self):
        if self.heads < 0 or (self.heads and self.gru_hidden % self.heads):
            raise ValueError(f"gru_hidden {self.gru_hidden} not divisible by heads {self.heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.pooling not in ("mean", "last"):
            raise ValueError(f"unknown pooling {self.pooling!r}")
        if self.rhythm_activation not in ("relu", "linear"):
            raise ValueError(f"unknown rhythm activation {self.rhythm_activation!r}")
        if self.dropout_placement not in ("each", "last"):
            raise ValueError(f"unknown dropout placement {self.dropout_placement!r}")
        if self.inputs not in ("both", "sensor", "rhythm"):
            raise ValueError(f"unknown inputs {self.inputs!r}")
        if self.joint_layers < 1:
            raise ValueError("need at least one joint layer")

    @property
    def uses_sensor(self) -> bool:
        return self.inputs in ("both", "sensor")

    @property
    def uses_rhythm(self) -> bool:
        return self.inputs in ("both", "rhythm")

    def to_dict(self) -> dict:
        return asdict(self)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def param_shapes(cfg: NetworkConfig) -> dict[str, tuple[int, ...]]:
    H = cfg.gru_hidden
    shapes: dict[str, tuple[int, ...]] = {}
    concat = 0
    if cfg.uses_sensor:
        shapes["gru_W"] = (cfg.sensor_dim, 3 * H)
        shapes["gru_U"] = (H, 3 * H)
        shapes["gru_b"] = (3 * H,)
        if cfg.heads:
            for p in "qkvo":
                shapes[f"att_W{p}"] = (H, H)
                shapes[f"att_b{p}"] = (H,)
        concat += H
    if cfg.uses_rhythm:
        shapes["rhy_W"] = (cfg.rhythm_dim, cfg.rhythm_fc)
        shapes["rhy_b"] = (cfg.rhythm_fc,)
        concat += cfg.rhythm_fc
    width = concat
    for i in range(cfg.joint_layers):
        shapes[f"joint{i}_W"] = (width, cfg.joint_fc)
        shapes[f"joint{i}_b"] = (cfg.joint_fc,)
        width = cfg.joint_fc
    shapes["out_W"] = (width, 1)
    shapes["out_b"] = (1,)
    return shapes


def init_params(cfg: NetworkConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero."""
    params = {}
    for name, shape in param_shapes(cfg).items():
        if len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


# ---------------------------------------------------------------- layers


def gru_forward(x, W, U, b):
    """x: (B, T, D) -> hidden states (B, T, H), zero initial state.

    z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br),
    n = tanh(x Wn + (r * h) Un + bn), h' = z * h + (1 - z) * n
    """
    B, T, _ = x.shape
    H = U.shape[0]
    xw = x @ W + b
    h = np.zeros((B, H))
    hs = np.empty((B, T, H))
    cache = []
    for t in range(T):
        hu = h @ U[:, :2 * H]
        z = sigmoid(xw[:, t, :H] + hu[:, :H])
        r = sigmoid(xw[:, t, H:2 * H] + hu[:, H:])
        rh = r * h
        n = np.tanh(xw[:, t, 2 * H:] + rh @ U[:, 2 * H:])
        cache.append((h, z, r, rh, n))
        h = z * h + (1.0 - z) * n
        hs[:, t] = h
    return hs, (x, W, U, cache)


def gru_backward(dhs, gcache):
    x, W, U, cache = gcache
    B, T, H = dhs.shape
    dU = np.zeros_like(U)
    dxw = np.empty((B, T, 3 * H))
    dh_next = np.zeros((B, H))
    Uzr, Un = U[:, :2 * H], U[:, 2 * H:]
    for t in reversed(range(T)):
        h_prev, z, r, rh, n = cache[t]
        dh = dhs[:, t] + dh_next
        dn = dh * (1.0 - z) * (1.0 - n * n)
        dz = dh * (h_prev - n) * z * (1.0 - z)
        dh_prev = dh * z
        dU[:, 2 * H:] += rh.T @ dn
        drh = dn @ Un.T
        dr = drh * h_prev * r * (1.0 - r)
        dh_prev += drh * r
        dzr = np.concatenate([dz, dr], axis=1)
        dU[:, :2 * H] += h_prev.T @ dzr
        dh_prev += dzr @ Uzr.T
        dxw[:, t, :2 * H] = dzr
        dxw[:, t, 2 * H:] = dn
        dh_next = dh_prev
    flat = dxw.reshape(B * T, 3 * H)
    dW = x.reshape(B * T, -1).T @ flat
    db = flat.sum(axis=0)
    dx = dxw @ W.T
    return dx, dW, dU, db


def _split_heads(a, heads):
    B, T, d = a.shape
    return a.reshape(B, T, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(a):
    B, h, T, dh = a.shape
    return a.transpose(0, 2, 1, 3).reshape(B, T, h * dh)


def mhsa_forward(hs, p, heads):
    """Unmasked scaled dot-product self-attention over the whole sequence.

    Returns (output, attention weights of shape (B, heads, T, T), cache).
    """
    d = hs.shape[-1]
    if heads <= 0 or d % heads:
        raise ShapeMismatch(f"model width {d} not divisible by {heads} heads")
    scale = 1.0 / np.sqrt(d // heads)
    q = _split_heads(hs @ p["att_Wq"] + p["att_bq"], heads)
    k = _split_heads(hs @ p["att_Wk"] + p["att_bk"], heads)
    v = _split_heads(hs @ p["att_Wv"] + p["att_bv"], heads)
    s = q @ k.transpose(0, 1, 3, 2) * scale
    s -= s.max(axis=-1, keepdims=True)
    a = np.exp(s)
    a /= a.sum(axis=-1, keepdims=True)
    o = _merge_heads(a @ v)
    out = o @ p["att_Wo"] + p["att_bo"]
    return out, a, (hs, q, k, v, a, o, scale, heads)


def mhsa_backward(dout, p, cache):
    hs, q, k, v, a, o, scale, heads = cache
    B, T, d = hs.shape
    g = {}
    g["att_Wo"] = o.reshape(B * T, d).T @ dout.reshape(B * T, d)
    g["att_bo"] = dout.sum(axis=(0, 1))
    do = _split_heads(dout @ p["att_Wo"].T, heads)
    da = do @ v.transpose(0, 1, 3, 2)
    dv = a.transpose(0, 1, 3, 2) @ do
    ds = a * (da - np.sum(da * a, axis=-1, keepdims=True)) * scale
    dq = ds @ k
    dk = ds.transpose(0, 1, 3, 2) @ q
    dhs = np.zeros_like(hs)
    flat_hs = hs.reshape(B * T, d).T
    for name, dproj in (("q", dq), ("k", dk), ("v", dv)):
        dm = _merge_heads(dproj)
        g[f"att_W{name}"] = flat_hs @ dm.reshape(B * T, d)
        g[f"att_b{name}"] = dm.sum(axis=(0, 1))
        dhs += dm @ p[f"att_W{name}"].T
    return dhs, g


# ---------------------------------------------------------------- full model


def _check_inputs(cfg, sensor, rhythm):
    if cfg.uses_sensor:
        if sensor is None or sensor.ndim != 3 or sensor.shape[2] != cfg.sensor_dim or sensor.shape[1] < 1:
            got = None if sensor is None else sensor.shape
            raise ShapeMismatch(f"sensor input {got}, expected (B, T>=1, {cfg.sensor_dim})")
    if cfg.uses_rhythm:
        if rhythm is None or rhythm.ndim != 2 or rhythm.shape[1] != cfg.rhythm_dim:
            got = None if rhythm is None else rhythm.shape
            raise ShapeMismatch(f"rhythm input {got}, expected (B, {cfg.rhythm_dim})")
    if cfg.uses_sensor and cfg.uses_rhythm and sensor.shape[0] != rhythm.shape[0]:
        raise ShapeMismatch("sensor and rhythm batch sizes differ")


def _dropout_mask(rng, shape, rate):
    return (rng.random(shape) >= rate) / (1.0 - rate)


def forward_logits(params, cfg: NetworkConfig, sensor, rhythm, *, train=False, rng=None):
    """Batched forward pass. Returns (logits of shape (B,), cache)."""
    sensor = None if sensor is None else np.asarray(sensor, dtype=float)
    rhythm = None if rhythm is None else np.asarray(rhythm, dtype=float)
    _check_inputs(cfg, sensor, rhythm)
    cache = {}
    parts = []
    if cfg.uses_sensor:
        hs, cache["gru"] = gru_forward(sensor, params["gru_W"], params["gru_U"], params["gru_b"])
        if cfg.heads:
            hs, cache["attention"], cache["mhsa"] = mhsa_forward(hs, params, cfg.heads)
        cache["seq_shape"] = hs.shape
        parts.append(hs.mean(axis=1) if cfg.pooling == "mean" else hs[:, -1])
    if cfg.uses_rhythm:
        pre = rhythm @ params["rhy_W"] + params["rhy_b"]
        act = np.maximum(pre, 0.0) if cfg.rhythm_activation == "relu" else pre
        cache["rhy"] = (rhythm, pre)
        parts.append(act)
    h = np.concatenate(parts, axis=1) if len(parts) > 1 else parts[0]
    cache["split"] = [p.shape[1] for p in parts]
    joint = []
    for i in range(cfg.joint_layers):
        inp = h
        pre = inp @ params[f"joint{i}_W"] + params[f"joint{i}_b"]
        h = np.maximum(pre, 0.0)
        mask = None
        use_drop = cfg.dropout_placement == "each" or i == cfg.joint_layers - 1
        if train and use_drop and cfg.dropout > 0:
            if rng is None:
                raise ValueError("train-mode forward with dropout needs an rng")
            mask = _dropout_mask(rng, h.shape, cfg.dropout)
            h = h * mask
        joint.append((inp, pre, mask))
    cache["joint"] = joint
    cache["last"] = h
    logits = (h @ params["out_W"] + params["out_b"])[:, 0]
    if not np.all(np.isfinite(logits)):
        raise NonFiniteActivation("non-finite network output")
    return logits, cache


def backward(params, cfg: NetworkConfig, dlogits, cache) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given d(loss)/d(logits)."""
    g = {}
    h = cache["last"]
    dlog = dlogits[:, None]
    g["out_W"] = h.T @ dlog
    g["out_b"] = dlog.sum(axis=0)
    dh = dlog @ params["out_W"].T
    for i in reversed(range(cfg.joint_layers)):
        inp, pre, mask = cache["joint"][i]
        if mask is not None:
            dh = dh * mask
        dpre = dh * (pre > 0)
        g[f"joint{i}_W"] = inp.T @ dpre
        g[f"joint{i}_b"] = dpre.sum(axis=0)
        dh = dpre @ params[f"joint{i}_W"].T
    split = cache["split"]
    offset = 0
    if cfg.uses_sensor:
        H = split[0]
        dpool = dh[:, :H]
        offset = H
        B, T, _ = cache["seq_shape"]
        if cfg.pooling == "mean":
            dseq = np.repeat(dpool[:, None, :] / T, T, axis=1)
        else:
            dseq = np.zeros((B, T, H))
            dseq[:, -1] = dpool
        if cfg.heads:
            dseq, ga = mhsa_backward(dseq, params, cache["mhsa"])
            g.update(ga)
        _, g["gru_W"], g["gru_U"], g["gru_b"] = gru_backward(dseq, cache["gru"])
    if cfg.uses_rhythm:
        rhythm, pre = cache["rhy"]
        dact = dh[:, offset:]
        dpre = dact * (pre > 0) if cfg.rhythm_activation == "relu" else dact
        g["rhy_W"] = rhythm.T @ dpre
        g["rhy_b"] = dpre.sum(axis=0)
    return g


def bce_with_logits(logits, y) -> float:
    """Mean binary cross-entropy, computed stably from logits."""
    y = np.asarray(y, dtype=float)
    return float(np.mean(np.maximum(logits, 0) - logits * y + np.log1p(np.exp(-np.abs(logits)))))


def loss_and_grads(params, cfg, sensor, rhythm, y, *, train=True, rng=None):
    logits, cache = forward_logits(params, cfg, sensor, rhythm, train=train, rng=rng)
    y = np.asarray(y, dtype=float)
    loss = bce_with_logits(logits, y)
    dlogits = (sigmoid(logits) - y) / y.size
    return loss, backward(params, cfg, dlogits, cache)


def predict_proba(params, cfg: NetworkConfig, sensor, rhythm, *, train=False, rng=None):
    """Probabilities of the infected class for a batch (or a single unbatched sample)."""
    single = False
    if sensor is not None and np.ndim(sensor) == 2:
        sensor = np.asarray(sensor)[None]
        single = True
    if rhythm is not None and np.ndim(rhythm) == 1:
        rhythm = np.asarray(rhythm)[None]
        single = True
    logits, _ = forward_logits(params, cfg, sensor, rhythm, train=train, rng=rng)
    p = sigmoid(logits)
    return float(p[0]) if single else p
