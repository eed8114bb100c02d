"""Frame-wise gesture classifier.

Each arm's features are split into a pose part (p, q) and an invariant part
(κ, τ); each part runs through its own temporal encoder, whose convolutional
encoder/decoder branch and recurrent branch are averaged. The two encodings are
concatenated into the arm's graph node. Vision features feed a third node.
One or more relational graph layers exchange messages between the nodes
(one weight matrix per directed relation, self-relations included), and a
linear classifier on the concatenated node states gives per-frame gesture
probabilities.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ValidationError
from ..features import FeatureSet
from . import layers as L

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TemporalEncoderConfig:
    enc_channels: tuple = (16, 24, 32)
    dec_channels: tuple = (24, 16, 16)
    kernel: int = 15
    recurrent_hidden: int = 32
    output_dim: int = 16
    activation: str = "relu"
    use_lstm: bool = True

    def __post_init__(self):
        if self.kernel % 2 != 1:
            raise ValidationError("temporal kernel width must be odd")
        if len(self.enc_channels) != len(self.dec_channels):
            raise ValidationError("encoder and decoder need the same number of layers")


@dataclass(frozen=True)
class GraphConfig:
    nodes: tuple = ("vision", "left", "right")
    hidden_dim: int = 16
    dropout: float = 0.2
    layers: int = 1
    activation: str = "relu"
    self_relation: bool = True

    @property
    def relations(self):
        """Directed ``(src, dst)`` pairs: every ordered pair of nodes, plus self-loops."""
        rel = [(s, d) for d in self.nodes for s in self.nodes if s != d]
        if self.self_relation:
            rel += [(n, n) for n in self.nodes]
        return rel


@dataclass(frozen=True)
class ModelConfig:
    encoder: TemporalEncoderConfig = TemporalEncoderConfig()
    graph: GraphConfig = GraphConfig()
    features: str = "p,k,t"
    arm_dim: int = 5
    vision_dim: Optional[int] = 32
    classes: tuple = ()
    profile: str = "desk"

    @property
    def feature_set(self):
        return FeatureSet.parse(self.features)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["encoder"] = TemporalEncoderConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in d["encoder"].items()})
        d["graph"] = GraphConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in d["graph"].items()})
        d["classes"] = tuple(d["classes"])
        return cls(**d)


PROFILES = {
    "desk": dict(
        encoder=TemporalEncoderConfig(),
        graph=GraphConfig(hidden_dim=16, dropout=0.2, layers=1),
    ),
    "paper": dict(
        encoder=TemporalEncoderConfig(
            enc_channels=(64, 96, 128), dec_channels=(96, 64, 64), kernel=51, recurrent_hidden=128, output_dim=64
        ),
        graph=GraphConfig(hidden_dim=64, dropout=0.2, layers=1),
    ),
}


def make_config(profile="desk", features="p,k,t", vision_dim=32, classes=(), **overrides) -> ModelConfig:
    if profile not in PROFILES:
        raise ValidationError(f"unknown profile {profile!r} (choose from {sorted(PROFILES)})")
    base = dict(PROFILES[profile])
    fset = FeatureSet.parse(features)
    nodes = ("vision", "left", "right") if vision_dim else ("left", "right")
    base["graph"] = replace(base["graph"], nodes=nodes)
    for key in ("encoder", "graph"):
        if key in overrides:
            base[key] = replace(base[key], **overrides.pop(key))
    return ModelConfig(
        features=fset.flag, arm_dim=fset.dim_per_arm, vision_dim=vision_dim or None,
        classes=tuple(classes), profile=profile, **base, **overrides,
    )


@dataclass
class ModelState:
    config: ModelConfig
    params: dict
    alpha: np.ndarray
    vocab: list = field(default_factory=list)

    @property
    def n_classes(self):
        return len(self.vocab)

    def copy(self):
        return ModelState(self.config, {k: v.copy() for k, v in self.params.items()}, self.alpha.copy(), list(self.vocab))


# --- parameter initialisation --------------------------------------------------

def _glorot(rng, shape, fan_in, fan_out):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape)


def init_encoder(rng, prefix, in_dim, cfg: TemporalEncoderConfig, params):
    k = cfg.kernel
    c_prev = in_dim
    for i, c in enumerate(cfg.enc_channels):
        params[f"{prefix}.enc{i}.W"] = _glorot(rng, (k, c_prev, c), k * c_prev, k * c)
        params[f"{prefix}.enc{i}.b"] = np.zeros(c)
        c_prev = c
    for i, c in enumerate(cfg.dec_channels):
        params[f"{prefix}.dec{i}.W"] = _glorot(rng, (k, c_prev, c), k * c_prev, k * c)
        params[f"{prefix}.dec{i}.b"] = np.zeros(c)
        c_prev = c
    params[f"{prefix}.tcn_out.W"] = _glorot(rng, (c_prev, cfg.output_dim), c_prev, cfg.output_dim)
    params[f"{prefix}.tcn_out.b"] = np.zeros(cfg.output_dim)
    if cfg.use_lstm:
        H = cfg.recurrent_hidden
        lim = 1.0 / np.sqrt(H)
        params[f"{prefix}.lstm.Wx"] = rng.uniform(-lim, lim, size=(in_dim, 4 * H))
        params[f"{prefix}.lstm.Wh"] = rng.uniform(-lim, lim, size=(H, 4 * H))
        params[f"{prefix}.lstm.b"] = np.zeros(4 * H)
        params[f"{prefix}.lstm_out.W"] = _glorot(rng, (H, cfg.output_dim), H, cfg.output_dim)
        params[f"{prefix}.lstm_out.b"] = np.zeros(cfg.output_dim)
    return params


def arm_groups(config: ModelConfig):
    variant, invariant = config.feature_set.groups()
    return [(name, idx) for name, idx in (("pose", variant), ("inv", invariant)) if idx]


def node_input_dims(config: ModelConfig):
    n_groups = len(arm_groups(config))
    dims = {"left": n_groups * config.encoder.output_dim, "right": n_groups * config.encoder.output_dim}
    if "vision" in config.graph.nodes:
        dims["vision"] = config.vision_dim
    return dims


def init_model(config: ModelConfig, seed=0, alpha=None, classifier_scale=1.0) -> ModelState:
    """Random parameters; ``classifier_scale=0`` makes every prediction uniform."""
    if len(config.classes) < 2:
        raise ValidationError("need >= 2 gesture classes")
    rng = np.random.default_rng(seed)
    params = {}
    for arm in ("left", "right"):
        for gname, idx in arm_groups(config):
            init_encoder(rng, f"enc.{arm}.{gname}", len(idx), config.encoder, params)
    dims = node_input_dims(config)
    H = config.graph.hidden_dim
    for layer in range(config.graph.layers):
        for src, dst in config.graph.relations:
            d_in = dims[src] if layer == 0 else H
            params[f"graph.{layer}.{src}>{dst}"] = _glorot(rng, (d_in, H), d_in, H)
    K = len(config.classes)
    n_nodes = len(config.graph.nodes)
    params["cls.W"] = classifier_scale * _glorot(rng, (n_nodes * H, K), n_nodes * H, K)
    params["cls.b"] = np.zeros(K)
    if alpha is None:
        alpha = np.ones(K)
    return ModelState(config, params, np.asarray(alpha, dtype=float), list(config.classes))


# --- temporal encoder ------------------------------------------------------------

def encoder_forward(x, params, prefix, cfg: TemporalEncoderConfig):
    if x.shape[1] < cfg.kernel:
        raise ValidationError(
            f"sequence of {x.shape[1]} frames is shorter than the kernel width {cfg.kernel}; pad the input"
        )
    caches = []
    h = x
    lengths = []
    for i in range(len(cfg.enc_channels)):
        lengths.append(h.shape[1])
        h, cc = L.conv1d_forward(h, params[f"{prefix}.enc{i}.W"], params[f"{prefix}.enc{i}.b"])
        h, ca = L.act_forward(h, cfg.activation)
        h, cp = L.maxpool_forward(h)
        caches.append((cc, ca, cp))
    for i in range(len(cfg.dec_channels)):
        h, cu = L.upsample_forward(h, lengths[-1 - i])
        h, cc = L.conv1d_forward(h, params[f"{prefix}.dec{i}.W"], params[f"{prefix}.dec{i}.b"])
        h, ca = L.act_forward(h, cfg.activation)
        caches.append((cu, cc, ca))
    y_tcn, c_out = L.linear_forward(h, params[f"{prefix}.tcn_out.W"], params[f"{prefix}.tcn_out.b"])
    cache = {"tcn": caches, "tcn_out": c_out}
    if not cfg.use_lstm:
        return y_tcn, cache
    hs, c_lstm = L.lstm_forward(x, params[f"{prefix}.lstm.Wx"], params[f"{prefix}.lstm.Wh"], params[f"{prefix}.lstm.b"])
    y_lstm, c_lo = L.linear_forward(hs, params[f"{prefix}.lstm_out.W"], params[f"{prefix}.lstm_out.b"])
    cache.update(lstm=c_lstm, lstm_out=c_lo)
    return 0.5 * (y_tcn + y_lstm), cache


def encoder_backward(dy, cache, params, prefix, cfg: TemporalEncoderConfig, grads):
    if cfg.use_lstm:
        d_tcn = 0.5 * dy
        d_lstm = 0.5 * dy
    else:
        d_tcn = dy
    dh, dW, db = L.linear_backward(d_tcn, cache["tcn_out"], params[f"{prefix}.tcn_out.W"])
    grads[f"{prefix}.tcn_out.W"] = dW
    grads[f"{prefix}.tcn_out.b"] = db
    n = len(cfg.enc_channels)
    for i in reversed(range(len(cfg.dec_channels))):
        cu, cc, ca = cache["tcn"][n + i]
        dh = L.act_backward(dh, ca, cfg.activation)
        dh, dW, db = L.conv1d_backward(dh, cc, params[f"{prefix}.dec{i}.W"])
        grads[f"{prefix}.dec{i}.W"] = dW
        grads[f"{prefix}.dec{i}.b"] = db
        dh = L.upsample_backward(dh, cu)
    for i in reversed(range(n)):
        cc, ca, cp = cache["tcn"][i]
        dh = L.maxpool_backward(dh, cp)
        dh = L.act_backward(dh, ca, cfg.activation)
        dh, dW, db = L.conv1d_backward(dh, cc, params[f"{prefix}.enc{i}.W"])
        grads[f"{prefix}.enc{i}.W"] = dW
        grads[f"{prefix}.enc{i}.b"] = db
    dx = dh
    if cfg.use_lstm:
        dhs, dW, db = L.linear_backward(d_lstm, cache["lstm_out"], params[f"{prefix}.lstm_out.W"])
        grads[f"{prefix}.lstm_out.W"] = dW
        grads[f"{prefix}.lstm_out.b"] = db
        dxl, dWx, dWh, dbl = L.lstm_backward(dhs, cache["lstm"], params[f"{prefix}.lstm.Wx"], params[f"{prefix}.lstm.Wh"])
        grads[f"{prefix}.lstm.Wx"] = dWx
        grads[f"{prefix}.lstm.Wh"] = dWh
        grads[f"{prefix}.lstm.b"] = dbl
        dx = dx + dxl
    return dx


# --- relational graph --------------------------------------------------------------

def graph_layer_forward(h, params, layer, cfg: GraphConfig, rng=None, train=False):
    """``h_i' = σ(Σ_{j→i} h_j W_{j→i})`` over every relation into node ``i``.

    Messages are summed in the fixed order of ``cfg.relations``.
    """
    masks = {}
    h_in = {}
    for n in cfg.nodes:
        m = L.dropout_mask(rng, h[n].shape, cfg.dropout) if train else None
        masks[n] = m
        h_in[n] = h[n] * m if m is not None else h[n]
    pre = {}
    for src, dst in cfg.relations:
        msg = h_in[src] @ params[f"graph.{layer}.{src}>{dst}"]
        pre[dst] = msg if dst not in pre else pre[dst] + msg
    out = {}
    acts = {}
    for n in cfg.nodes:
        out[n], acts[n] = L.act_forward(pre[n], cfg.activation)
    return out, (h_in, masks, acts)


def graph_layer_backward(dout, cache, params, layer, cfg: GraphConfig, grads):
    h_in, masks, acts = cache
    dpre = {n: L.act_backward(dout[n], acts[n], cfg.activation) for n in cfg.nodes}
    dh = {n: np.zeros_like(h_in[n]) for n in cfg.nodes}
    for src, dst in cfg.relations:
        W = params[f"graph.{layer}.{src}>{dst}"]
        x = h_in[src]
        grads[f"graph.{layer}.{src}>{dst}"] = x.reshape(-1, x.shape[-1]).T @ dpre[dst].reshape(-1, W.shape[1])
        dh[src] += dpre[dst] @ W.T
    for n in cfg.nodes:
        if masks[n] is not None:
            dh[n] = dh[n] * masks[n]
    return dh


def relational_graph_step(h, cfg: GraphConfig, params, layer=0):
    """One message-passing update in evaluation mode (no dropout)."""
    out, _ = graph_layer_forward(h, params, layer, cfg, train=False)
    return out


# --- full model ------------------------------------------------------------------

def forward(state: ModelState, batch, rng=None, train=False):
    """Logits ``(B, T, K)`` for a batch dict with ``left``, ``right`` and optional ``vision``."""
    cfg = state.config
    p = state.params
    cache = {"enc": {}}
    h = {}
    groups = arm_groups(cfg)
    for arm in ("left", "right"):
        x = batch[arm]
        outs = []
        for gname, idx in groups:
            y, c = encoder_forward(x[..., idx], p, f"enc.{arm}.{gname}", cfg.encoder)
            cache["enc"][(arm, gname)] = c
            outs.append(y)
        h[arm] = np.concatenate(outs, axis=-1) if len(outs) > 1 else outs[0]
    if "vision" in cfg.graph.nodes:
        if batch.get("vision") is None:
            raise ValidationError("model expects vision features")
        h["vision"] = batch["vision"]
    cache["graph"] = []
    for layer in range(cfg.graph.layers):
        h, c = graph_layer_forward(h, p, layer, cfg.graph, rng, train)
        cache["graph"].append(c)
    z = np.concatenate([h[n] for n in cfg.graph.nodes], axis=-1)
    logits, cache["cls"] = L.linear_forward(z, p["cls.W"], p["cls.b"])
    return logits, cache


def backward(state: ModelState, dlogits, cache):
    cfg = state.config
    p = state.params
    grads = {}
    dz, grads["cls.W"], grads["cls.b"] = L.linear_backward(dlogits, cache["cls"], p["cls.W"])
    H = cfg.graph.hidden_dim
    dh = {n: dz[..., i * H : (i + 1) * H] for i, n in enumerate(cfg.graph.nodes)}
    for layer in reversed(range(cfg.graph.layers)):
        dh = graph_layer_backward(dh, cache["graph"][layer], p, layer, cfg.graph, grads)
    D = cfg.encoder.output_dim
    for arm in ("left", "right"):
        for gi, (gname, _) in enumerate(arm_groups(cfg)):
            dy = dh[arm][..., gi * D : (gi + 1) * D]
            encoder_backward(dy, cache["enc"][(arm, gname)], p, f"enc.{arm}.{gname}", cfg.encoder, grads)
    return grads


def loss_from_logits(logits, labels, mask, alpha):
    """Weighted cross-entropy and its gradient w.r.t. the logits.

    ``L = (1/N) Σ_t −α[y_t] log ĉ_t[y_t]`` over the ``N`` unmasked frames.
    """
    mask = np.asarray(mask, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        raise ValidationError("no unmasked frames to score")
    logp = L.log_softmax(logits)
    y = np.where(mask, labels, 0)
    picked = np.take_along_axis(logp, y[..., None], axis=-1)[..., 0]
    w = alpha[y] * mask
    loss = float(-(w * picked).sum() / n)
    dlogits = np.exp(logp)
    np.put_along_axis(dlogits, y[..., None], np.take_along_axis(dlogits, y[..., None], axis=-1) - 1.0, axis=-1)
    dlogits *= (w / n)[..., None]
    return loss, dlogits


def loss_and_grads(state: ModelState, batch, rng=None, train=False):
    logits, cache = forward(state, batch, rng, train)
    loss, dlogits = loss_from_logits(logits, batch["labels"], batch["mask"], state.alpha)
    return loss, backward(state, dlogits, cache), logits


# --- public operations -------------------------------------------------------------

def temporal_encode(series, cfg: TemporalEncoderConfig, params=None, seed=0, prefix="enc"):
    """Encode a ``(T, C)`` series (or FeatureSeries) into ``(T, output_dim)``."""
    x = np.asarray(getattr(series, "frames", series), dtype=float)
    if params is None:
        params = init_encoder(np.random.default_rng(seed), prefix, x.shape[1], cfg, {})
    y, _ = encoder_forward(x[None], params, prefix, cfg)
    return y[0]


def predict_frames(vision, left, right, model: ModelState):
    """Per-frame gesture probabilities ``(T, K)`` for one trial."""
    arrays = {k: np.asarray(getattr(v, "frames", v), dtype=float) for k, v in (("left", left), ("right", right))}
    if vision is not None:
        arrays["vision"] = np.asarray(getattr(vision, "frames", vision), dtype=float)
    lengths = {len(a) for a in arrays.values()}
    if len(lengths) != 1:
        raise ValidationError(f"input series lengths differ: { {k: len(a) for k, a in arrays.items()} }")
    batch = {k: a[None] for k, a in arrays.items()}
    logits, _ = forward(model, batch)
    return L.softmax(logits[0])


def weighted_cross_entropy(preds, labels, alpha, mask=None, clamp=1e-12):
    """Weighted cross-entropy of probability rows ``preds`` against integer ``labels``."""
    preds = np.asarray(preds, dtype=float)
    labels = np.asarray(labels)
    alpha = np.asarray(alpha, dtype=float)
    if mask is None:
        mask = np.ones(len(labels), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        raise ValidationError("no unmasked frames to score")
    y = np.where(mask, labels, 0)
    p = np.clip(preds[np.arange(len(y)), y], clamp, 1.0)
    return float(np.sum(np.where(mask, -alpha[y] * np.log(p), 0.0)) / n)


def inverse_frequency_alpha(label_arrays, masks, K):
    """``α_c = N / (K · N_c)`` over unmasked training frames; unseen classes get 1."""
    counts = np.zeros(K)
    for y, m in zip(label_arrays, masks):
        counts += np.bincount(np.asarray(y)[np.asarray(m, dtype=bool)], minlength=K)[:K]
    total = counts.sum()
    return np.where(counts > 0, total / (K * np.maximum(counts, 1)), 1.0)


# --- checkpoint ---------------------------------------------------------------------

def save_checkpoint(path, state: ModelState):
    """Write an ``.npz`` container: one shape-tagged array per parameter plus a JSON header."""
    header = {
        "format": "motioninv-checkpoint",
        "version": CHECKPOINT_VERSION,
        "config": state.config.to_dict(),
        "vocab": state.vocab,
        "shapes": {k: list(v.shape) for k, v in state.params.items()},
    }
    arrays = {f"param/{k}": v for k, v in state.params.items()}
    arrays["alpha"] = state.alpha
    arrays["header"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path) -> ModelState:
    with np.load(path) as z:
        header = json.loads(bytes(z["header"]).decode())
        if header.get("format") != "motioninv-checkpoint":
            raise ValidationError(f"{path}: not a model checkpoint")
        if header["version"] > CHECKPOINT_VERSION:
            raise ValidationError(f"{path}: checkpoint version {header['version']} is newer than supported")
        params = {k[len("param/"):]: z[k].copy() for k in z.files if k.startswith("param/")}
        alpha = z["alpha"].copy()
    for k, shape in header["shapes"].items():
        if list(params[k].shape) != shape:
            raise ValidationError(f"{path}: parameter {k} has shape {params[k].shape}, header says {shape}")
    return ModelState(ModelConfig.from_dict(header["config"]), params, alpha, header["vocab"])
