"""Dataset preparation, optimisation loop and gradient verification."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..errors import NumericalError, ValidationError
from ..features import STD_FLOOR, FeatureSet, FeatureStats, raw_features
from ..invariants import trajectory_invariants
from ..metrics import edit_score, frame_accuracy
from ..pose_io import UNLABELED
from . import layers as L
from .model import (
    ModelState, forward, init_model, inverse_frequency_alpha, loss_and_grads, loss_from_logits, make_config,
)

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 8
    seed: int = 0
    plateau_patience: int = 10  # scheduler: halve lr after this many epochs without improvement
    plateau_factor: float = 0.5
    early_stop_patience: Optional[int] = None  # on validation loss; None disables
    balance_classes: bool = True
    target_train_acc: Optional[float] = None  # stop once training accuracy reaches this
    kappa_sign_augment: bool = True  # randomly negate κ per arm and sequence while training
    crop: Optional[int] = None  # train on random windows of this many frames instead of whole trials
    crops_per_trial: int = 1
    crop_keep_whole: bool = False  # also train on every whole trial alongside its crops


# Desk runs train on short random windows (plus the whole trials) and stop
# once the training frames are fitted; with only a handful of trials this
# keeps the encoders from memorising each trial's gesture layout.
TRAIN_PROFILES = {
    "desk": dict(epochs=200, crop=24, crops_per_trial=8, crop_keep_whole=True, target_train_acc=98.0),
    "paper": dict(epochs=200),
}


def train_config(profile="desk", seed=0, **overrides) -> TrainConfig:
    if profile not in TRAIN_PROFILES:
        raise ValidationError(f"unknown profile {profile!r} (choose from {sorted(TRAIN_PROFILES)})")
    return TrainConfig(seed=seed, **{**TRAIN_PROFILES[profile], **overrides})


@dataclass
class SequenceData:
    """One trial ready for the network: normalised arm features, vision, integer labels."""

    trial_id: str
    left: np.ndarray
    right: np.ndarray
    vision: Optional[np.ndarray]
    labels: np.ndarray
    mask: np.ndarray
    # per arm: (κ column, shift) such that negating raw κ maps z to shift - z
    kappa_flip: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)


@dataclass
class History:
    rows: list = field(default_factory=list)

    def add(self, **row):
        self.rows.append(row)

    def column(self, key):
        return np.array([r[key] for r in self.rows], dtype=float)

    def write_csv(self, path):
        keys = ["epoch", "loss", "acc", "edit"]
        extra = [k for k in (self.rows[0] if self.rows else {}) if k not in keys]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(keys + extra)
            for r in self.rows:
                w.writerow([r["epoch"]] + [f"{r[k]:.6f}" for k in keys[1:] + extra])


# --- data preparation -------------------------------------------------------------

def trial_invariants(trial):
    """Per-frame ``(κ, τ)`` for both arms of a trial."""
    out = {}
    for arm in ("left", "right"):
        inv = trajectory_invariants(getattr(trial, arm))
        out[arm] = (inv.per_frame_kappa, inv.per_frame_tau)
    return out


def gesture_vocab(trials):
    labels = {g for tr in trials for g in tr.timeline.labels if g != UNLABELED}
    return sorted(labels)


def prepare_fold(trials, train_ids, fset: FeatureSet, vocab, invariants=None, use_vision=True):
    """Turn trials into :class:`SequenceData` with per-arm stats fitted on ``train_ids`` only."""
    fset = FeatureSet.parse(fset) if isinstance(fset, str) else fset
    invariants = invariants if invariants is not None else {}
    raw = {}
    for tr in trials:
        if tr.trial_id not in invariants and any(c in fset.selection for c in ("k", "t")):
            invariants[tr.trial_id] = trial_invariants(tr)
        raw[tr.trial_id] = {}
        for arm in ("left", "right"):
            traj = getattr(tr, arm)
            k, t = invariants[tr.trial_id][arm] if tr.trial_id in invariants else (np.zeros(len(traj)), np.zeros(len(traj)))
            raw[tr.trial_id][arm] = raw_features(traj, k, t, fset)
    train_ids = set(train_ids)
    if not train_ids:
        raise ValidationError("need >= 1 training trial")
    stats = {arm: FeatureStats.fit([raw[i][arm] for i in raw if i in train_ids]) for arm in ("left", "right")}
    flip = {}
    if "k" in fset.selection:
        col = fset.columns().index("kappa")
        for arm in ("left", "right"):
            st = stats[arm]
            flip[arm] = (col, -2.0 * st.mean[col] / st.std[col] if st.std[col] >= STD_FLOOR else 0.0)
    index = {g: i for i, g in enumerate(vocab)}
    data = []
    for tr in trials:
        lab = tr.timeline.labels
        mask = np.array([g in index for g in lab], dtype=bool)
        y = np.array([index.get(g, 0) for g in lab], dtype=int)
        vis = tr.vision.frames if (use_vision and tr.vision is not None) else None
        data.append(SequenceData(tr.trial_id, stats["left"].apply(raw[tr.trial_id]["left"]),
                                 stats["right"].apply(raw[tr.trial_id]["right"]), vis, y, mask, flip))
    return data, stats


def flip_kappa(seq: SequenceData, arms):
    """Copy of ``seq`` with κ negated on ``arms``.

    The sign of κ is only fixed up to a global choice (the sign trace starts
    at +1 arbitrarily), so both signs describe the same motion.
    """
    out = {"left": seq.left, "right": seq.right}
    for arm in arms:
        if arm in seq.kappa_flip:
            col, shift = seq.kappa_flip[arm]
            x = out[arm].copy()
            x[:, col] = shift - x[:, col]
            out[arm] = x
    return replace(seq, left=out["left"], right=out["right"])


def random_crops(data, length, per_trial, rng):
    """Random windows of ``length`` frames (whole trials when shorter)."""
    out = []
    for d in data:
        for _ in range(per_trial):
            if len(d) <= length:
                out.append(d)
                continue
            a = int(rng.integers(0, len(d) - length + 1))
            sl = slice(a, a + length)
            out.append(replace(d, left=d.left[sl], right=d.right[sl], labels=d.labels[sl], mask=d.mask[sl],
                               vision=None if d.vision is None else d.vision[sl]))
    return out


def make_batches(data, batch_size, rng=None, augment=False):
    """Group equal-length sequences; shuffle within and across groups when ``rng`` is given."""
    if augment and rng is not None:
        data = [flip_kappa(d, [a for a in ("left", "right") if rng.random() < 0.5]) for d in data]
    by_len = {}
    for d in data:
        by_len.setdefault(len(d), []).append(d)
    batches = []
    for T in sorted(by_len):
        items = list(by_len[T])
        if rng is not None:
            items = [items[i] for i in rng.permutation(len(items))]
        for i in range(0, len(items), batch_size):
            batches.append(_stack(items[i : i + batch_size]))
    if rng is not None:
        batches = [batches[i] for i in rng.permutation(len(batches))]
    return batches


def _stack(items):
    batch = {
        "left": np.stack([d.left for d in items]),
        "right": np.stack([d.right for d in items]),
        "labels": np.stack([d.labels for d in items]),
        "mask": np.stack([d.mask for d in items]),
    }
    if all(d.vision is not None for d in items):
        batch["vision"] = np.stack([d.vision for d in items])
    return batch


# --- optimiser -------------------------------------------------------------------

class Adam:
    """Adam with L2 weight decay folded into the gradient."""

    def __init__(self, params, lr=1e-3, weight_decay=0.0, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.weight_decay = weight_decay
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            if self.weight_decay:
                g = g + self.weight_decay * params[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


# --- evaluation --------------------------------------------------------------------

def predict_labels(state: ModelState, seq: SequenceData):
    batch = _stack([seq])
    logits, _ = forward(state, batch)
    return np.argmax(logits[0], axis=-1)


def evaluate(state: ModelState, data):
    """Mean loss, frame accuracy and edit score over sequences (eval mode)."""
    losses, accs, edits, weights = [], [], [], []
    for seq in data:
        batch = _stack([seq])
        logits, _ = forward(state, batch)
        loss, _ = loss_from_logits(logits, batch["labels"], batch["mask"], state.alpha)
        pred = np.argmax(logits[0], axis=-1)
        losses.append(loss)
        weights.append(seq.mask.sum())
        accs.append(frame_accuracy(pred, seq.labels, seq.mask))
        edits.append(edit_score(pred[seq.mask], seq.labels[seq.mask]))
    w = np.asarray(weights, dtype=float)
    return {
        "loss": float(np.dot(losses, w) / w.sum()),
        "acc": float(np.dot(accs, w) / w.sum()),  # pooled over frames
        "edit": float(np.mean(edits)),
    }


def train(train_data, state: ModelState, cfg: TrainConfig = TrainConfig(), val_data=None, metrics_path=None):
    """Optimise ``state`` in place on ``train_data``; returns ``(state, History)``.

    The recorded loss is the evaluation-mode loss on the training set after
    each epoch. With validation data the scheduler and early stopping watch
    the validation loss, otherwise the training loss.
    """
    if not train_data:
        raise ValidationError("need >= 1 training trial")
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(state.params, cfg.lr, cfg.weight_decay)
    hist = History()
    best = np.inf
    since_best = 0
    best_params = None
    sched_best = np.inf
    sched_wait = 0
    for epoch in range(1, cfg.epochs + 1):
        epoch_data = train_data
        if cfg.crop is not None:
            epoch_data = random_crops(train_data, cfg.crop, cfg.crops_per_trial, rng)
            if cfg.crop_keep_whole:
                epoch_data = list(train_data) + epoch_data
        for batch in make_batches(epoch_data, cfg.batch_size, rng, cfg.kappa_sign_augment):
            if not batch["mask"].any():
                continue
            loss, grads, _ = loss_and_grads(state, batch, rng=rng, train=True)
            if not np.isfinite(loss):
                raise NumericalError(f"training diverged at epoch {epoch} (loss {loss})")
            opt.step(state.params, grads)
        tr = evaluate(state, train_data)
        if not np.isfinite(tr["loss"]):
            raise NumericalError(f"training diverged at epoch {epoch} (loss {tr['loss']})")
        row = dict(epoch=epoch, loss=tr["loss"], acc=tr["acc"], edit=tr["edit"], lr=opt.lr)
        watch = tr["loss"]
        if val_data:
            va = evaluate(state, val_data)
            row.update(val_loss=va["loss"], val_acc=va["acc"], val_edit=va["edit"])
            watch = va["loss"]
        hist.add(**row)
        log.debug("epoch %d loss %.4f acc %.2f", epoch, tr["loss"], tr["acc"])

        if watch < sched_best - 1e-12:
            sched_best, sched_wait = watch, 0
        else:
            sched_wait += 1
            if sched_wait >= cfg.plateau_patience:
                opt.lr *= cfg.plateau_factor
                sched_wait = 0
        if cfg.early_stop_patience is not None and val_data:
            if watch < best - 1e-12:
                best, since_best = watch, 0
                best_params = {k: v.copy() for k, v in state.params.items()}
            else:
                since_best += 1
                if since_best >= cfg.early_stop_patience:
                    state.params.update(best_params)
                    break
        if cfg.target_train_acc is not None and tr["acc"] >= cfg.target_train_acc:
            break
    if metrics_path is not None:
        hist.write_csv(metrics_path)
    return state, hist


def fit_model(train_data, vocab, fset, profile="desk", vision_dim=None, cfg: TrainConfig = TrainConfig(),
              val_data=None, metrics_path=None, **overrides):
    """Build a fresh model for ``train_data`` and train it."""
    fset = FeatureSet.parse(fset) if isinstance(fset, str) else fset
    K = len(vocab)
    if vision_dim is None and train_data[0].vision is not None:
        vision_dim = train_data[0].vision.shape[1]
    config = make_config(profile, fset.flag, vision_dim=vision_dim, classes=tuple(vocab), **overrides)
    alpha = None
    if cfg.balance_classes:
        alpha = inverse_frequency_alpha([d.labels for d in train_data], [d.mask for d in train_data], K)
    state = init_model(config, seed=cfg.seed, alpha=alpha)
    return train(train_data, state, cfg, val_data, metrics_path)


# --- gradient verification -----------------------------------------------------

def _loss_ext(state, batch, dtype):
    """Loss in the requested float type (no rounding to a Python float)."""
    params = {k: v.astype(dtype) for k, v in state.params.items()}
    st = ModelState(state.config, params, state.alpha.astype(dtype), state.vocab)
    b = {k: (v.astype(dtype) if k in ("left", "right", "vision") else v) for k, v in batch.items()}
    logits, _ = forward(st, b)
    logp = L.log_softmax(logits)
    mask = np.asarray(b["mask"], dtype=bool)
    y = np.where(mask, b["labels"], 0)
    picked = np.take_along_axis(logp, y[..., None], axis=-1)[..., 0]
    return -(st.alpha[y] * mask * picked).sum() / mask.sum()


def gradient_check(state: ModelState, batch, n_params=100, h=1e-6, seed=0, reference_dtype=np.longdouble):
    """Largest relative error between analytic and central-difference gradients.

    Analytic gradients come from the float64 backward pass. The central
    differences are evaluated in ``reference_dtype`` (extended precision by
    default) so that loss roundoff divided by ``2h`` stays far below the
    tolerance even for parameters with tiny gradients. The error of one
    parameter is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    _, grads, _ = loss_and_grads(state, batch)
    rng = np.random.default_rng(seed)
    keys = sorted(state.params)
    sizes = np.array([state.params[k].size for k in keys])
    # sample uniformly over all scalar parameters, without replacement
    flat = rng.choice(sizes.sum(), size=min(n_params, sizes.sum()), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    details = []
    for f in flat:
        ki = int(np.searchsorted(offsets, f, side="right") - 1)
        k = keys[ki]
        i = int(f - offsets[ki])
        P = state.params[k]
        old = P.flat[i]
        P.flat[i] = old + h
        lp = _loss_ext(state, batch, reference_dtype)
        P.flat[i] = old - h
        lm = _loss_ext(state, batch, reference_dtype)
        P.flat[i] = old
        # the perturbed value is exactly representable, so 2h is exact enough
        num = float((lp - lm) / (reference_dtype(old + h) - reference_dtype(old - h)))
        a = float(grads[k].flat[i])
        err = abs(a - num) / max(abs(a), abs(num), 1e-8)
        details.append((k, i, a, num, err))
        worst = max(worst, err)
    return worst, details


def random_batch(config, B=2, T=None, seed=0, zero=False):
    """Random inputs/labels shaped for ``config``; ``zero`` gives all-zero inputs."""
    rng = np.random.default_rng(seed)
    T = T or max(config.encoder.kernel + 1, 24)
    D = config.arm_dim
    gen = (lambda *s: np.zeros(s)) if zero else (lambda *s: rng.standard_normal(s))
    batch = {"left": gen(B, T, D), "right": gen(B, T, D), "labels": rng.integers(0, len(config.classes), (B, T)),
             "mask": np.ones((B, T), dtype=bool)}
    if config.vision_dim:
        batch["vision"] = gen(B, T, config.vision_dim)
    return batch


def linear_only_state(config, seed=0):
    """Same architecture with identity activations and no recurrent branch."""
    cfg = replace(
        config,
        encoder=replace(config.encoder, activation="identity", use_lstm=False),
        graph=replace(config.graph, activation="identity"),
    )
    return init_model(cfg, seed=seed)
