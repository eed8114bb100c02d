"""Figures written as SVG with byte-stable output."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ValidationError  # noqa: E402
from .pose_io import UNLABELED, GestureTimeline, run_length_segments  # noqa: E402

_RC = {"svg.hashsalt": "motioninv", "svg.fonttype": "none", "path.simplify": False}


def _labels(x):
    return list(x.labels) if isinstance(x, GestureTimeline) else [str(v) for v in x]


def gesture_colors(vocab):
    cmap = plt.get_cmap("tab20")
    colors = {g: cmap(i % 20) for i, g in enumerate(sorted(v for v in vocab if v != UNLABELED))}
    colors[UNLABELED] = (0.85, 0.85, 0.85, 1.0)
    return colors


def save_svg(fig, path):
    """Write ``fig`` to ``path`` without timestamps so reruns are byte-identical."""
    buf = io.BytesIO()
    with plt.rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    Path(path).write_bytes(buf.getvalue())
    return Path(path)


def _ribbon(ax, labels, y, colors, gid):
    segs = run_length_segments(labels)
    spans = [(s, e - s + 1) for s, e, _ in segs]
    coll = ax.broken_barh(spans, (y, 0.8), facecolors=[colors[g] for _, _, g in segs], linewidth=0)
    coll.set_gid(gid)
    return segs


def plot_ribbons(pred, gt, kappa_left, kappa_right, path, title=None):
    """Prediction and ground-truth ribbons above both arms' curvature traces.

    Ground-truth segment boundaries are marked by ticks on the curvature axis.
    """
    p, g = _labels(pred), _labels(gt)
    kl = np.asarray(kappa_left, dtype=float)
    kr = np.asarray(kappa_right, dtype=float)
    lengths = {"prediction": len(p), "ground truth": len(g), "kappa left": len(kl), "kappa right": len(kr)}
    if len(set(lengths.values())) != 1:
        raise ValidationError(f"series lengths differ: {lengths}")
    T = len(g)
    colors = gesture_colors(set(p) | set(g))
    with plt.rc_context(_RC):
        fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(8, 4), sharex=True, gridspec_kw={"height_ratios": [1, 2]})
        _ribbon(ax0, g, 1.0, colors, "ribbon-gt")
        _ribbon(ax0, p, 0.0, colors, "ribbon-pred")
        ax0.set_yticks([0.4, 1.4], ["pred", "truth"])
        ax0.set_xlim(0, T)
        handles = [plt.Rectangle((0, 0), 1, 1, color=colors[c]) for c in sorted(colors) if c in set(p) | set(g)]
        ax0.legend(handles, [c for c in sorted(colors) if c in set(p) | set(g)], ncol=6, fontsize=7,
                   loc="lower left", bbox_to_anchor=(0, 1.0), frameon=False)
        t = np.arange(T)
        ax1.plot(t, kl, lw=1.0, color="tab:blue", label="κ left", gid="kappa-left")
        ax1.plot(t, kr, lw=1.0, color="tab:orange", label="κ right", gid="kappa-right")
        bounds = [s for s, _, _ in run_length_segments(g)[1:]]
        for i, b in enumerate(bounds):
            ax1.axvline(b, color="k", lw=0.6, ls=":", gid=f"boundary-{i}")
        ax1.set_xlabel("frame")
        ax1.set_ylabel("κ")
        ax1.legend(fontsize=7, loc="upper right")
        if title:
            fig.suptitle(title, fontsize=9)
        fig.tight_layout()
    return save_svg(fig, path)


def plot_history(history, path, title=None):
    """Training loss and accuracy against epoch."""
    ep = history.column("epoch")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.plot(ep, history.column("loss"), color="tab:red", gid="loss")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax2 = ax.twinx()
        ax2.plot(ep, history.column("acc"), color="tab:green", gid="accuracy")
        ax2.set_ylabel("accuracy (%)")
        ax2.set_ylim(0, 100)
        if title:
            ax.set_title(title, fontsize=9)
        fig.tight_layout()
    return save_svg(fig, path)


def plot_report(scores, path, label=""):
    """Per-trial accuracy and edit score bars with the mean as a dashed line."""
    names = [s.trial for s in scores]
    acc = np.array([s.accuracy for s in scores])
    ed = np.array([s.edit_score for s in scores])
    x = np.arange(len(names))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(names) + 2), 3))
        ax.bar(x - 0.2, acc, 0.4, label="accuracy", color="tab:blue", gid="bars-accuracy")
        ax.bar(x + 0.2, ed, 0.4, label="edit score", color="tab:gray", gid="bars-edit")
        ax.axhline(acc.mean(), color="tab:blue", ls="--", lw=0.8)
        ax.axhline(ed.mean(), color="tab:gray", ls="--", lw=0.8)
        ax.set_xticks(x, names, rotation=45, ha="right", fontsize=7)
        ax.set_ylim(0, 100)
        ax.set_title(f"{label} accuracy {acc.mean():.1f} ± {acc.std():.1f}", fontsize=9)
        ax.legend(fontsize=7, loc="lower right")
        fig.tight_layout()
    return save_svg(fig, path)
