"""Frame accuracy, segmental edit score and leave-one-user-out folds."""

from __future__ import annotations

import csv
import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .pose_io import GestureTimeline, run_length_segments

_TRIAL_RE = re.compile(r"^(?P<task>.+)_(?P<user>[A-Za-z]+)(?P<rep>\d+)$")


def _labels(x):
    if isinstance(x, GestureTimeline):
        return np.asarray(x.labels, dtype=object)
    return np.asarray(x)


def frame_accuracy(pred, gt, mask=None) -> float:
    """Percentage of evaluated frames whose predicted label matches the ground truth."""
    p, g = _labels(pred), _labels(gt)
    if len(p) != len(g):
        raise ValidationError(f"timeline lengths differ ({len(p)} vs {len(g)})")
    if mask is None:
        mask = gt.mask if isinstance(gt, GestureTimeline) else np.ones(len(g), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        raise ValidationError("no frames to evaluate (mask is empty)")
    return 100.0 * float(np.sum((p == g) & mask)) / n


def segment_labels(x):
    """Run-length encoded label sequence (consecutive duplicates merged)."""
    return [lab for _, _, lab in run_length_segments(list(_labels(x)))]


def levenshtein(a, b) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def edit_score(pred, gt) -> float:
    """Segmental edit score in [0, 100]; segment durations play no role."""
    sp, sg = segment_labels(pred), segment_labels(gt)
    if not sp and not sg:
        return 100.0
    d = levenshtein(sp, sg)
    return max(0.0, 100.0 * (1.0 - d / max(len(sp), len(sg))))


def user_of(trial_id: str) -> str:
    """User letter(s) of an id shaped ``<Task>_<User><NNN>`` (e.g. ``Suturing_B003`` -> ``B``)."""
    m = _TRIAL_RE.match(trial_id)
    if not m:
        raise ValidationError(f"cannot read a user id from trial {trial_id!r}")
    return m.group("user")


@dataclass
class FoldPlan:
    folds: list = field(default_factory=list)  # (held_out_user, train_ids, val_ids)

    def __len__(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)


def louo_splits(trials, users=None) -> FoldPlan:
    """One fold per user: that user's trials validate, everyone else's train.

    ``trials`` holds ``(trial_id, user_id)`` pairs. ``users`` optionally lists
    the expected users; any of them without trials is skipped with a warning.
    """
    trials = list(trials)
    by_user = {}
    for tid, uid in trials:
        by_user.setdefault(uid, []).append(tid)
    if len(by_user) < 2:
        raise ValidationError(f"leave-one-user-out needs >= 2 users, got {len(by_user)}")
    order = list(users) if users is not None else sorted(by_user)
    plan = FoldPlan()
    for u in order:
        if not by_user.get(u):
            warnings.warn(f"user {u!r} has no trials; fold omitted", stacklevel=2)
            continue
        val = list(by_user[u])
        train = [tid for tid, uid in trials if uid != u]
        plan.folds.append((u, train, val))
    return plan


@dataclass
class TrialScore:
    fold: str
    trial: str
    accuracy: float
    edit_score: float


def summarize(scores):
    """``(mean, std)`` of accuracy and edit score over trials (population std)."""
    acc = np.array([s.accuracy for s in scores], dtype=float)
    ed = np.array([s.edit_score for s in scores], dtype=float)
    return (float(acc.mean()), float(acc.std())), (float(ed.mean()), float(ed.std()))


def write_report(path, scores, label=None):
    """CSV of per-trial scores followed by a ``mean ± std`` row."""
    (am, asd), (em, esd) = summarize(scores)
    with open(path, "w", newline="") as fh:
        if label is not None:
            fh.write(f"# features {label}\n")
        w = csv.writer(fh)
        w.writerow(["fold", "trial", "accuracy", "edit_score"])
        for s in scores:
            w.writerow([s.fold, s.trial, f"{s.accuracy:.2f}", f"{s.edit_score:.2f}"])
        w.writerow(["mean", "", f"{am:.1f} ± {asd:.1f}", f"{em:.1f} ± {esd:.1f}"])
    return (am, asd), (em, esd)


def read_report(path):
    """Per-trial rows and the summary row of a report written by :func:`write_report`."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    trials = [dict(zip(header, r)) for r in body if r[0] != "mean"]
    summary = next(dict(zip(header, r)) for r in body if r[0] == "mean")
    return trials, summary
