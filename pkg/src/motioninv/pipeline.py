"""Dataset loading and leave-one-user-out evaluation."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .features import DEFAULT_VISION_DIM, FeatureSet, load_vision_features
from .metrics import TrialScore, edit_score, frame_accuracy, louo_splits, user_of
from .pose_io import DEFAULT_COLUMN_MAP, GestureTimeline, parse_kinematics, parse_transcript
from .recognizer.training import (
    fit_model, gesture_vocab, predict_labels, prepare_fold, train_config, trial_invariants,
)
from .synth import Trial

log = logging.getLogger(__name__)

VISION_SUFFIXES = (".csv", ".txt", ".bin", ".f32")


def _vision_file(root: Path, trial_id):
    for suf in VISION_SUFFIXES:
        p = root / "vision" / f"{trial_id}{suf}"
        if p.exists():
            return p
    return None


def load_dataset(root, column_map=DEFAULT_COLUMN_MAP, vision="auto", synthetic_vision=False,
                 vision_dim=DEFAULT_VISION_DIM, seed=0):
    """Trials under ``root/kinematics``, ``root/transcriptions`` and optionally ``root/vision``.

    ``vision`` is ``"auto"`` (use vision files when every trial has one, or
    seeded stand-ins with ``synthetic_vision``), ``True`` or ``False``.
    Kinematics files without a transcript are skipped with a warning.
    """
    root = Path(root)
    kin_dir = root / "kinematics"
    if not kin_dir.is_dir():
        raise FileNotFoundError(f"no kinematics directory under {root}")
    trials = []
    for kin in sorted(kin_dir.glob("*.txt")):
        tid = kin.stem
        tr_path = root / "transcriptions" / f"{tid}.txt"
        if not tr_path.exists():
            warnings.warn(f"{tid}: no transcript, skipped", stacklevel=2)
            continue
        left, right = parse_kinematics(kin, column_map)
        timeline = parse_transcript(tr_path, len(left))
        trials.append(Trial(tid, user_of(tid), left, right, timeline, None))
    if not trials:
        raise ValidationError(f"no labelled trials found under {root}")
    files = {t.trial_id: _vision_file(root, t.trial_id) for t in trials}
    use = vision
    if vision == "auto":
        use = all(files.values()) or synthetic_vision
    if use:
        for i, t in enumerate(trials):
            t.vision = load_vision_features(files[t.trial_id], len(t.left), synthetic=synthetic_vision,
                                            dim=vision_dim, seed=seed * 1000003 + i)
    return trials


@dataclass
class FoldResult:
    index: int
    user: str
    scores: list
    predictions: dict  # trial id -> list of labels
    history: object = None


def run_fold(index, user, trials, train_ids, val_ids, fset, profile="desk", seed=0, oracle=False,
             invariants=None, use_vision=True):
    """Train on ``train_ids`` and score every trial in ``val_ids``."""
    fset = FeatureSet.parse(fset) if isinstance(fset, str) else fset
    by_id = {t.trial_id: t for t in trials}
    val_ids = list(val_ids)
    hist = None
    if oracle:
        preds = {tid: list(by_id[tid].timeline.labels) for tid in val_ids}
    else:
        vocab = gesture_vocab([by_id[i] for i in train_ids])
        data, _ = prepare_fold(trials, train_ids, fset, vocab, invariants,
                               use_vision=use_vision and all(t.vision is not None for t in trials))
        train_data = [d for d in data if d.trial_id in set(train_ids)]
        cfg = train_config(profile, seed)
        state, hist = fit_model(train_data, vocab, fset, profile, cfg=cfg)
        preds = {}
        for d in data:
            if d.trial_id in val_ids:
                preds[d.trial_id] = [vocab[i] for i in predict_labels(state, d)]
    scores = []
    for tid in val_ids:
        gt = by_id[tid].timeline
        pred = GestureTimeline(preds[tid])
        mask = gt.mask
        acc = frame_accuracy(pred, gt, mask)
        ed = edit_score([p for p, m in zip(pred.labels, mask) if m], [g for g, m in zip(gt.labels, mask) if m])
        scores.append(TrialScore(user, tid, acc, ed))
    return FoldResult(index, user, scores, preds, hist)


def _run_fold_star(args):
    return run_fold(*args[0], **args[1])


def run_louo(trials, fset, profile="desk", seed=0, oracle=False, jobs=1, use_vision=True):
    """All leave-one-user-out folds; results come back in fold order whatever ``jobs`` is."""
    fset = FeatureSet.parse(fset) if isinstance(fset, str) else fset
    plan = louo_splits([(t.trial_id, t.user_id) for t in trials])
    invariants = {}
    if not oracle and any(c in fset.selection for c in ("k", "t")):
        # shared across folds; computed once per trial
        for t in trials:
            invariants[t.trial_id] = trial_invariants(t)
    tasks = [
        ((i, user, trials, train_ids, val_ids, fset),
         dict(profile=profile, seed=seed, oracle=oracle, invariants=invariants, use_vision=use_vision))
        for i, (user, train_ids, val_ids) in enumerate(plan)
    ]
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_fold_star, tasks))
    else:
        results = [_run_fold_star(t) for t in tasks]
    return sorted(results, key=lambda r: r.index)


def mean_accuracy(results):
    return float(np.mean([s.accuracy for r in results for s in r.scores]))
