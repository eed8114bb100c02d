"""Per-frame kinematic feature vectors and precomputed vision features."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParseError, ValidationError
from .pose_io import Trajectory

COMPONENT_DIMS = {"p": 3, "q": 4, "k": 1, "t": 1}
COMPONENT_ORDER = ("p", "q", "k", "t")
VARIANT = ("p", "q")
INVARIANT = ("k", "t")
_ALIASES = {"p": "p", "q": "q", "k": "k", "t": "t", "kappa": "k", "tau": "t", "κ": "k", "τ": "t"}
_PRETTY = {"p": "p", "q": "q", "k": "κ", "t": "τ"}
STD_FLOOR = 1e-12
DEFAULT_VISION_DIM = 128


@dataclass(frozen=True)
class FeatureSet:
    selection: tuple

    def __post_init__(self):
        sel = tuple(c for c in COMPONENT_ORDER if c in set(self.selection))
        if not sel:
            raise ValidationError("feature selection must be non-empty")
        if len(sel) != len(set(self.selection)):
            raise ValidationError(f"unknown feature components in {self.selection}")
        object.__setattr__(self, "selection", sel)

    @classmethod
    def parse(cls, text: str) -> "FeatureSet":
        parts = [p.strip().lower() for p in text.replace("{", "").replace("}", "").split(",") if p.strip()]
        try:
            return cls(tuple(_ALIASES[p] for p in parts))
        except KeyError as exc:
            raise ValidationError(f"unknown feature component {exc.args[0]!r}") from None

    @property
    def dim_per_arm(self):
        return sum(COMPONENT_DIMS[c] for c in self.selection)

    @property
    def label(self):
        return "{" + ", ".join(_PRETTY[c] for c in self.selection) + "}"

    @property
    def flag(self):
        return ",".join(self.selection)

    def columns(self):
        names = {"p": ["px", "py", "pz"], "q": ["qw", "qx", "qy", "qz"], "k": ["kappa"], "t": ["tau"]}
        return [n for c in self.selection for n in names[c]]

    def groups(self):
        """Column index lists of the pose-dependent and invariant parts."""
        variant, invariant = [], []
        col = 0
        for c in self.selection:
            cols = list(range(col, col + COMPONENT_DIMS[c]))
            (variant if c in VARIANT else invariant).extend(cols)
            col += COMPONENT_DIMS[c]
        return variant, invariant


STANDARD_FEATURE_SETS = tuple(FeatureSet.parse(s) for s in ("p", "p,q", "p,q,k,t", "p,k,t"))


@dataclass
class FeatureStats:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, matrices):
        X = np.concatenate([np.asarray(m, dtype=float) for m in matrices], axis=0)
        return cls(X.mean(axis=0), X.std(axis=0))

    def apply(self, X):
        X = np.asarray(X, dtype=float)
        live = self.std >= STD_FLOOR
        out = np.zeros_like(X)
        out[:, live] = (X[:, live] - self.mean[live]) / self.std[live]
        return out

    def invert(self, Z):
        Z = np.asarray(Z, dtype=float)
        live = self.std >= STD_FLOOR
        out = np.tile(self.mean, (len(Z), 1))
        out[:, live] = Z[:, live] * self.std[live] + self.mean[live]
        return out


@dataclass
class FeatureSeries:
    frames: np.ndarray  # (T, D)
    columns: list = field(default_factory=list)
    stats: Optional[FeatureStats] = None
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.mask is None:
            self.mask = np.ones(len(self.frames), dtype=bool)

    def __len__(self):
        return len(self.frames)

    @property
    def dim(self):
        return self.frames.shape[1]


def raw_features(traj: Trajectory, kappa, tau, fset: FeatureSet) -> np.ndarray:
    """Unnormalised ``[p | q | κ | τ]`` columns filtered by ``fset``."""
    T = len(traj)
    kappa = np.asarray(kappa, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if len(kappa) != T or len(tau) != T:
        raise ValidationError(f"invariant series length ({len(kappa)}, {len(tau)}) does not match trajectory length {T}")
    parts = {"p": traj.positions, "q": traj.rotations, "k": kappa[:, None], "t": tau[:, None]}
    return np.concatenate([parts[c] for c in fset.selection], axis=1)


def assemble_features(traj: Trajectory, inv, fset: FeatureSet, stats: Optional[FeatureStats] = None) -> FeatureSeries:
    """Z-scored feature matrix for one arm.

    ``inv`` is an InvariantSeries (per-frame arrays are used) or a
    ``(kappa, tau)`` pair. Without ``stats`` the normalisation is fitted on
    this trajectory; pass training-fold stats for held-out data.
    """
    if isinstance(inv, tuple):
        kappa, tau = inv
    else:
        kappa, tau = inv.per_frame_kappa, inv.per_frame_tau
    X = raw_features(traj, kappa, tau, fset)
    if stats is None:
        stats = FeatureStats.fit([X])
    Z = stats.apply(X)
    if not np.all(np.isfinite(Z)):
        raise ValidationError("non-finite feature values")
    return FeatureSeries(Z, fset.columns(), stats)


def synthetic_vision(T, dim=DEFAULT_VISION_DIM, seed=0):
    rng = np.random.default_rng(seed)
    return FeatureSeries(rng.standard_normal((T, dim)), [f"v{i}" for i in range(dim)])


def load_vision_features(path, T: int, synthetic: bool = False, dim=DEFAULT_VISION_DIM, seed=0) -> FeatureSeries:
    """Read a ``T x D`` vision matrix (CSV/text or raw float32 with a (T, D) int32 header).

    With ``synthetic`` and a missing file, seeded random features are returned.
    """
    path = Path(path) if path is not None else None
    if path is None or not path.exists():
        if synthetic:
            return synthetic_vision(T, dim, seed)
        raise FileNotFoundError(f"no such file: {path}")
    if path.suffix.lower() in (".csv", ".txt"):
        delim = "," if path.suffix.lower() == ".csv" else None
        try:
            X = np.loadtxt(path, delimiter=delim, ndmin=2)
        except ValueError as exc:
            raise ParseError(str(exc), path) from None
    else:
        raw = path.read_bytes()
        if len(raw) < 8:
            raise ParseError("truncated header", path)
        rows, cols = np.frombuffer(raw[:8], dtype="<i4")
        body = np.frombuffer(raw[8:], dtype="<f4")
        if body.size != rows * cols:
            raise ParseError(f"header says {rows}x{cols} but body holds {body.size} values", path)
        X = body.reshape(rows, cols).astype(float)
    if len(X) != T:
        raise ValidationError(f"{path}: vision features have {len(X)} rows, expected {T}")
    return FeatureSeries(X, [f"v{i}" for i in range(X.shape[1])])


def write_vision_features(path, X):
    path = Path(path)
    X = np.asarray(X, dtype=float)
    if path.suffix.lower() == ".csv":
        np.savetxt(path, X, delimiter=",", fmt="%.9g")
    else:
        header = np.array(X.shape, dtype="<i4").tobytes()
        path.write_bytes(header + X.astype("<f4").tobytes())
