"""Curvature and torsion of an arc-length sampled curve.

Derivatives are second-order finite differences on the uniform grid.
Curvature carries a sign that flips whenever ``r''`` jumps to the other side
of the curve (an inflection); torsion is ``det[r', r'', r''']/κ²`` and is set
to zero where the curvature is negligible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ValidationError
from .pose_io import Trajectory
from .screw import trajectory_screws, usable_count
from .striction import MIN_SAMPLES, StrictionCurve, build_striction_polyline, fit_and_resample

KAPPA_REL = 1e-3  # ε_κ = KAPPA_REL / total_length
EPS_FLIP = 1e-8  # absolute floor for flip_threshold


@dataclass
class InvariantSeries:
    kappa: np.ndarray  # signed, per arc-length sample
    tau: np.ndarray
    gamma: np.ndarray  # ±1 sign state per sample
    curve: Optional[StrictionCurve] = None
    per_frame_kappa: Optional[np.ndarray] = None
    per_frame_tau: Optional[np.ndarray] = None
    degenerate: bool = False
    screws: list = field(default_factory=list, repr=False)


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative on integer ``offsets``.

    Solves the Vandermonde moment conditions; the result is exact for
    polynomials of degree ``len(offsets) - 1``.
    """
    x = np.asarray(offsets, dtype=float)
    n = len(x)
    A = np.vander(x, n, increasing=True).T
    b = np.zeros(n)
    b[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(A, b)


# (centred width, one-sided width) giving second-order accuracy
_STENCIL_WIDTHS = {1: (3, 3), 2: (3, 4), 3: (5, 5)}


def _derivative(y, h, order):
    M = len(y)
    wc, wo = _STENCIL_WIDTHS[order]
    half = wc // 2
    out = np.empty_like(y)
    wts = fd_weights(tuple(range(-half, half + 1)), order)
    interior = slice(half, M - half)
    acc = np.zeros_like(y[interior])
    for j, wj in zip(range(-half, half + 1), wts):
        acc += wj * y[half + j : M - half + j]
    out[interior] = acc
    for k in list(range(half)) + list(range(M - half, M)):
        start = 0 if k < half else M - wo
        offs = tuple(range(start - k, start - k + wo))
        out[k] = fd_weights(offs, order) @ y[start : start + wo]
    return out / h**order


def curve_derivatives(curve: StrictionCurve):
    """``(r', r'', r''')`` at every sample of a uniformly spaced curve."""
    r = np.asarray(curve.samples, dtype=float)
    if len(r) < MIN_SAMPLES:
        raise ValidationError(f"need >= {MIN_SAMPLES} samples, got {len(r)}")
    h = curve.ds
    if h <= 0:
        z = np.zeros_like(r)
        return z, z.copy(), z.copy()
    return _derivative(r, h, 1), _derivative(r, h, 2), _derivative(r, h, 3)


def signed_curvature(d2, eps_flip=EPS_FLIP):
    """Signed curvature ``γ‖r''‖`` and the sign trace ``γ``.

    ``γ`` starts at +1 and flips when ``r''`` turns against the last sample
    whose norm was at least ``eps_flip``; near-zero samples never flip it.
    """
    norms = np.linalg.norm(d2, axis=1)
    gamma = np.ones(len(d2))
    g = 1.0
    ref = d2[0] if norms[0] >= eps_flip else None
    for k in range(1, len(d2)):
        if norms[k] >= eps_flip:
            if ref is not None and d2[k] @ ref < 0:
                g = -g
            ref = d2[k]
        gamma[k] = g
    return gamma * norms, gamma


def flip_threshold(total_length):
    """‖r''‖ below which a sample neither flips γ nor serves as the flip reference.

    Scales like curvature (``KAPPA_REL / total_length``, the same level below
    which torsion is zeroed) so that rescaling a trajectory cannot change
    which samples count; numerical noise on straight stretches stays below it.
    """
    return max(KAPPA_REL / total_length, 0.0) if total_length > 0 else EPS_FLIP


def torsion(d1, d2, d3, kappa, eps_kappa):
    det = np.einsum("ij,ij->i", d1, np.cross(d2, d3))
    k2 = kappa * kappa
    big = np.abs(kappa) >= eps_kappa
    return np.where(big, det / np.where(big, k2, 1.0), 0.0)


def curve_invariants(curve: StrictionCurve, eps_flip=None) -> InvariantSeries:
    M = len(curve)
    if curve.degenerate or curve.total_length <= 0:
        z = np.zeros(M)
        return InvariantSeries(z, z.copy(), np.ones(M), curve, degenerate=True)
    d1, d2, d3 = curve_derivatives(curve)
    if eps_flip is None:
        eps_flip = flip_threshold(curve.total_length)
    kappa, gamma = signed_curvature(d2, eps_flip)
    eps_kappa = KAPPA_REL / curve.total_length
    tau = torsion(d1, d2, d3, kappa, eps_kappa)
    return InvariantSeries(kappa, tau, gamma, curve)


def invariants_per_frame(series: InvariantSeries, curve: StrictionCurve, T: int):
    """Per-frame ``(κ, τ)``: each frame takes the first sample of its nearest anchor.

    Ties between two anchors go to the earlier one; frames outside the anchor
    range take the boundary sample.
    """
    if series.degenerate or curve is None:
        return np.zeros(T), np.zeros(T)
    anchors = np.asarray(curve.time_anchor)
    ua, first = np.unique(anchors, return_index=True)
    t = np.arange(T)
    j = np.clip(np.searchsorted(ua, t), 1, max(len(ua) - 1, 1))
    if len(ua) == 1:
        pick = np.zeros(T, dtype=int)
    else:
        prev_closer = (t - ua[j - 1]) <= (ua[j] - t)
        pick = np.where(prev_closer, j - 1, j)
    idx = first[pick]
    return series.kappa[idx].copy(), series.tau[idx].copy()


def trajectory_invariants(traj: Trajectory, M=None) -> InvariantSeries:
    """Full pipeline: screws, striction curve, invariants, per-frame alignment."""
    T = len(traj)
    screws = trajectory_screws(traj)
    if usable_count(screws) < 2:
        z = np.zeros(T)
        out = InvariantSeries(np.zeros(MIN_SAMPLES), np.zeros(MIN_SAMPLES), np.ones(MIN_SAMPLES), None, z, z.copy(), True)
        out.screws = screws
        return out
    # work relative to the centroid: the invariants ignore translation, and
    # small coordinates keep rounding in the high-order differences down
    origin = traj.positions.mean(axis=0)
    local = Trajectory(traj.arm_id, traj.positions - origin, traj.rotations, traj.frames, traj.sample_period)
    curve = fit_and_resample(build_striction_polyline(trajectory_screws(local)), M)
    series = curve_invariants(curve)
    curve.samples = curve.samples + origin
    series.per_frame_kappa, series.per_frame_tau = invariants_per_frame(series, curve, T)
    series.screws = screws
    return series


def write_invariants_csv(path, left: InvariantSeries, right: InvariantSeries):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "kappa_left", "tau_left", "kappa_right", "tau_right"])
        for t, row in enumerate(zip(left.per_frame_kappa, left.per_frame_tau, right.per_frame_kappa, right.per_frame_tau)):
            w.writerow([t, *(repr(float(x)) for x in row)])


def write_arm_csv(path, series: InvariantSeries):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "kappa", "tau"])
        for t, (k, ta) in enumerate(zip(series.per_frame_kappa, series.per_frame_tau)):
            w.writerow([t, repr(float(k)), repr(float(ta))])


def read_invariants_csv(path):
    """Read the two-arm CSV back as a dict of column arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty invariants file")
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}
