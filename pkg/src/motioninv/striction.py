"""Striction curve of a sequence of screw axes.

Consecutive screw lines are joined by their common normals. Each screw gets
one representative point on its line, the points are interpolated by a
chord-length cubic spline, and the spline is resampled at equal arc-length
steps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline, make_interp_spline

from .errors import ValidationError
from .screw import IDENTITY, ScrewLine, line_closest_points

MIN_SAMPLES = 7
COINCIDENT_TOL = 1e-12
ARC_RTOL = 1e-12

# Gauss-Legendre nodes/weights on [-1, 1]
_GL5_X, _GL5_W = np.polynomial.legendre.leggauss(5)
_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)


@dataclass
class StrictionPolyline:
    points: np.ndarray  # (N, 3)
    gap_lengths: np.ndarray  # (N-1,) common-normal lengths
    source_index: np.ndarray  # (N,) index into the screw list
    frames: np.ndarray  # (N,) frame index of each source screw

    @property
    def gap_sum(self):
        return float(np.sum(self.gap_lengths))


@dataclass
class StrictionCurve:
    samples: np.ndarray  # (M, 3)
    ds: float
    total_length: float
    time_anchor: np.ndarray  # (M,) frame index per sample
    gap_sum: float = 0.0  # Σ common-normal lengths, kept for reference
    degenerate: bool = False
    spline: Optional[object] = field(default=None, repr=False)
    sample_params: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return len(self.samples)


def usable_screws(screws):
    return [s for s in screws if s.kind != IDENTITY]


def build_striction_polyline(screws: list[ScrewLine]) -> StrictionPolyline:
    """One point per screw from the common normals with its neighbours.

    Interior screws take the mean of their two closest points (one per
    neighbouring normal); the first and last screw take their single one.
    """
    idx = [i for i, s in enumerate(screws) if s.kind != IDENTITY]
    if len(idx) < 2:
        raise ValidationError(f"need >= 2 non-identity screws, got {len(idx)}")
    lines = [screws[i] for i in idx]
    segs = [line_closest_points(a, b) for a, b in zip(lines, lines[1:])]
    n = len(lines)
    pts = np.empty((n, 3))
    pts[0] = segs[0].p_a
    pts[-1] = segs[-1].p_b
    for k in range(1, n - 1):
        pts[k] = 0.5 * (segs[k - 1].p_b + segs[k].p_a)
    return StrictionPolyline(
        points=pts,
        gap_lengths=np.array([s.distance for s in segs]),
        source_index=np.array(idx),
        frames=np.array([s.frame_index for s in lines], dtype=np.int64),
    )


def _fit(u, pts):
    if len(u) >= 4:
        return CubicSpline(u, pts, axis=0, bc_type="natural")
    return make_interp_spline(u, pts, k=len(u) - 1, axis=0)


def _gl(speed, lo, hi, x, w):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    vals = speed(nodes.ravel()).reshape(nodes.shape)
    return half * (vals @ w)


def arc_length_partition(speed, knots, rtol=ARC_RTOL, max_depth=40):
    """Adaptive Gauss-Legendre integration of ``speed`` over the knot intervals.

    Returns boundaries ``B`` (a refinement of ``knots``) and the arc length of
    each sub-interval. An interval is accepted once its 5-point estimate and the
    sum over its two halves agree to ``rtol``.
    """
    lo = knots[:-1].astype(float)
    hi = knots[1:].astype(float)
    acc_lo, acc_len = [], []
    for _ in range(max_depth):
        if len(lo) == 0:
            break
        mid = 0.5 * (lo + hi)
        whole = _gl(speed, lo, hi, _GL5_X, _GL5_W)
        left = _gl(speed, lo, mid, _GL5_X, _GL5_W)
        right = _gl(speed, mid, hi, _GL5_X, _GL5_W)
        halves = left + right
        ok = np.abs(whole - halves) <= rtol * np.maximum(np.abs(halves), 1e-300)
        acc_lo.extend([lo[ok], mid[ok]])
        acc_len.extend([left[ok], right[ok]])
        lo, hi = np.concatenate([lo[~ok], mid[~ok]]), np.concatenate([mid[~ok], hi[~ok]])
    if len(lo):
        # depth exhausted: keep the best estimate
        acc_lo.append(lo)
        acc_len.append(_gl(speed, lo, hi, _GL8_X, _GL8_W))
    starts = np.concatenate(acc_lo)
    lens = np.concatenate(acc_len)
    order = np.argsort(starts, kind="stable")
    bounds = np.append(starts[order], knots[-1])
    return bounds, lens[order]


def _invert_arc_length(speed, bounds, cum, targets, iters=12):
    """Parameter values at which the arc length reaches ``targets``."""
    j = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(bounds) - 2)
    a = bounds[j]
    b = bounds[j + 1]
    rem = targets - cum[j]
    seg = cum[j + 1] - cum[j]
    frac = np.where(seg > 0, rem / np.where(seg > 0, seg, 1.0), 0.0)
    u = a + frac * (b - a)
    for _ in range(iters):
        f = _gl(speed, a, u, _GL8_X, _GL8_W) - rem
        sp = speed(u)
        step = np.where(sp > 0, f / np.where(sp > 0, sp, 1.0), 0.0)
        u = np.clip(u - step, a, b)
        if np.max(np.abs(step), initial=0.0) < 1e-15 * max(1.0, float(bounds[-1])):
            break
    return u


def fit_and_resample(poly: StrictionPolyline, M: Optional[int] = None) -> StrictionCurve:
    """Fit a chord-length natural cubic spline and resample it uniformly in arc length.

    ``M`` defaults to the number of polyline points (at least 7). Fewer than
    four distinct points fall back to a quadratic or linear interpolant.
    """
    pts = np.asarray(poly.points, dtype=float)
    frames = np.asarray(poly.frames)
    if M is None:
        M = len(pts)
    M = max(int(M), MIN_SAMPLES)

    # merge consecutive coincident points (keeps the first one's frame)
    keep = [0]
    for i in range(1, len(pts)):
        if np.linalg.norm(pts[i] - pts[keep[-1]]) > COINCIDENT_TOL:
            keep.append(i)
    pts_k = pts[keep]
    frames_k = frames[keep]
    chords = np.linalg.norm(np.diff(pts_k, axis=0), axis=1)
    total_chord = float(np.sum(chords))

    if len(pts_k) < 2 or total_chord < COINCIDENT_TOL:
        samples = np.repeat(pts[:1], M, axis=0)
        return StrictionCurve(samples, 0.0, 0.0, np.full(M, frames[0]), poly.gap_sum, degenerate=True)

    u = np.concatenate([[0.0], np.cumsum(chords)])
    spline = _fit(u, pts_k)
    deriv = spline.derivative()

    def speed(x):
        return np.linalg.norm(deriv(x), axis=-1)

    bounds, lens = arc_length_partition(speed, u)
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    total = float(cum[-1])
    targets = np.linspace(0.0, total, M)
    params = _invert_arc_length(speed, bounds, cum, targets)
    params[0], params[-1] = u[0], u[-1]
    samples = spline(params)

    knot_s = cum[np.searchsorted(bounds, u)]
    # nearest knot in arc length, ties to the earlier one
    j = np.clip(np.searchsorted(knot_s, targets), 1, len(knot_s) - 1)
    nearer_prev = (targets - knot_s[j - 1]) <= (knot_s[j] - targets)
    nearest = np.where(nearer_prev, j - 1, j)
    anchors = frames_k[nearest]

    return StrictionCurve(
        samples=samples,
        ds=total / (M - 1),
        total_length=total,
        time_anchor=anchors.astype(np.int64),
        gap_sum=poly.gap_sum,
        spline=spline,
        sample_params=params,
    )


def striction_curve(screws, M=None) -> StrictionCurve:
    return fit_and_resample(build_striction_polyline(screws), M)


def write_striction_csv(path, curve: StrictionCurve):
    s = np.arange(len(curve)) * curve.ds
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "s", "x", "y", "z", "time_anchor"])
        for k, (sk, p, a) in enumerate(zip(s, curve.samples, curve.time_anchor)):
            w.writerow([k, repr(float(sk)), *(repr(float(x)) for x in p), int(a)])
