"""Screws of finite motion and closest points between lines.

A finite rigid displacement between two poses is a rotation by ``angle``
about a line plus a translation ``translation`` along that same line. The line
is stored in Plücker form (unit direction, moment = point × direction).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

from .pose_io import Pose, Trajectory
from .quaternion import quat_conj, quat_from_axis_angle, quat_mul, quat_rotate

THETA_MIN = 1e-6  # rad, below this a displacement counts as non-rotating
D_MIN = 1e-9  # m
EPS_ROT = 1e-12  # vector-part norm below which the rotation axis is undefined
EPS_PAR = 1e-10
INTERSECT_TOL = 1e-9

GENERAL = "general"
PURE_TRANSLATION = "pure_translation"
IDENTITY = "identity"


@dataclass(frozen=True)
class ScrewLine:
    direction: np.ndarray
    point: np.ndarray
    angle: float
    translation: float = 0.0
    kind: str = GENERAL
    frame_index: int = 0  # frame reached at the end of the displacement

    @property
    def moment(self):
        return np.cross(self.point, self.direction)

    @property
    def plucker(self):
        return np.concatenate([self.direction, self.moment])

    @classmethod
    def through(cls, point, direction, angle=0.0, kind=GENERAL, frame_index=0):
        """Line through ``point`` along ``direction``; ``point`` is kept as given."""
        d = np.asarray(direction, dtype=float)
        return cls(d / np.linalg.norm(d), np.asarray(point, dtype=float), angle, 0.0, kind, frame_index)


@dataclass(frozen=True)
class NormalSegment:
    p_a: np.ndarray
    p_b: np.ndarray
    distance: float
    case: str  # parallel | skew | intersecting


def relative_rotation(q_t, q_t1):
    """Displacement quaternion ``q_t1 ⊛ q_t*``, its unit axis and angle.

    The displacement is taken in the hemisphere ``w >= 0`` so the angle lies
    in ``[0, π]``. The axis is ``None`` when the rotation is numerically the
    identity.
    """
    dq = quat_mul(q_t1, quat_conj(q_t))
    if dq[0] < 0:
        dq = -dq
    v = dq[1:]
    nv = np.linalg.norm(v)
    # same value as 2*arccos(w) but accurate for small angles
    theta = 2.0 * np.arctan2(nv, dq[0])
    axis = v / nv if nv >= EPS_ROT else None
    return dq, axis, float(theta)


def finite_screw(pose_t: Pose, pose_t1: Pose) -> ScrewLine:
    return _screws(
        np.asarray(pose_t.position)[None],
        np.asarray(pose_t1.position)[None],
        np.asarray(pose_t.rotation)[None],
        np.asarray(pose_t1.rotation)[None],
        np.array([pose_t1.frame_index]),
    )[0]


def _screws(p0, p1, q0, q1, frames):
    """Vectorised screw extraction for pose pairs ``(p0[i], q0[i]) -> (p1[i], q1[i])``."""
    dq = quat_mul(q1, quat_conj(q0))
    dq = np.where(dq[:, :1] < 0, -dq, dq)
    v = dq[:, 1:]
    nv = np.linalg.norm(v, axis=1)
    theta = 2.0 * np.arctan2(nv, dq[:, 0])
    d = p1 - p0
    nd = np.linalg.norm(d, axis=1)

    out = []
    for i in range(len(p0)):
        if theta[i] < THETA_MIN or nv[i] < EPS_ROT:
            if nd[i] < D_MIN:
                out.append(ScrewLine(np.array([0.0, 0.0, 1.0]), p0[i].copy(), float(theta[i]), 0.0, IDENTITY, int(frames[i])))
            else:
                out.append(ScrewLine(d[i] / nd[i], p0[i].copy(), float(theta[i]), float(nd[i]), PURE_TRANSLATION, int(frames[i])))
            continue
        s = v[i] / nv[i]
        along = float(d[i] @ s)
        d_perp = d[i] - along * s
        n_perp = np.linalg.norm(d_perp)
        # midpoint of p(t) and p_i = p(t) + d_perp
        s0 = p0[i] + 0.5 * d_perp
        if n_perp >= D_MIN:
            # n_perp / (2 tan(θ/2)) along ŝ × d̂_perp; vanishes smoothly as θ → π
            s0 = s0 + (n_perp / (2.0 * np.tan(0.5 * theta[i]))) * np.cross(s, d_perp / n_perp)
        out.append(ScrewLine(s, s0, float(theta[i]), along, GENERAL, int(frames[i])))
    return out


def trajectory_screws(traj: Trajectory):
    """Screws between every pair of consecutive poses of a trajectory."""
    if len(traj) < 2:
        raise ValidationError("need >= 2 poses to extract screws")
    return _screws(
        traj.positions[:-1],
        traj.positions[1:],
        traj.rotations[:-1],
        traj.rotations[1:],
        traj.frames[1:],
    )


def usable_count(screws):
    return sum(1 for s in screws if s.kind != IDENTITY)


def apply_screw(screw: ScrewLine, pose: Pose) -> Pose:
    """Displace ``pose`` by rotating about the screw line and sliding along it."""
    if screw.kind == PURE_TRANSLATION:
        pos = np.asarray(pose.position) + screw.translation * screw.direction
        return Pose(pos, np.asarray(pose.rotation), pose.frame_index)
    if screw.kind == IDENTITY:
        return pose
    q = quat_from_axis_angle(screw.direction, screw.angle)
    rel = np.asarray(pose.position) - screw.point
    pos = screw.point + quat_rotate(q, rel) + screw.translation * screw.direction
    return Pose(pos, quat_mul(q, pose.rotation), pose.frame_index)


def line_closest_points(a: ScrewLine, b: ScrewLine, eps_par=EPS_PAR) -> NormalSegment:
    """Closest points between two lines: ``p_a`` on ``a``, ``p_b`` on ``b``.

    Parallel lines (``|‖ŝa‖²‖ŝb‖² − (ŝa·ŝb)²| < eps_par``) have no unique
    pair; ``a``'s reference point and its projection onto ``b`` are returned.
    """
    sa, sb = a.direction, b.direction
    pa0, pb0 = a.point, b.point
    aa = sa @ sa
    bb = sb @ sb
    ab = sa @ sb
    denom = aa * bb - ab * ab
    if abs(denom) < eps_par:
        proj = pb0 + ((pa0 - pb0) @ sb) / bb * sb
        dist = float(np.linalg.norm(pa0 - proj))
        return NormalSegment(pa0.copy(), proj, dist, "parallel")
    # offset taken from b's reference point towards a's
    r = pa0 - pb0
    ra = r @ sa
    rb = r @ sb
    # written symmetrically in (a, b) so swapping the arguments swaps the
    # results bit for bit
    mu_a = (rb * ab - ra * bb) / denom
    mu_b = (rb * aa - ra * ab) / denom
    p_a = pa0 + mu_a * sa
    p_b = pb0 + mu_b * sb
    dist = float(np.linalg.norm(p_b - p_a))
    case = "intersecting" if dist <= INTERSECT_TOL else "skew"
    return NormalSegment(p_a, p_b, dist, case)


def write_screws_csv(path, screws):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sx", "sy", "sz", "s0x", "s0y", "s0z", "theta", "kind"])
        for s in screws:
            w.writerow([s.frame_index, *(repr(float(x)) for x in s.direction), *(repr(float(x)) for x in s.point), repr(s.angle), s.kind])
