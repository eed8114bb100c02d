"""Synthetic trajectories with known invariants, and a labelled toy benchmark.

The default tool orientation spins about the direction of travel between
frames, so every finite screw lies on the chord joining two consecutive
tool-tip positions. The striction curve then follows the tool-tip path and its
curvature and torsion are known analytically (circle, helix, line).
A Frenet-frame orientation is available too; along a helix it turns the
motion into a single constant screw about the helix axis.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .features import FeatureSeries, write_vision_features
from .pose_io import DEFAULT_SAMPLE_PERIOD, GestureTimeline, Trajectory, write_kinematics, write_transcript
from .quaternion import (
    hemisphere_align,
    quat_from_axis_angle,
    quat_mul,
    quat_rotate,
    quat_to_rotmat,
    random_quaternions,
    rotmat_to_quat,
)
from .screw import THETA_MIN

DEFAULT_SPIN = 0.05  # rad per frame about the direction of travel


@dataclass
class MotionPrimitive:
    kind: str  # line | circle | helix | constant_screw
    gesture_id: str
    duration: int  # frames
    radius: float = 0.02  # m
    pitch: float = 0.0  # m/rad (helix b)
    speed: float = 0.002  # m of arc per frame
    spin: float = DEFAULT_SPIN

    def __post_init__(self):
        if self.kind not in ("line", "circle", "helix", "constant_screw"):
            raise ValidationError(f"unknown primitive kind {self.kind!r}")
        if self.kind != "line" and self.radius <= 0:
            raise ValidationError("radius must be positive for curved primitives")
        if self.kind == "circle":
            self.pitch = 0.0

    @property
    def kappa_star(self):
        if self.kind == "line":
            return 0.0
        return self.radius / (self.radius**2 + self.pitch**2)

    @property
    def tau_star(self):
        if self.kind == "line":
            return 0.0
        return self.pitch / (self.radius**2 + self.pitch**2)


def _frenet_quat(a, b, phi):
    """Frenet frame ``[t, n, b]`` of the helix at angle ``phi`` as a quaternion."""
    c = np.hypot(a, b)
    t = np.array([-a * np.sin(phi), a * np.cos(phi), b]) / c
    n = np.array([-np.cos(phi), -np.sin(phi), 0.0])
    return rotmat_to_quat(np.column_stack([t, n, np.cross(t, n)]))


def spin_orientations(positions, q0, spin):
    """Rotate by ``spin`` about each chord: the finite screws become the chord lines."""
    q = np.empty((len(positions), 4))
    q[0] = q0
    chords = np.diff(positions, axis=0)
    for k, c in enumerate(chords):
        nc = np.linalg.norm(c)
        if nc == 0 or spin == 0:
            q[k + 1] = q[k]
        else:
            q[k + 1] = quat_mul(quat_from_axis_angle(c / nc, spin), q[k])
    return hemisphere_align(q)


def gen_helix_trajectory(a, b, n, dtheta, orientation="spin", spin=DEFAULT_SPIN, arm="left",
                         sample_period=DEFAULT_SAMPLE_PERIOD) -> Trajectory:
    """Tool tip on the helix ``(a cos φ, a sin φ, b φ)`` with ``φ = k·dtheta``.

    ``orientation`` is ``"spin"`` (rotate about each chord), ``"frenet"``
    (Frenet frame of the helix) or ``"fixed"``. Analytic ``kappa_star`` and
    ``tau_star`` are stored in ``meta``.
    """
    if a <= 0:
        raise ValidationError("helix radius must be positive")
    if n < 8:
        raise ValidationError("need n >= 8 frames")
    phi = np.arange(n) * dtheta
    pos = np.stack([a * np.cos(phi), a * np.sin(phi), b * phi], axis=1)
    q0 = _frenet_quat(a, b, 0.0)
    if orientation == "spin":
        rot = spin_orientations(pos, q0, spin)
    elif orientation == "frenet":
        rot = hemisphere_align(quat_mul(quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), phi), q0))
    elif orientation == "fixed":
        rot = np.tile(q0, (n, 1))
    else:
        raise ValidationError(f"unknown orientation mode {orientation!r}")
    c2 = a * a + b * b
    meta = {"kappa_star": a / c2, "tau_star": b / c2, "kind": "helix", "orientation": orientation}
    return Trajectory(arm, pos, rot, np.arange(n), sample_period, meta=meta)


def gen_line_trajectory(direction, n, step, orientation="spin", spin=DEFAULT_SPIN, start=(0.0, 0.0, 0.0), arm="left"):
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    pos = np.asarray(start, dtype=float) + np.arange(n)[:, None] * step * d
    q0 = np.array([1.0, 0.0, 0.0, 0.0])
    rot = spin_orientations(pos, q0, spin if orientation == "spin" else 0.0)
    return Trajectory(arm, pos, rot, np.arange(n), meta={"kappa_star": 0.0, "tau_star": 0.0, "kind": "line"})


def gen_constant_screw_motion(axis_point, axis_dir, pitch, dtheta, n, start=None, q0=None, arm="left") -> Trajectory:
    """Repeated screw displacement: rotate ``dtheta`` about the axis, advance ``pitch·dtheta`` along it."""
    if dtheta < 10 * THETA_MIN:
        raise ValidationError(f"dtheta must be >= {10 * THETA_MIN:g} rad")
    c = np.asarray(axis_point, dtype=float)
    s = np.asarray(axis_dir, dtype=float)
    s = s / np.linalg.norm(s)
    if start is None:
        # unit offset perpendicular to the axis
        helper = np.array([1.0, 0.0, 0.0]) if abs(s[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        off = np.cross(s, helper)
        start = c + 0.05 * off / np.linalg.norm(off)
    start = np.asarray(start, dtype=float)
    if q0 is None:
        q0 = np.array([1.0, 0.0, 0.0, 0.0])
    ang = np.arange(n) * dtheta
    qk = quat_from_axis_angle(np.broadcast_to(s, (n, 3)), ang)
    pos = c + quat_rotate(qk, start - c) + (pitch * ang)[:, None] * s
    rot = hemisphere_align(quat_mul(qk, np.broadcast_to(q0, (n, 4))))
    meta = {"axis_point": c, "axis_dir": s, "pitch": pitch, "kind": "constant_screw"}
    return Trajectory(arm, pos, rot, np.arange(n), meta=meta)


def _primitive_path(prim: MotionPrimitive, n_steps):
    """``n_steps`` positions after a start at the origin, heading along +x."""
    k = np.arange(1, n_steps + 1)
    if prim.kind == "line":
        return np.stack([k * prim.speed, np.zeros(n_steps), np.zeros(n_steps)], axis=1)
    a, b = prim.radius, prim.pitch
    dphi = prim.speed / np.hypot(a, b)
    phi = k * dphi
    # helix rotated so its tangent at φ=0 points along +x and it starts at the origin
    local = np.stack([a * np.sin(phi), a - a * np.cos(phi), b * phi], axis=1)
    return local


def _primitive_tangent(prim: MotionPrimitive, n_steps):
    """Unit direction of travel at the end of :func:`_primitive_path`."""
    if prim.kind == "line":
        return np.array([1.0, 0.0, 0.0])
    a, b = prim.radius, prim.pitch
    phi = n_steps * prim.speed / np.hypot(a, b)
    t = np.array([a * np.cos(phi), a * np.sin(phi), b])
    return t / np.linalg.norm(t)


def _random_rotation(rng):
    return quat_to_rotmat(random_quaternions(rng, 1)[0])


def _rotation_with_heading(rng, heading):
    """Rotation taking +x to ``heading`` with a uniformly random roll about it."""
    x = heading / np.linalg.norm(heading)
    helper = np.eye(3)[np.argmin(np.abs(x))]
    y = np.cross(x, helper)
    y /= np.linalg.norm(y)
    z = np.cross(x, y)
    roll = rng.uniform(0.0, 2.0 * np.pi)
    y, z = np.cos(roll) * y + np.sin(roll) * z, -np.sin(roll) * y + np.cos(roll) * z
    return np.stack([x, y, z], axis=1)


def _arm_motion(primitives, n_steps_list, rng, scale=1.0, pos_noise=0.0, rot_noise=0.0, arm="right", smooth=True,
                workspace_tries=8):
    positions = [np.zeros(3)]
    orient = [random_quaternions(rng, 1)[0]]
    heading = None
    for prim, n_steps in zip(primitives, n_steps_list):
        if n_steps == 0:
            continue
        p = MotionPrimitive(prim.kind, prim.gesture_id, prim.duration, prim.radius * scale, prim.pitch * scale,
                            prim.speed * scale, prim.spin)
        local = _primitive_path(p, n_steps)
        if smooth and heading is not None:
            # keep the direction of travel continuous; of a few random rolls take
            # the one ending nearest the workspace centre so the tool stays bounded
            cands = [_rotation_with_heading(rng, heading) for _ in range(workspace_tries)]
            ends = [np.linalg.norm(positions[-1] + R_ @ local[-1]) for R_ in cands]
            R = cands[int(np.argmin(ends))]
        else:
            R = _random_rotation(rng)
        pts = positions[-1] + local @ R.T
        heading = R @ _primitive_tangent(p, n_steps)
        seg = np.vstack([positions[-1][None], pts])
        if prim.kind == "constant_screw":
            axis = R @ np.array([0.0, 0.0, 1.0])
            dphi = p.speed / np.hypot(p.radius, p.pitch)
            step = quat_from_axis_angle(axis, dphi)
            qs = [orient[-1]]
            for _ in range(n_steps):
                qs.append(quat_mul(step, qs[-1]))
            qs = np.array(qs)
        else:
            qs = spin_orientations(seg, orient[-1], p.spin)
        positions.extend(pts)
        orient.extend(qs[1:])
    pos = np.array(positions)
    rot = np.array(orient)
    if pos_noise > 0:
        pos = pos + rng.normal(scale=pos_noise, size=pos.shape)
    if rot_noise > 0:
        jitter = quat_from_axis_angle(rng.normal(size=(len(rot), 3)), rng.normal(scale=rot_noise, size=len(rot)))
        rot = quat_mul(jitter, rot)
    rot = hemisphere_align(rot / np.linalg.norm(rot, axis=1, keepdims=True))
    return Trajectory(arm, pos, rot, np.arange(len(pos)))


def gesture_template(gesture_id, dim, template_seed=0):
    seed = zlib.crc32(gesture_id.encode()) ^ (template_seed * 0x9E3779B1 & 0xFFFFFFFF)
    return np.random.default_rng(seed).standard_normal(dim)


def gen_labeled_sequence(primitives, seed, vision_dim=32, vision_noise=1.0, template_seed=0,
                         left_scale=1.5, pos_noise=0.0, rot_noise=0.0):
    """Concatenate primitives into a labelled two-arm trial.

    Returns ``(left, right, timeline, vision)``. Both arms run the same
    primitive sequence (the left one scaled by ``left_scale``) under independent
    random orientations; positions are continuous across primitive boundaries.
    Vision rows are the gesture's template vector plus Gaussian noise.
    """
    primitives = list(primitives)
    if len({p.gesture_id for p in primitives}) < 2:
        raise ValidationError("need >= 2 distinct gesture ids")
    rng = np.random.default_rng(seed)
    labels = [p.gesture_id for p in primitives for _ in range(p.duration)]
    T = len(labels)
    # frame 0 is the start pose; primitive i supplies the steps into its own frames
    steps = [p.duration for p in primitives]
    steps[0] -= 1
    right = _arm_motion(primitives, steps, rng, 1.0, pos_noise, rot_noise, "right")
    left = _arm_motion(primitives, steps, rng, left_scale, pos_noise, rot_noise, "left")
    templates = {g: gesture_template(g, vision_dim, template_seed) for g in sorted(set(labels))}
    vision = np.array([templates[g] for g in labels]) + vision_noise * rng.standard_normal((T, vision_dim))
    return left, right, GestureTimeline(labels), FeatureSeries(vision, [f"v{i}" for i in range(vision_dim)])


# --- toy benchmark ---------------------------------------------------------

TOY_GESTURES = {
    "G1": dict(kind="helix", radius=0.008, pitch=0.003, speed=0.0015),
    "G2": dict(kind="line", speed=0.002),
    "G3": dict(kind="circle", radius=0.03, speed=0.002),
}


@dataclass
class Trial:
    trial_id: str
    user_id: str
    left: Trajectory
    right: Trajectory
    timeline: GestureTimeline
    vision: FeatureSeries = field(repr=False)


def _durations(rng, T, k, min_len):
    extra = rng.multinomial(T - k * min_len, np.ones(k) / k)
    return list(min_len + extra)


def toy_trial_primitives(rng, n_frames=200, gestures=TOY_GESTURES, n_segments=(4, 6), min_len=25, gesture_probs=None):
    names = sorted(gestures)
    probs = None if gesture_probs is None else np.array([gesture_probs[g] for g in names], dtype=float)
    k = int(rng.integers(n_segments[0], n_segments[1] + 1))
    k = max(2, min(k, n_frames // min_len))
    seq = []
    while len(seq) < k:
        choices = [g for g in names if not seq or g != seq[-1]]
        p = None if probs is None else probs[[names.index(g) for g in choices]] / probs[[names.index(g) for g in choices]].sum()
        seq.append(str(rng.choice(choices, p=p)))
    if len(set(seq)) < 2:
        seq[-1] = next(g for g in names if g != seq[0])
    if gesture_probs is None:
        durs = _durations(rng, n_frames, k, min_len)
    else:
        # imbalanced sets: weight durations by gesture frequency as well
        w = np.array([gesture_probs[g] for g in seq], dtype=float)
        extra = rng.multinomial(n_frames - k * min_len, w / w.sum())
        durs = list(min_len + extra)
    return [MotionPrimitive(gesture_id=g, duration=int(d), **gestures[g]) for g, d in zip(seq, durs)]


def make_toy_benchmark(seed=0, n_trials=6, n_frames=200, n_users=3, vision_dim=32, vision_noise=2.0,
                       gestures=TOY_GESTURES, gesture_probs=None, pos_noise=0.0, n_segments=(4, 6), min_len=25):
    """Seeded multi-user dataset of labelled synthetic trials.

    Trial ids follow the ``<Task>_<UserLetter><NNN>`` pattern so the user can
    be recovered from the id.
    """
    rng = np.random.default_rng(seed)
    trials = []
    for i in range(n_trials):
        user = chr(ord("A") + i % n_users)
        rep = i // n_users + 1
        prims = toy_trial_primitives(rng, n_frames, gestures, n_segments, min_len, gesture_probs)
        trial_seed = int(rng.integers(2**31))
        left, right, tl, vis = gen_labeled_sequence(prims, trial_seed, vision_dim, vision_noise,
                                                    template_seed=seed, pos_noise=pos_noise)
        trials.append(Trial(f"Toy_{user}{rep:03d}", user, left, right, tl, vis))
    return trials


def write_dataset(trials, root, vision=True):
    """Lay trials out as ``kinematics/``, ``transcriptions/`` and ``vision/`` files."""
    root = Path(root)
    for sub in ("kinematics", "transcriptions") + (("vision",) if vision else ()):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for tr in trials:
        write_kinematics(root / "kinematics" / f"{tr.trial_id}.txt", tr.left, tr.right)
        write_transcript(root / "transcriptions" / f"{tr.trial_id}.txt", tr.timeline)
        if vision:
            write_vision_features(root / "vision" / f"{tr.trial_id}.csv", tr.vision.frames)
    return root
