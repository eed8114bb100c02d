"""Kinematics and transcript file I/O.

Kinematics files hold one frame per row of whitespace-separated reals. Each
arm contributes a tool-tip position triplet and a row-major 3x3 rotation
block; :class:`ColumnMap` says where those live. Transcript files hold one
``start end label`` segment per line with 0-based inclusive frame ranges.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParseError, ValidationError
from .quaternion import hemisphere_align, quat_to_rotmat, rotmat_to_quat


UNLABELED = "unlabeled"
DEFAULT_SAMPLE_PERIOD = 1.0 / 30.0
ARMS = ("left", "right")


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    rotation: np.ndarray  # unit quaternion [w, x, y, z]
    frame_index: int = 0


@dataclass
class Trajectory:
    """Time-ordered tool-tip poses of one arm, stored column-wise."""

    arm_id: str
    positions: np.ndarray  # (N, 3) metres
    rotations: np.ndarray  # (N, 4) unit quaternions, hemisphere aligned
    frames: np.ndarray  # (N,) strictly increasing ints
    sample_period: float = DEFAULT_SAMPLE_PERIOD
    # parsed rotation blocks, kept so serialisation reproduces the input bits
    rotmats: Optional[np.ndarray] = field(default=None, repr=False)
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.rotations = np.asarray(self.rotations, dtype=float).reshape(-1, 4)
        if self.frames is None:
            self.frames = np.arange(len(self.positions))
        self.frames = np.asarray(self.frames, dtype=np.int64)

    def __len__(self):
        return len(self.positions)

    def __getitem__(self, i) -> Pose:
        return Pose(self.positions[i], self.rotations[i], int(self.frames[i]))

    @property
    def poses(self):
        return [self[i] for i in range(len(self))]

    def validate(self):
        if self.arm_id not in ARMS:
            raise ValidationError(f"unknown arm id {self.arm_id!r}")
        n = len(self.positions)
        if self.rotations.shape != (n, 4) or self.frames.shape != (n,):
            raise ValidationError("positions, rotations and frames must have equal length")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.rotations))):
            raise ValidationError("trajectory contains NaN or Inf")
        norms = np.linalg.norm(self.rotations, axis=1)
        if n and np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValidationError("rotations are not unit quaternions")
        if n > 1 and np.any(np.diff(self.frames) <= 0):
            raise ValidationError("frame indices must be strictly increasing")
        if np.any(self.frames < 0):
            raise ValidationError("frame indices must be non-negative")
        return self

    def transformed(self, rotation_q, translation):
        """Copy with every pose pre-multiplied by a rigid transform."""
        from .quaternion import quat_mul, quat_rotate

        rotation_q = np.asarray(rotation_q, dtype=float)
        pos = quat_rotate(rotation_q, self.positions) + np.asarray(translation, dtype=float)
        rot = quat_mul(np.broadcast_to(rotation_q, self.rotations.shape), self.rotations)
        return Trajectory(self.arm_id, pos, hemisphere_align(rot), self.frames.copy(), self.sample_period)


@dataclass
class GestureTimeline:
    """Per-frame gesture labels and their run-length segments.

    Segments are ``(start, end, label)`` with ``end`` inclusive, matching the
    transcript file format.
    """

    labels: list

    def __post_init__(self):
        self.labels = [str(x) for x in self.labels]

    def __len__(self):
        return len(self.labels)

    @property
    def segments(self):
        return run_length_segments(self.labels)

    @property
    def mask(self):
        return np.array([lab != UNLABELED for lab in self.labels], dtype=bool)

    @classmethod
    def from_segments(cls, segments, total_frames):
        labels = [UNLABELED] * total_frames
        for start, end, lab in segments:
            labels[start : end + 1] = [lab] * (end - start + 1)
        return cls(labels)


def run_length_segments(labels):
    segs = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            segs.append((start, i - 1, labels[start]))
            start = i
    return segs


@dataclass(frozen=True)
class ColumnMap:
    """0-based column offsets of the tool-tip blocks in a kinematics row.

    Defaults follow the 76-column JIGSAWS layout (patient-side manipulators).
    """

    left_position: int = 38
    left_rotation: int = 41
    right_position: int = 57
    right_rotation: int = 60
    width: int = 76

    def __post_init__(self):
        blocks = [
            (self.left_position, 3),
            (self.left_rotation, 9),
            (self.right_position, 3),
            (self.right_rotation, 9),
        ]
        for start, size in blocks:
            if start < 0 or start + size > self.width:
                raise ValidationError(f"column block at {start} (size {size}) exceeds row width {self.width}")
        spans = sorted(blocks)
        for (a, sa), (b, _) in zip(spans, spans[1:]):
            if a + sa > b:
                raise ValidationError("column blocks overlap")

    def position_cols(self, arm):
        start = getattr(self, f"{arm}_position")
        return slice(start, start + 3)

    def rotation_cols(self, arm):
        start = getattr(self, f"{arm}_rotation")
        return slice(start, start + 9)

    @classmethod
    def from_file(cls, path):
        """Read ``key = value`` (or ``key: value``) lines; ``#`` starts a comment."""
        path = Path(path)
        known = {f.name for f in fields(cls)}
        values = {}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                sep = "=" if "=" in line else ":"
                if sep not in line:
                    raise ParseError("expected 'key = value'", path, lineno)
                key, val = (s.strip() for s in line.split(sep, 1))
                if key not in known:
                    raise ParseError(f"unknown column map key {key!r}", path, lineno)
                try:
                    values[key] = int(val)
                except ValueError:
                    raise ParseError(f"offset for {key!r} is not an integer: {val!r}", path, lineno) from None
        return cls(**values)

    def to_file(self, path):
        with open(path, "w") as fh:
            for f in fields(self):
                fh.write(f"{f.name} = {getattr(self, f.name)}\n")


DEFAULT_COLUMN_MAP = ColumnMap()


def _read_rows(path, width):
    path = Path(path)
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != width:
                raise ParseError(f"expected {width} columns, found {len(parts)}", path, lineno)
            try:
                row = [float(p) for p in parts]
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
            if not all(np.isfinite(row)):
                raise ParseError("non-finite value", path, lineno)
            rows.append((lineno, row))
    return rows


def parse_kinematics(path, column_map: ColumnMap = DEFAULT_COLUMN_MAP, sample_period=DEFAULT_SAMPLE_PERIOD):
    """Parse a kinematics file into ``(left, right)`` trajectories.

    Raises ParseError for malformed rows and ValidationError (with the line
    number) for rotation blocks that are not proper rotations within 1e-3.
    """
    rows = _read_rows(path, column_map.width)
    if not rows:
        raise ParseError("no data rows", path)
    linenos = [ln for ln, _ in rows]
    data = np.array([r for _, r in rows], dtype=float)
    out = []
    for arm in ARMS:
        pos = data[:, column_map.position_cols(arm)]
        mats = data[:, column_map.rotation_cols(arm)].reshape(-1, 3, 3)
        quats = np.empty((len(mats), 4))
        for i, R in enumerate(mats):
            try:
                quats[i] = rotmat_to_quat(R)
            except ValidationError as exc:
                raise ValidationError(f"{path}:{linenos[i]}: {arm} arm: {exc}") from None
        traj = Trajectory(arm, pos, hemisphere_align(quats), np.arange(len(data)), sample_period, rotmats=mats)
        out.append(traj)
    return tuple(out)


def _fmt(x):
    return repr(float(x))


def write_kinematics(path, left: Trajectory, right: Trajectory, column_map: ColumnMap = DEFAULT_COLUMN_MAP):
    """Serialise two trajectories; unmapped columns are written as zeros."""
    if len(left) != len(right):
        raise ValidationError("left and right trajectories differ in length")
    data = np.zeros((len(left), column_map.width))
    for traj in (left, right):
        mats = traj.rotmats if traj.rotmats is not None else quat_to_rotmat(traj.rotations)
        data[:, column_map.position_cols(traj.arm_id)] = traj.positions
        data[:, column_map.rotation_cols(traj.arm_id)] = np.asarray(mats).reshape(-1, 9)
    with open(path, "w") as fh:
        for row in data:
            fh.write(" ".join(_fmt(x) for x in row))
            fh.write("\n")


def parse_transcript(path, total_frames: int) -> GestureTimeline:
    path = Path(path)
    segs = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise ParseError("expected 'start end label'", path, lineno)
            try:
                start, end = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError("frame bounds must be integers", path, lineno) from None
            if start < 0 or end < start:
                raise ParseError(f"invalid range {start}..{end}", path, lineno)
            if end >= total_frames:
                raise ParseError(f"segment end {end} beyond last frame {total_frames - 1}", path, lineno)
            if segs and start <= segs[-1][1]:
                raise ParseError(f"segment {start}..{end} overlaps or precedes previous segment", path, lineno)
            segs.append((start, end, parts[2]))
    return GestureTimeline.from_segments(segs, total_frames)


def write_transcript(path, timeline: GestureTimeline):
    with open(path, "w") as fh:
        for start, end, lab in timeline.segments:
            if lab != UNLABELED:
                fh.write(f"{start} {end} {lab}\n")


def check_readable(path):
    """Raise FileNotFoundError early with a clean message."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")
