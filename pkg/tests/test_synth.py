import numpy as np
import pytest

from motioninv.errors import ValidationError
from motioninv.invariants import trajectory_invariants
from motioninv.pipeline import load_dataset
from motioninv.quaternion import quat_distance
from motioninv.screw import GENERAL, trajectory_screws
from motioninv.synth import (
    MotionPrimitive, gen_constant_screw_motion, gen_helix_trajectory, gen_labeled_sequence, gen_line_trajectory,
    make_toy_benchmark, write_dataset,
)


@pytest.mark.parametrize("a,b,k,t", [(1, 0, 1, 0), (1, 0.5, 0.8, 0.4), (2, 0, 0.5, 0)])
def test_helix_metadata(a, b, k, t):
    tr = gen_helix_trajectory(a, b, 50, 0.02)
    assert tr.meta["kappa_star"] == pytest.approx(k)
    assert tr.meta["tau_star"] == pytest.approx(t)
    tr.validate()


def test_helix_positions_exact():
    tr = gen_helix_trajectory(1.0, 0.5, 100, 0.03)
    phi = np.arange(100) * 0.03
    assert np.allclose(tr.positions, np.stack([np.cos(phi), np.sin(phi), 0.5 * phi], 1))


def test_bad_helix():
    with pytest.raises(ValidationError):
        gen_helix_trajectory(0.0, 1.0, 50, 0.02)
    with pytest.raises(ValidationError):
        gen_helix_trajectory(1.0, 1.0, 50, 0.02, orientation="sideways")


@pytest.mark.parametrize("a,b,dtheta", [(1.0, 0.5, 0.02), (1.0, 0.0, 0.05), (0.5, 0.2, 0.05)])
def test_pipeline_matches_metadata(a, b, dtheta):
    tr = gen_helix_trajectory(a, b, 400, dtheta)
    inv = trajectory_invariants(tr)
    k = np.abs(inv.kappa[5:-5]).mean()
    t = inv.tau[5:-5].mean()
    assert abs(k - tr.meta["kappa_star"]) < 0.01 * tr.meta["kappa_star"]
    assert abs(t - tr.meta["tau_star"]) <= 0.01 * max(tr.meta["tau_star"], 1e-4)


def test_line_metadata():
    inv = trajectory_invariants(gen_line_trajectory([0, 1, 0], 100, 0.02))
    assert np.max(np.abs(inv.kappa)) < 1e-9


def test_constant_screw_about_z():
    tr = gen_constant_screw_motion([0, 0, 0], [0, 0, 1], 0.0, 0.1, 50)
    screws = trajectory_screws(tr)
    assert len(screws) == 49
    for s in screws:
        assert s.kind == GENERAL
        assert np.allclose(np.abs(s.direction), [0, 0, 1], atol=1e-12)
        assert np.linalg.norm(s.point[:2]) < 1e-9


def test_constant_screw_pitch():
    screws = trajectory_screws(gen_constant_screw_motion([1, 0, 0], [0, 1, 0], 0.02, 0.1, 10))
    for s in screws:
        assert s.translation * np.sign(s.direction[1]) == pytest.approx(0.002, abs=1e-12)


def test_constant_screw_rejects_tiny_step():
    with pytest.raises(ValidationError):
        gen_constant_screw_motion([0, 0, 0], [0, 0, 1], 0.0, 1e-6, 10)


def test_labeled_sequence_structure():
    prims = [MotionPrimitive("helix", "G1", 100, radius=0.01, pitch=0.003),
             MotionPrimitive("line", "G2", 100)]
    left, right, tl, vis = gen_labeled_sequence(prims, seed=3)
    assert len(left) == len(right) == len(tl) == len(vis) == 200
    assert [g for _, _, g in tl.segments] == ["G1", "G2"]
    left.validate()
    right.validate()
    again = gen_labeled_sequence(prims, seed=3)
    assert np.array_equal(again[0].positions, left.positions)
    assert np.array_equal(again[1].rotations, right.rotations)
    assert np.array_equal(again[3].frames, vis.frames)


def test_labeled_sequence_needs_two_gestures():
    with pytest.raises(ValidationError):
        gen_labeled_sequence([MotionPrimitive("line", "G1", 50), MotionPrimitive("circle", "G1", 50)], seed=0)


def test_toy_benchmark_shape(toy_trials):
    assert len(toy_trials) == 6
    assert sorted({t.user_id for t in toy_trials}) == ["A", "B", "C"]
    for t in toy_trials:
        assert len(t.left) == 200
        assert {g for g in t.timeline.labels} <= {"G1", "G2", "G3"}
        t.left.validate()
        t.right.validate()
    again = make_toy_benchmark(seed=0)
    assert all(np.array_equal(a.left.positions, b.left.positions) for a, b in zip(toy_trials, again))


def test_dataset_roundtrip(tmp_path, toy_trials):
    write_dataset(toy_trials[:3], tmp_path)
    back = load_dataset(tmp_path)
    assert [t.trial_id for t in back] == [t.trial_id for t in toy_trials[:3]]
    for a, b in zip(back, toy_trials):
        assert np.array_equal(a.left.positions, b.left.positions)
        assert np.max(quat_distance(a.right.rotations, b.right.rotations)) < 1e-12
        assert a.timeline.labels == b.timeline.labels
        assert a.vision.frames.shape == b.vision.frames.shape
