"""One check per acceptance criterion, each reporting a PASS/FAIL line.

The lines are repeated in the terminal summary under "acceptance criteria".
"""

import csv
import time

import numpy as np
from scipy.optimize import least_squares

from motioninv.invariants import trajectory_invariants
from motioninv.metrics import edit_score, frame_accuracy, read_report
from motioninv.pose_io import Pose, Trajectory
from motioninv.quaternion import quat_distance, random_quaternions
from motioninv.recognizer import gradient_check, init_model, make_config, weighted_cross_entropy
from motioninv.recognizer.model import loss_and_grads
from motioninv.recognizer.training import random_batch
from motioninv.screw import ScrewLine, apply_screw, finite_screw, line_closest_points, trajectory_screws
from motioninv.striction import StrictionPolyline, fit_and_resample
from motioninv.invariants import curve_invariants
from motioninv.synth import gen_constant_screw_motion, gen_helix_trajectory, gen_line_trajectory

from conftest import smooth_random_trajectory


def test_helix_oracle(criterion):
    t0 = time.perf_counter()
    inv = trajectory_invariants(gen_helix_trajectory(1.0, 0.5, 2000, 0.02))
    secs = time.perf_counter() - t0
    k, t = inv.kappa[10:-10], inv.tau[10:-10]
    dk, dt = np.mean(np.abs(k - 0.8)), np.mean(np.abs(t - 0.4))
    criterion("helix oracle", dk < 0.008 and dt < 0.004 and secs < 5.0,
              f"mean|κ-0.8|={dk:.2e} mean|τ-0.4|={dt:.2e} in {secs:.2f}s")


def test_planar_and_linear_oracles(criterion):
    worst_k, worst_t = 0.0, 0.0
    for R in (0.5, 1.0, 2.0):
        inv = trajectory_invariants(gen_helix_trajectory(R, 0.0, 600, 0.02))
        worst_k = max(worst_k, np.max(np.abs(np.abs(inv.kappa[5:-5]) * R - 1.0)))
        worst_t = max(worst_t, np.max(np.abs(inv.tau)))
    line = trajectory_invariants(gen_line_trajectory([1.0, -2.0, 0.5], 300, 0.005))
    lk, lt = np.max(np.abs(line.kappa)), np.max(np.abs(line.tau))
    ok = worst_k < 0.01 and worst_t < 1e-6 and lk < 1e-9 and lt == 0.0
    criterion("planar/linear oracles", ok,
              f"circle rel κ err={worst_k:.2e} max|τ|={worst_t:.1e}; line max|κ|={lk:.1e} max|τ|={lt:g}")


def test_screw_roundtrip(criterion):
    rng = np.random.default_rng(0)
    q0, q1 = random_quaternions(rng, 1000), random_quaternions(rng, 1000)
    p0, p1 = rng.normal(size=(2, 1000, 3))
    fails, worst = 0, 0.0
    for i in range(1000):
        a, b = Pose(p0[i], q0[i]), Pose(p1[i], q1[i])
        out = apply_screw(finite_screw(a, b), a)
        err = max(np.max(np.abs(out.position - b.position)), float(quat_distance(out.rotation, b.rotation)))
        worst = max(worst, err)
        fails += err >= 1e-9
    criterion("screw roundtrip", fails == 0, f"1000 pairs, {fails} failures, worst {worst:.1e}")


def test_axis_recovery(criterion):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        c = rng.normal(size=3)
        s = rng.normal(size=3)
        s /= np.linalg.norm(s)
        tr = gen_constant_screw_motion(c, s, rng.uniform(-0.05, 0.05), rng.uniform(0.01, 0.5), 20,
                                       q0=random_quaternions(rng, 1)[0])
        for sc in trajectory_screws(tr):
            off = sc.point - c
            worst = max(worst, np.linalg.norm(np.cross(sc.direction, s)), np.linalg.norm(off - (off @ s) * s))
    criterion("axis recovery", worst < 1e-9, f"100 motions, worst line offset {worst:.1e}")


def _brute_force_distance(a, b, span=1e3, n=201):
    grid = np.linspace(-span, span, n)
    ma, mb = np.meshgrid(grid, grid, indexing="ij")
    diff = (a.point[None, None] + ma[..., None] * a.direction) - (b.point[None, None] + mb[..., None] * b.direction)
    i, j = np.unravel_index(np.argmin(np.einsum("ijk,ijk->ij", diff, diff)), ma.shape)

    def resid(m):
        return a.point + m[0] * a.direction - b.point - m[1] * b.direction

    fit = least_squares(resid, [ma[i, j], mb[i, j]], bounds=([-span, -span], [span, span]), xtol=1e-15,
                        ftol=1e-15, gtol=1e-15)
    return float(np.linalg.norm(resid(fit.x)))


def test_closest_points_vs_brute_force(criterion):
    rng = np.random.default_rng(2)
    worst, cases = 0.0, {}
    for i in range(1000):
        pa, pb = rng.uniform(-5, 5, (2, 3))
        da, db = rng.normal(size=(2, 3))
        if i % 10 == 0:
            db = da * rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2)
        elif i % 10 == 1:
            pb = pa + rng.uniform(-3, 3) * da / np.linalg.norm(da)
        a, b = ScrewLine.through(pa, da), ScrewLine.through(pb, db)
        seg = line_closest_points(a, b)
        cases[seg.case] = cases.get(seg.case, 0) + 1
        worst = max(worst, abs(seg.distance - _brute_force_distance(a, b)))
    criterion("closest points vs brute force", worst < 1e-6, f"1000 pairs {cases}, worst |Δd|={worst:.1e}")


def test_rigid_invariance_and_scale_covariance(criterion):
    rng = np.random.default_rng(3)
    rigid, scale = 0.0, 0.0
    for _ in range(50):
        tr = smooth_random_trajectory(rng, T=100)
        base = trajectory_invariants(tr)
        for _ in range(10):
            moved = trajectory_invariants(tr.transformed(random_quaternions(rng, 1)[0], rng.normal(size=3)))
            rigid = max(rigid, np.max(np.abs(moved.kappa - base.kappa)), np.max(np.abs(moved.tau - base.tau)))
        for c in (0.1, 10.0):
            sc = trajectory_invariants(Trajectory(tr.arm_id, tr.positions * c, tr.rotations, tr.frames))
            scale = max(scale, np.max(np.abs(sc.kappa * c - base.kappa)), np.max(np.abs(sc.tau * c - base.tau)))
    criterion("rigid invariance / scale covariance", rigid < 1e-6 and scale < 1e-6,
              f"50x10 transforms max dev {rigid:.1e}; scaling max dev {scale:.1e}")


def test_signed_curvature_flips(criterion):
    x = np.linspace(0.3, 4 * np.pi - 0.3, 800)
    pts = np.stack([x, np.sin(x), np.zeros_like(x)], 1)
    curve = fit_and_resample(StrictionPolyline(pts, np.zeros(len(x) - 1), np.arange(len(x)), np.arange(len(x))), 1000)
    k = curve_invariants(curve).kappa
    flips = np.flatnonzero(np.sign(k[1:]) != np.sign(k[:-1])) + 1
    xs = curve.samples[:, 0]
    offsets = [int(f - np.argmin(np.abs(xs - j * np.pi))) for j, f in zip((1, 2, 3), flips)]
    ok = len(flips) == 3 and all(abs(o) <= 2 for o in offsets)
    criterion("signed-curvature flips", ok, f"{len(flips)} flips for 3 inflections, sample offsets {offsets}")


def test_gradient_check(criterion):
    config = make_config("desk", "p,k,t", vision_dim=32, classes=("G1", "G2", "G3"))
    state = init_model(config, seed=0)
    t0 = time.perf_counter()
    worst, details = gradient_check(state, random_batch(config, B=2, seed=0), n_params=100)
    secs = time.perf_counter() - t0
    ok = worst < 1e-4 and len(details) >= 100 and secs < 60
    criterion("gradient check", ok, f"{len(details)} params, max rel err {worst:.1e} in {secs:.1f}s")


def test_toy_end_to_end(criterion, toy_eval):
    out = toy_eval["out"]
    final = []
    for path in sorted(out.glob("metrics_fold*.csv")):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        final.append((int(rows[-1]["epoch"]), float(rows[-1]["acc"])))
    _, summary = read_report(out / "report.csv")
    mean_acc = float(summary["accuracy"].split("±")[0])
    ok = (toy_eval["code"] == 0 and len(final) == 3 and all(e <= 200 and a >= 95.0 for e, a in final)
          and mean_acc >= 85.0 and toy_eval["seconds"] < 600)
    detail = ", ".join(f"{a:.1f}% @ epoch {e}" for e, a in final)
    criterion("toy end-to-end", ok, f"train acc per fold [{detail}]; LOUO accuracy {summary['accuracy']}, "
                                    f"edit {summary['edit_score']}; {toy_eval['seconds']:.0f}s")


def test_metrics_exactness(criterion):
    e = edit_score(["G1", "G3"], ["G1", "G2", "G3"])
    dil = edit_score(["G1"] * 7 + ["G3"] * 2, ["G1", "G2", "G2", "G2", "G3"]) == e
    hand = (frame_accuracy(["G1"] * 8 + ["G2"] * 2, ["G1"] * 10) == 80.0
            and frame_accuracy(["G1", "G2", "G3"], ["G1", "G2", "G3"]) == 100.0
            and frame_accuracy(["G1", "G2", "G2", "G1"], ["G1", "G1", "G2", "G2"], mask=[True, True, True, False]) == 200 / 3)
    ok = abs(e - 66.67) <= 0.01 and dil and hand
    criterion("metrics exactness", ok, f"edit={e:.4f}, dilation invariant={dil}, hand accuracy cases={hand}")


def test_loss_sanity(criterion):
    direct = weighted_cross_entropy(np.full((50, 10), 0.1), np.arange(50) % 10, np.ones(10))
    config = make_config("desk", "p,k,t", vision_dim=8, classes=tuple(f"G{i}" for i in range(1, 11)))
    state = init_model(config, seed=0, classifier_scale=0.0)
    model_loss = loss_and_grads(state, random_batch(config, B=2, seed=1))[0]
    err = max(abs(direct - np.log(10)), abs(model_loss - np.log(10)))
    criterion("loss sanity", err < 1e-9, f"uniform 10-class loss {direct:.12f} (model {model_loss:.12f}), "
                                         f"|Δ ln 10|={err:.1e}")
