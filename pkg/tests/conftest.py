from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from motioninv.pose_io import Trajectory
from motioninv.quaternion import hemisphere_align, quat_from_axis_angle, quat_mul, random_quaternions
from motioninv.synth import make_toy_benchmark, write_dataset

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def smooth_random_trajectory(rng, T=100, scale=1.0, harmonics=3, turn=0.05, arm="left"):
    """Band-limited random tool path with a smoothly varying angular velocity.

    Positions are a sum of ``harmonics`` random sinusoids (amplitude
    ``scale / k``); the orientation integrates a random rotation rate whose
    mean magnitude is ``turn`` rad per frame.
    """
    t = np.linspace(0.0, 1.0, T)[:, None]
    pos = np.zeros((T, 3))
    omega = np.zeros((T, 3))
    for k in range(1, harmonics + 1):
        pos += rng.normal(size=3) * scale / k * np.sin(2 * np.pi * k * t + rng.uniform(0, 2 * np.pi, 3))
        omega += rng.normal(size=3) / k * np.sin(2 * np.pi * k * t + rng.uniform(0, 2 * np.pi, 3))
    omega *= turn / np.linalg.norm(omega, axis=1).mean()
    q = [random_quaternions(rng, 1)[0]]
    for w in omega[:-1]:
        q.append(quat_mul(quat_from_axis_angle(w, np.linalg.norm(w)), q[-1]))
    return Trajectory(arm, pos, hemisphere_align(np.array(q)), np.arange(T))


@pytest.fixture(scope="session")
def toy_trials():
    return make_toy_benchmark(seed=0)


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory, toy_trials):
    return write_dataset(toy_trials, tmp_path_factory.mktemp("toy"))


@pytest.fixture(scope="session")
def toy_eval(tmp_path_factory, toy_dataset):
    """One full ``eval`` run on the toy dataset, shared by the tests that read its outputs."""
    import time

    from motioninv.cli import main

    out = tmp_path_factory.mktemp("toy_eval")
    t0 = time.perf_counter()
    code = main(["eval", str(toy_dataset), "--features", "p,k,t", "--profile", "desk", "--seed", "0",
                 "--out", str(out)])
    return {"code": code, "out": out, "seconds": time.perf_counter() - t0}


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance line, print it, and fail the test if the check did not pass."""

    def record(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
