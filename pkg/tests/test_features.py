import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from motioninv.errors import ParseError, ValidationError
from motioninv.features import (
    COMPONENT_DIMS, FeatureSet, FeatureStats, assemble_features, load_vision_features, raw_features,
    write_vision_features,
)
from motioninv.pose_io import Trajectory


def _traj(T=30, seed=0):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(T, 4))
    return Trajectory("left", rng.normal(size=(T, 3)), q / np.linalg.norm(q, axis=1)[:, None], None)


def test_dims_of_table_rows():
    assert FeatureSet.parse("p,k,t").dim_per_arm == 5
    assert FeatureSet.parse("p,q,k,t").dim_per_arm == 9
    assert FeatureSet.parse("{p, κ, τ}") == FeatureSet.parse("p,kappa,tau")
    assert FeatureSet.parse("p,q").label == "{p, q}"


def test_every_subset_dimension():
    tr = _traj()
    k = np.zeros(len(tr))
    for r in range(1, 5):
        for sel in itertools.combinations("pqkt", r):
            fs = FeatureSet(sel)
            X = raw_features(tr, k, k, fs)
            assert X.shape[1] == fs.dim_per_arm == sum(COMPONENT_DIMS[c] for c in sel)
            assert len(fs.columns()) == fs.dim_per_arm


def test_bad_selections():
    with pytest.raises(ValidationError):
        FeatureSet.parse("")
    with pytest.raises(ValidationError):
        FeatureSet.parse("p,x")


def test_constant_column_normalises_to_zero():
    tr = _traj()
    tr.positions[:, 2] = 0.25
    fs = assemble_features(tr, (np.zeros(30), np.ones(30)), FeatureSet.parse("p,k,t"))
    assert np.all(fs.frames[:, 2] == 0.0)
    assert np.all(fs.frames[:, 3:] == 0.0)
    assert np.allclose(fs.frames[:, :2].mean(0), 0) and np.allclose(fs.frames[:, :2].std(0), 1)


def test_length_mismatch():
    with pytest.raises(ValidationError):
        raw_features(_traj(), np.zeros(29), np.zeros(30), FeatureSet.parse("p,k"))


@given(st.integers(0, 2**32 - 1))
def test_normalisation_roundtrip(seed):
    rng = np.random.default_rng(seed)
    train = [rng.normal(size=(20, 5)) * rng.uniform(0.01, 100, 5) + rng.normal(size=5) for _ in range(3)]
    train[0][:, 1] = 3.0
    train[1][:, 1] = 3.0
    train[2][:, 1] = 3.0
    stats = FeatureStats.fit(train)
    X = rng.normal(size=(7, 5))
    X[:, 1] = 3.0
    assert np.max(np.abs(stats.invert(stats.apply(X)) - X)) < 1e-9


def test_vision_csv(tmp_path):
    X = np.random.default_rng(0).normal(size=(100, 128))
    write_vision_features(tmp_path / "v.csv", X)
    vs = load_vision_features(tmp_path / "v.csv", 100)
    assert vs.dim == 128 and len(vs) == 100
    assert np.allclose(vs.frames, X, rtol=1e-8)


def test_vision_binary(tmp_path):
    X = np.random.default_rng(1).normal(size=(100, 16))
    write_vision_features(tmp_path / "v.bin", X)
    vs = load_vision_features(tmp_path / "v.bin", 100)
    assert np.array_equal(vs.frames, X.astype(np.float32).astype(float))


def test_vision_row_count(tmp_path):
    write_vision_features(tmp_path / "v.csv", np.zeros((99, 4)))
    with pytest.raises(ValidationError, match="99 rows"):
        load_vision_features(tmp_path / "v.csv", 100)


def test_vision_truncated_binary(tmp_path):
    (tmp_path / "v.bin").write_bytes(np.array([10, 4], dtype="<i4").tobytes() + b"\0" * 12)
    with pytest.raises(ParseError):
        load_vision_features(tmp_path / "v.bin", 10)


def test_vision_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_vision_features(tmp_path / "nope.csv", 10)
    a = load_vision_features(tmp_path / "nope.csv", 10, synthetic=True, dim=8, seed=5)
    b = load_vision_features(tmp_path / "nope.csv", 10, synthetic=True, dim=8, seed=5)
    assert a.frames.shape == (10, 8) and np.array_equal(a.frames, b.frames)
