import numpy as np
import pytest
from hypothesis import given, strategies as st

from motioninv.errors import ValidationError
from motioninv.metrics import (
    TrialScore, edit_score, frame_accuracy, levenshtein, louo_splits, read_report, user_of, write_report,
)
from motioninv.pose_io import UNLABELED, GestureTimeline

labels = st.lists(st.sampled_from(["G1", "G2", "G3", "G4"]), min_size=1, max_size=30)


def test_accuracy_identical():
    assert frame_accuracy(["G1", "G2", "G2"], ["G1", "G2", "G2"]) == 100.0


def test_accuracy_eight_of_ten():
    gt = ["G1"] * 10
    assert frame_accuracy(["G1"] * 8 + ["G2"] * 2, gt) == 80.0


def test_accuracy_masks_unlabeled_frames():
    gt = GestureTimeline([UNLABELED, UNLABELED, "G1", "G1"])
    assert frame_accuracy(GestureTimeline(["G9", "G9", "G1", "G2"]), gt) == 50.0


def test_accuracy_empty_mask():
    with pytest.raises(ValidationError):
        frame_accuracy(["G1"], ["G1"], mask=[False])
    with pytest.raises(ValidationError):
        frame_accuracy(["G1"], ["G1", "G2"])


def test_edit_examples():
    assert edit_score(["G1", "G2", "G3"], ["G1", "G2", "G3"]) == 100.0
    assert edit_score(["G1", "G3"], ["G1", "G2", "G3"]) == pytest.approx(66.67, abs=0.01)
    assert edit_score(["G4", "G5", "G6"], ["G1", "G2", "G3"]) == 0.0
    assert levenshtein("kitten", "sitting") == 3


@given(labels, labels)
def test_edit_symmetric_and_bounded(a, b):
    assert edit_score(a, b) == edit_score(b, a)
    assert 0.0 <= edit_score(a, b) <= 100.0


@given(labels, labels, st.integers(1, 5))
def test_edit_ignores_durations(a, b, k):
    assert edit_score([x for x in a for _ in range(k)], b) == edit_score(a, b)


@given(labels)
def test_accuracy_self(a):
    assert frame_accuracy(a, a) == 100.0


@given(labels, st.randoms(use_true_random=False))
def test_accuracy_bounded(a, r):
    b = list(a)
    r.shuffle(b)
    assert 0.0 <= frame_accuracy(b, a) <= 100.0


def test_user_ids():
    assert user_of("Suturing_B003") == "B"
    assert user_of("Knot_Tying_AB012") == "AB"
    with pytest.raises(ValidationError):
        user_of("trial7")


def test_louo_eight_users():
    trials = [(f"T_{u}{i:03d}", u) for u in "ABCDEFGH" for i in range(1, 6)]
    plan = louo_splits(trials)
    assert len(plan) == 8
    for user, train, val in plan:
        assert len(val) == 5 and len(train) == 35
        assert all(t.split("_")[1][0] == user for t in val)
        assert not set(train) & set(val)


def test_louo_two_users_minimum():
    assert len(louo_splits([("x_A1", "A"), ("x_B1", "B")])) == 2
    with pytest.raises(ValidationError):
        louo_splits([("x_A1", "A"), ("x_A2", "A")])


def test_louo_user_without_trials():
    with pytest.warns(UserWarning, match="no trials"):
        plan = louo_splits([("x_A1", "A"), ("x_B1", "B")], users=["A", "B", "C"])
    assert [u for u, _, _ in plan] == ["A", "B"]


def test_report_format(tmp_path):
    scores = [TrialScore("A", "x_A1", 90.0, 80.0), TrialScore("B", "x_B1", 80.0, 70.0)]
    (am, asd), _ = write_report(tmp_path / "r.csv", scores, "{p, q}")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "# features {p, q}"
    assert lines[1] == "fold,trial,accuracy,edit_score"
    assert lines[-1] == "mean,,85.0 ± 5.0,75.0 ± 5.0"
    rows, summary = read_report(tmp_path / "r.csv")
    assert len(rows) == 2 and summary["accuracy"] == "85.0 ± 5.0"
    assert (am, asd) == (85.0, 5.0)
