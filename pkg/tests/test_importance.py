"""Tests for importance profiles: normalization, masking, synthetic families, files."""

import math

import numpy as np
import pytest

from uepopt.core.errors import DomainError, ProfileFormatError
from uepopt.core.importance import (
    ImportanceProfile,
    apply_feature_mask,
    load_profile,
    masking_importance,
    normalize,
    profile_from_masking,
    save_profile,
    synthetic_profile,
)


def test_normalize_examples():
    assert normalize([2, 1, 1]).weights == pytest.approx((0.5, 0.25, 0.25))
    assert normalize([1, 1, 1, 1]).weights == pytest.approx((0.25,) * 4)


def test_normalize_sums_to_one():
    rng = np.random.default_rng(3)
    for _ in range(50):
        raw = rng.uniform(1e-6, 1e6, size=rng.integers(1, 40))
        assert abs(math.fsum(normalize(raw).weights) - 1.0) <= 1e-12


@pytest.mark.parametrize("raw", [[1.0, 0.0], [1.0, -2.0], [], [1.0, float("nan")]])
def test_normalize_rejects(raw):
    with pytest.raises(DomainError):
        normalize(raw)


def test_profile_validation():
    with pytest.raises(DomainError):
        ImportanceProfile((0.5, 0.4))
    assert ImportanceProfile((0.5, 0.3, 0.2)).is_ordered
    assert not ImportanceProfile((0.4, 0.4, 0.2)).is_ordered


def test_ranked_breaks_ties_by_index():
    order, weights = ImportanceProfile((0.2, 0.4, 0.4)).ranked()
    assert list(order) == [1, 2, 0]
    assert list(weights) == [0.4, 0.4, 0.2]


def test_masking_importance_weighted_abs():
    alpha = np.array([3.0, 2.0, 1.0])

    def task(z):
        return float(np.sum(alpha * np.abs(z)))

    assert list(masking_importance(np.ones(3), task)) == [3.0, 2.0, 1.0]
    assert profile_from_masking(np.ones(3), task).weights == pytest.approx((0.5, 1 / 3, 1 / 6))


def test_masking_importance_constant_task():
    raw = masking_importance(np.arange(1.0, 5.0), lambda z: 4.2)
    assert np.all(raw == 0.0)
    with pytest.raises(DomainError):
        profile_from_masking(np.arange(1.0, 5.0), lambda z: 4.2)


def test_masking_importance_sum_task():
    z = np.array([0.5, 2.0, 1.5])
    assert masking_importance(z, lambda v: float(np.sum(v))) == pytest.approx(z)


def test_masking_works_on_feature_tensors():
    z = np.ones((3, 4))
    raw = masking_importance(z, lambda v: float(np.sum(v * np.arange(1, 4)[:, None])))
    assert raw == pytest.approx([4.0, 8.0, 12.0])


def test_apply_feature_mask():
    z = np.arange(6.0).reshape(3, 2)
    masked = apply_feature_mask(z, np.array([1, 0, 1]))
    assert masked.tolist() == [[0.0, 1.0], [0.0, 0.0], [4.0, 5.0]]


def test_synthetic_geometric():
    w = synthetic_profile("isfr_geometric", 4, 0.5)
    assert w.weights == pytest.approx((8 / 15, 4 / 15, 2 / 15, 1 / 15), rel=1e-12)


def test_synthetic_uniform_without_jitter():
    assert synthetic_profile("uniform_noisy", 8, 0.0).weights == pytest.approx((1 / 8,) * 8)


@pytest.mark.parametrize("seed", range(10))
def test_synthetic_wide_range_profile_is_ordered(seed):
    w = synthetic_profile("isfr_paper_like", 8, seed=seed)
    assert w.is_ordered
    assert w.weights[0] / w.weights[-1] >= 100 - 1e-9


def test_synthetic_deterministic():
    assert synthetic_profile("uniform_noisy", 6, 0.1, seed=4) == synthetic_profile(
        "uniform_noisy", 6, 0.1, seed=4
    )


@pytest.mark.parametrize(
    "kind, parameter",
    [("isfr_geometric", 1.0), ("isfr_geometric", 0.0), ("isfr_paper_like", 50.0),
     ("uniform_noisy", 0.2), ("zipf", None)],
)
def test_synthetic_rejects(kind, parameter):
    with pytest.raises(DomainError):
        synthetic_profile(kind, 4, parameter)


def test_save_load_round_trip(tmp_path):
    w = synthetic_profile("isfr_paper_like", 8, seed=2)
    path = save_profile(w, tmp_path / "w.txt")
    loaded = load_profile(path)
    assert np.allclose(loaded.weights, w.weights, rtol=0, atol=1e-12)


def test_load_plain_and_header(tmp_path):
    plain = tmp_path / "plain.txt"
    plain.write_text("2\n1\n1\n")
    assert load_profile(plain).weights == pytest.approx((0.5, 0.25, 0.25))

    csv = tmp_path / "w.csv"
    csv.write_text("weight\n3\n1\n")
    assert load_profile(csv).weights == pytest.approx((0.75, 0.25))


def test_load_errors(tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    with pytest.raises(ProfileFormatError):
        load_profile(empty)

    bad = tmp_path / "bad.txt"
    bad.write_text("1\nabc\n")
    with pytest.raises(ProfileFormatError, match=r"bad\.txt:2: not a number"):
        load_profile(bad)

    negative = tmp_path / "neg.txt"
    negative.write_text("1\n-2\n")
    with pytest.raises(ProfileFormatError, match="positive"):
        load_profile(negative)

    with pytest.raises(ProfileFormatError, match="not found"):
        load_profile(tmp_path / "missing.txt")
