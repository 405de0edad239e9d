"""Tests for the synthetic surface families and the mis-ranking loss."""

from __future__ import annotations

import math

import numpy as np
import pytest

from surfrank.surfaces import (
    Box,
    DomainError,
    EvalGrid,
    SurfaceSet,
    hartmann6,
    make_1d_example,
    make_2d_example,
    make_10d_example,
    ranking_loss,
)


def bisect(f, lo, hi, tol=1e-12):
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if flo * f(mid) <= 0:
            hi = mid
        else:
            lo, flo = mid, f(mid)
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@pytest.fixture(scope="module")
def one_d():
    return make_1d_example()


@pytest.fixture(scope="module")
def two_d():
    return make_2d_example()


@pytest.fixture(scope="module")
def boundaries(one_d):
    f = lambda x: one_d.value(1, np.array([x])) - 0.5
    return bisect(f, 0.25, 0.40), bisect(f, 0.85, 0.99)


# -- evaluation ---------------------------------------------------------------


def test_1d_second_surface_is_constant_half(one_d):
    for x in (0.0, 0.37, 1.0):
        assert one_d.value(2, np.array([x])) == 0.5


def test_1d_first_surface_at_zero(one_d):
    assert one_d.value(1, np.array([0.0])) == pytest.approx(0.525625, abs=1e-12)


def test_2d_surface_values(two_d):
    assert two_d.value(1, np.array([0.0, 0.0])) == pytest.approx(2.0)
    # third surface is constant in x2 along x1 = 0
    for x2 in (-2.0, 0.0, 1.5):
        assert two_d.value(3, np.array([0.0, x2])) == pytest.approx(2.0)


def test_10d_styblinski_tang_minimum():
    sset = make_10d_example()
    x = np.full(10, -2.903534 / 5.0)
    assert sset.value(2, x) == pytest.approx(-39.16616570377, abs=1e-6)


def test_10d_hartmann_embedding_minimum():
    sset = make_10d_example()
    ustar = np.array([0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573])
    assert hartmann6(ustar)[0] == pytest.approx(-3.32237, abs=5e-5)
    x = np.concatenate([2 * ustar - 1, np.zeros(4)])
    assert sset.value(1, x) == pytest.approx(hartmann6(ustar)[0], abs=1e-12)


def test_out_of_range_index_and_domain(one_d):
    with pytest.raises(DomainError):
        one_d.value(3, np.array([0.5]))
    with pytest.raises(DomainError):
        one_d.value(1, np.array([1.5]))
    with pytest.raises(DomainError):
        one_d.true_label(np.array([-0.2]))


# -- sampling -----------------------------------------------------------------


def test_zero_noise_sampling_is_exact():
    sset = make_10d_example()  # zero noise by default
    rng = np.random.default_rng(0)
    x = np.zeros(10)
    assert sset.sample(1, x, rng) == sset.value(1, x)


def test_sample_mean_matches_surface(one_d):
    rng = np.random.default_rng(42)
    n = 100_000
    x = np.full((n, 1), 0.2)
    draws = one_d.sample(1, x, rng)
    mu = one_d.value(1, np.array([0.2]))
    assert abs(draws.mean() - mu) < 3 * 0.2 / math.sqrt(n)


def test_sample_standard_deviation(one_d):
    rng = np.random.default_rng(7)
    draws = one_d.sample(1, np.full((100_000, 1), 0.4), rng)
    assert draws.std() == pytest.approx(0.2, abs=0.005)


def test_sampling_reproducible(one_d):
    a = one_d.sample(1, np.full((5, 1), 0.3), np.random.default_rng(9))
    b = one_d.sample(1, np.full((5, 1), 0.3), np.random.default_rng(9))
    assert np.array_equal(a, b)


# -- classification -----------------------------------------------------------


def test_true_classifier_1d(one_d):
    assert one_d.true_label(np.array([0.5])) == 1
    assert one_d.true_label(np.array([0.1])) == 2


def test_true_classifier_2d(two_d):
    assert two_d.true_label(np.array([0.0, 0.0])) == 5
    assert two_d.true_label(np.array([1.5, 0.0])) == 2


def test_boundary_recovery(boundaries):
    r1, r2 = boundaries
    assert round(r1, 4) == 0.3193
    assert round(r2, 4) == 0.9279


def test_shift_invariance_of_argmin(two_d):
    rng = np.random.default_rng(3)
    pts = rng.uniform(-2, 2, size=(500, 2))
    base = two_d.true_label(pts)
    for c in (-11.0, 0.5, 4e3):
        shifted = SurfaceSet(
            domain=two_d.domain,
            surfaces=tuple(
                (lambda f: lambda p, _f=f: _f(p) + c)(f) for f in two_d.surfaces
            ),
            noise_sd=two_d.noise_sd,
        )
        assert np.array_equal(shifted.true_label(pts), base)


def test_tie_break_smallest_index():
    flat = SurfaceSet(
        domain=Box((0.0,), (1.0,)),
        surfaces=(
            lambda p: np.zeros(len(p)),
            lambda p: np.zeros(len(p)),
            lambda p: np.full(len(p), -1.0) * (p[:, 0] > 0.5),
        ),
        noise_sd=(0.0, 0.0, 0.0),
    )
    assert flat.true_label(np.array([0.2])) == 1
    assert flat.true_label(np.array([0.8])) == 3


def test_zero_noise_labels_collapse_to_truth(two_d):
    quiet = SurfaceSet(
        domain=two_d.domain, surfaces=two_d.surfaces, noise_sd=(0.0,) * 5
    )
    rng = np.random.default_rng(11)
    pts = rng.uniform(-2, 2, size=(10_000, 2))
    assert np.array_equal(
        quiet.noisy_label(pts, np.random.default_rng(1)), quiet.true_label(pts)
    )


def test_mislabel_rate_far_from_boundary(one_d):
    # analytic flip probability for two surfaces under Gaussian noise
    x = 0.6
    gap = abs(one_d.value(1, np.array([x])) - 0.5)
    expected = norm_cdf(-gap / math.sqrt(0.2**2 + 0.1**2))
    rng = np.random.default_rng(5)
    pts = np.full((10_000, 1), x)
    rate = np.mean(one_d.noisy_label(pts, rng) != one_d.true_label(pts))
    spread = 3 * math.sqrt(expected * (1 - expected) / 10_000)
    assert abs(rate - expected) < spread


def test_mislabel_rate_at_boundary(one_d, boundaries):
    r1, _ = boundaries
    rng = np.random.default_rng(6)
    pts = np.full((10_000, 1), r1)
    rate = np.mean(one_d.noisy_label(pts, rng) != one_d.true_label(pts))
    assert rate == pytest.approx(0.5, abs=0.02)


# -- loss ---------------------------------------------------------------------


def test_ranking_loss_trivial_cases():
    grid = EvalGrid(points=np.linspace(0, 1, 11)[:, None])
    labels = np.ones(11, dtype=int)
    assert ranking_loss(labels, labels, grid) == 0.0
    assert ranking_loss(labels, 3 - labels, grid) == 1.0


def test_ranking_loss_measures_mismatch_set(one_d, boundaries):
    r1, _ = boundaries
    grid = EvalGrid(points=np.linspace(0, 1, 1001)[:, None])
    truth = np.asarray(one_d.true_label(grid.points))
    predicted = truth.copy()
    wrong = grid.points[:, 0] <= r1
    predicted[wrong] = 3 - predicted[wrong]
    assert ranking_loss(predicted, truth, grid) == pytest.approx(r1, abs=1.5e-3)


def test_ranking_loss_accepts_callables(one_d):
    grid = EvalGrid(points=np.linspace(0, 1, 101)[:, None])
    loss = ranking_loss(
        lambda p: one_d.true_label(p), lambda p: one_d.true_label(p), grid
    )
    assert loss == 0.0


def test_ranking_loss_bounded(one_d):
    rng = np.random.default_rng(12)
    grid = EvalGrid(points=np.linspace(0, 1, 101)[:, None])
    pred = rng.integers(1, 3, size=101)
    truth = rng.integers(1, 3, size=101)
    assert 0.0 <= ranking_loss(pred, truth, grid) <= 1.0


# -- construction guards -------------------------------------------------------


def test_eval_grid_weight_validation():
    pts = np.linspace(0, 1, 5)[:, None]
    with pytest.raises(ValueError):
        EvalGrid(points=pts, weights=np.array([0.5, 0.5, 0.5, 0.25, 0.25]))
    with pytest.raises(ValueError):
        EvalGrid(points=pts, weights=np.array([0.5, 0.5, 0.5, -0.25, -0.25]))


def test_box_needs_positive_sides():
    with pytest.raises(ValueError):
        Box((0.0, 1.0), (1.0, 1.0))


def test_10d_noise_length_checked():
    with pytest.raises(ValueError):
        make_10d_example(noise_sd=(0.5, 0.4))


def test_trid_exponent_switch():
    printed = make_10d_example()
    classical = make_10d_example(trid_exponent=2)
    x = np.full(10, -0.5)
    # (x-1)^10 vs (x-1)^2 at x=-0.5: (1.5^10 - ...) differs wildly
    assert printed.value(3, x) != classical.value(3, x)
    expected = 0.5 * (10 * 1.5**2 - 9 * 0.25) - 5.0
    assert classical.value(3, x) == pytest.approx(expected)
