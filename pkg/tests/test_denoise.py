"""Tests for soft-threshold de-noising and the gamma sweep."""

import math

import numpy as np
import pytest

from shared_lasso.denoise import (GAMMA_GRID_SIZE, DenoiseSweep,
                                  apply_threshold, donoho_threshold,
                                  estimate_sigma, sweep_gamma)
from shared_lasso.dsl import DslFit, GroupedDataset
from shared_lasso.errors import ConfigurationError
from shared_lasso.lasso_solver import (LassoFit, SparseCoefficients, fit, mse,
                                       predict)
from shared_lasso.sparse_core import SparseBinaryDesign


def make_fit(mu, beta, lam=0.1):
    beta = np.asarray(beta, dtype=np.float64)
    return LassoFit(intercept=float(mu),
                    coefficients=SparseCoefficients.from_dense(beta),
                    lam=lam, penalty_factors=np.ones(beta.size))


def make_grouped(seed, n=30, p=4, sizes=None):
    rng = np.random.default_rng(seed)
    rows = [np.flatnonzero(rng.random(p) < 0.5) for _ in range(n)]
    X = SparseBinaryDesign.from_rows(rows, p)
    y = rng.normal(size=n)
    if sizes is None:
        groups = np.ones(n, dtype=np.int64)
    else:
        groups = np.repeat(np.arange(1, len(sizes) + 1), sizes)
    return GroupedDataset(X, y, groups)


# -- threshold formula ---------------------------------------------------------

def test_threshold_zero_gamma():
    assert donoho_threshold(1000, 0.0, 3.0) == 0.0


def test_threshold_algebraic_identity():
    n = math.exp(2.0)  # ln n = 2, so the formula collapses to 2/sqrt(n)
    got = donoho_threshold(n, 1.0, 1.0)
    assert got == pytest.approx(2.0 / math.sqrt(n), rel=1e-12)


def test_threshold_reference_arithmetic():
    assert donoho_threshold(16386, 0.25, 2.3) == pytest.approx(0.0198,
                                                               abs=1e-4)


def test_threshold_rejects_bad_inputs():
    with pytest.raises(ConfigurationError):
        donoho_threshold(1, 0.1, 1.0)
    with pytest.raises(ConfigurationError):
        donoho_threshold(10, -0.1, 1.0)
    with pytest.raises(ConfigurationError):
        donoho_threshold(10, 0.1, -1.0)


def test_threshold_linear_in_gamma_and_sigma():
    base = donoho_threshold(500, 0.125, 1.5)
    assert donoho_threshold(500, 0.25, 1.5) == 2.0 * base  # power of two: exact
    assert donoho_threshold(500, 0.125, 3.0) == 2.0 * base
    assert donoho_threshold(500, 3 * 0.125, 1.5) == pytest.approx(
        3.0 * base, rel=1e-14)


# -- apply_threshold -------------------------------------------------------------

def test_apply_zero_threshold_is_identity():
    f = make_fit(0.3, [2.0, -0.5, 1.0])
    out = apply_threshold(f, 0.0)
    np.testing.assert_array_equal(out.coefficients.values,
                                  f.coefficients.values)
    np.testing.assert_array_equal(out.coefficients.indices,
                                  f.coefficients.indices)
    assert out.intercept == f.intercept


def test_apply_large_threshold_zeroes_everything():
    f = make_fit(0.7, [2.0, -0.5, 1.0])
    out = apply_threshold(f, 2.5)
    assert out.coefficients.nnz == 0
    assert out.intercept == 0.7


def test_apply_per_coordinate():
    f = make_fit(0.0, [2.0, -0.5, 1.0])
    out = apply_threshold(f, 1.0)
    np.testing.assert_array_equal(out.coefficients.dense(), [1.0, 0.0, 0.0])


def test_apply_threshold_on_dsl_fit():
    f = DslFit(intercept=1.0,
               beta=SparseCoefficients.from_dense(np.array([2.0, -0.3])),
               deltas=[SparseCoefficients.from_dense(np.array([0.4, -1.5]))],
               weights=np.array([1.0]), lam=0.1)
    out = apply_threshold(f, 0.5)
    np.testing.assert_array_equal(out.beta.dense(), [1.5, 0.0])
    np.testing.assert_array_equal(out.deltas[0].dense(), [0.0, -1.0])
    assert out.intercept == 1.0


def test_apply_threshold_rejects_other_types():
    with pytest.raises(ConfigurationError):
        apply_threshold("fit", 0.1)
    with pytest.raises(ConfigurationError):
        apply_threshold(make_fit(0, [1.0]), -0.5)


def test_support_shrinks_monotonically():
    f = make_fit(0.0, [2.0, -0.5, 1.0, 0.05, -3.0])
    supports = []
    for t in (0.0, 0.1, 0.6, 1.5, 4.0):
        supports.append(set(apply_threshold(f, t).coefficients
                            .support().tolist()))
    for small, big in zip(supports[1:], supports):
        assert small <= big


def test_magnitudes_drop_by_exactly_min_coef_t():
    f = make_fit(0.0, [2.0, -0.5, 1.0])
    t = 0.75
    out = apply_threshold(f, t).coefficients.dense()
    for before, after in zip([2.0, -0.5, 1.0], out):
        assert abs(before) - abs(after) == pytest.approx(
            min(abs(before), t), abs=1e-15)


# -- sigma estimate ----------------------------------------------------------------

def test_estimate_sigma_matches_residual_std():
    ds = make_grouped(0)
    f = fit(ds.X, ds.y, 0.05, np.ones(ds.n_features))
    r = ds.y - predict(f, ds.X)
    assert estimate_sigma(f, ds) == pytest.approx(float(np.std(r)), rel=1e-12)


def test_estimate_sigma_perfect_fit_is_zero():
    ds = make_grouped(1, n=10, p=3)
    f = make_fit(0.0, [1.0, -1.0, 0.5])
    y = predict(f, ds.X)
    perfect = GroupedDataset(ds.X, y, ds.groups)
    assert estimate_sigma(f, perfect) == 0.0


# -- gamma sweep --------------------------------------------------------------------

def test_sweep_grid_shape_and_endpoints():
    ds = make_grouped(2)
    f = make_fit(0.0, np.zeros(ds.n_features))
    sweep = sweep_gamma(f, ds, sigma=1.0, n=100)
    assert sweep.gammas.shape == (GAMMA_GRID_SIZE,)
    assert sweep.gammas[0] == 0.0
    assert sweep.gammas[-1] == 0.5
    assert np.all(np.diff(sweep.gammas) > 0)


def test_sweep_zero_fit_flat_curve():
    ds = make_grouped(3)
    f = make_fit(0.4, np.zeros(ds.n_features))
    sweep = sweep_gamma(f, ds, sigma=2.0, n=50)
    assert np.all(sweep.mses == sweep.mses[0])


def test_sweep_gamma_zero_equals_unthresholded_mse():
    ds = make_grouped(4)
    f = fit(ds.X, ds.y, 0.02, np.ones(ds.n_features))
    sweep = sweep_gamma(f, ds, sigma=1.3, n=200)
    unthresholded = mse(predict(f, ds.X), ds.y)
    assert sweep.mses[0] == unthresholded  # bit-exact


def test_sweep_right_tail_plateaus_at_intercept_only_mse():
    ds = make_grouped(5)
    f = make_fit(0.2, [0.8, -0.3, 0.1, 0.05])
    # sigma chosen so thresholds beyond mid-grid exceed every |coef|
    sweep = sweep_gamma(f, ds, sigma=50.0, n=40)
    intercept_only = mse(np.full(ds.n_rows, 0.2), ds.y)
    tail = sweep.mses[sweep.thresholds > 0.8]
    assert tail.size > 0
    assert np.all(tail == intercept_only)  # exact plateau


def test_sweep_argmin_tie_breaks_toward_smaller_gamma():
    ds = make_grouped(6)
    f = make_fit(0.0, np.zeros(ds.n_features))  # flat curve, all tied
    sweep = sweep_gamma(f, ds, sigma=1.0, n=30)
    assert sweep.argmin_gamma == 0.0


def test_sweep_summary_fields():
    ds = make_grouped(7)
    f = fit(ds.X, ds.y, 0.05, np.ones(ds.n_features))
    sweep = sweep_gamma(f, ds, sigma=0.9, n=60)
    s = sweep.summary()
    assert set(s) == {"argmin_gamma", "min_mse", "sigma", "n"}
    assert s["min_mse"] == pytest.approx(float(sweep.mses.min()))
    assert s["sigma"] == 0.9 and s["n"] == 60


def test_sweep_works_on_dsl_fit():
    ds = make_grouped(8, n=20, sizes=(12, 8))
    f = DslFit(intercept=0.1,
               beta=SparseCoefficients.from_dense(np.array([1.0, 0.0, -0.5, 0.2])),
               deltas=[SparseCoefficients.from_dense(np.zeros(4)),
                       SparseCoefficients.from_dense(np.array([0.3, 0, 0, 0.0]))],
               weights=np.ones(2), lam=0.1)
    sweep = sweep_gamma(f, ds, sigma=1.0, n=20)
    assert sweep.mses.shape == (GAMMA_GRID_SIZE,)
    assert np.all(sweep.mses >= 0)
