"""Tests for bootstrap feature reduction and stability counting."""

import numpy as np
import pytest

from shared_lasso.dsl import GroupedDataset
from shared_lasso.errors import ConfigurationError, StructuralError
from shared_lasso.lasso_solver import LassoOptions
from shared_lasso.resampling import (BootstrapConfig, ReducedFeatureSet,
                                     StabilityCounts, bootstrap_dsl,
                                     bootstrap_lasso_group, reduce_dataset,
                                     resample_indices, stability_report)
from shared_lasso.seeding import generator
from shared_lasso.sparse_core import SparseBinaryDesign


def signal_dataset(seed, sizes=(30, 25), p=6, beta=(2.0, -1.5), noise=0.0):
    rng = np.random.default_rng(seed)
    n = sum(sizes)
    rows = [np.flatnonzero(rng.random(p) < 0.5) for _ in range(n)]
    X = SparseBinaryDesign.from_rows(rows, p)
    beta_star = np.zeros(p)
    beta_star[:len(beta)] = beta
    y = X.dot(beta_star) + noise * rng.normal(size=n)
    groups = np.repeat(np.arange(1, len(sizes) + 1), sizes)
    return GroupedDataset(X, y, groups), beta_star


def quick_cfg(B=4, seed=0, **opt_kwargs):
    defaults = dict(lambda_grid_size=10, cv_folds=3)
    defaults.update(opt_kwargs)
    return BootstrapConfig(replicates=B, seed=seed,
                           options=LassoOptions(**defaults))


# -- resample_indices -----------------------------------------------------------

def test_resample_single_row():
    idx = resample_indices(1, generator(0, "t"))
    np.testing.assert_array_equal(idx, np.zeros(1, dtype=np.int64))


def test_resample_deterministic():
    a = resample_indices(20, generator(42, "t"))
    b = resample_indices(20, generator(42, "t"))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (20,)


def test_resample_size_override():
    idx = resample_indices(5, generator(1, "t"), size=12)
    assert idx.shape == (12,)
    assert idx.min() >= 0 and idx.max() < 5


def test_resample_frequencies_near_uniform():
    rng = generator(7, "freq")
    draws = np.concatenate([resample_indices(5, rng) for _ in range(10 ** 4)])
    freq = np.bincount(draws, minlength=5)
    expected = draws.size / 5
    sigma = np.sqrt(draws.size * 0.2 * 0.8)
    assert np.all(np.abs(freq - expected) < 5 * sigma)


def test_resample_rejects_empty():
    with pytest.raises(ConfigurationError):
        resample_indices(0, generator(0, "t"))


# -- containers ------------------------------------------------------------------

def test_bootstrap_config_validation():
    with pytest.raises(ConfigurationError):
        BootstrapConfig(replicates=0)
    with pytest.raises(ConfigurationError):
        BootstrapConfig(resample_size=0)


def test_stability_counts_validation():
    with pytest.raises(StructuralError):
        StabilityCounts(np.array([5]), replicates=4)
    with pytest.raises(StructuralError):
        StabilityCounts(np.array([1]), replicates=4, failures=5)
    c = StabilityCounts(np.array([0, 3]), replicates=4, failures=1)
    assert c.successes == 3


def test_reduced_feature_set_validation():
    with pytest.raises(StructuralError):
        ReducedFeatureSet(np.array([2, 1]), np.array([1, 1]), 5)
    with pytest.raises(StructuralError):
        ReducedFeatureSet(np.array([1]), np.array([0]), 5)
    with pytest.raises(StructuralError):
        ReducedFeatureSet(np.array([7]), np.array([1]), 5)
    s = ReducedFeatureSet(np.array([1, 4]), np.array([2, 1]), 5)
    assert s.size == 2


# -- per-group bootstrap ------------------------------------------------------------

def test_bootstrap_group_zero_response_empty_union():
    ds, _ = signal_dataset(0, sizes=(15, 12), beta=())
    ds = GroupedDataset(ds.X, np.zeros(ds.n_rows), ds.groups)
    out = bootstrap_lasso_group(ds, quick_cfg(B=3))
    for counts, reduced in out.values():
        assert counts.counts.sum() == 0
        assert reduced.size == 0
        assert counts.failures == 0


def test_bootstrap_group_strong_signal_covers_support():
    ds, beta_star = signal_dataset(1, sizes=(40,), beta=(2.0, -1.5))
    out = bootstrap_lasso_group(ds, quick_cfg(B=1, seed=5))
    _, reduced = out[1]
    assert set(np.flatnonzero(beta_star).tolist()) <= set(reduced.features.tolist())


def test_bootstrap_group_deterministic_and_thread_invariant():
    ds, _ = signal_dataset(2, sizes=(20, 18), beta=(1.5,), noise=0.5)
    a = bootstrap_lasso_group(ds, quick_cfg(B=4, seed=9))
    b = bootstrap_lasso_group(ds, quick_cfg(B=4, seed=9))
    c = bootstrap_lasso_group(ds, quick_cfg(B=4, seed=9, threads=4))
    for g in (1, 2):
        np.testing.assert_array_equal(a[g][0].counts, b[g][0].counts)
        np.testing.assert_array_equal(a[g][0].counts, c[g][0].counts)
        np.testing.assert_array_equal(a[g][1].features, c[g][1].features)


def test_bootstrap_group_union_iff_counted():
    ds, _ = signal_dataset(3, sizes=(25,), beta=(2.0, -1.0), noise=0.4)
    out = bootstrap_lasso_group(ds, quick_cfg(B=5, seed=2))
    counts, reduced = out[1]
    np.testing.assert_array_equal(np.flatnonzero(counts.counts),
                                  reduced.features)
    np.testing.assert_array_equal(counts.counts[reduced.features],
                                  reduced.counts)


def test_bootstrap_group_prefix_monotone_in_B():
    ds, _ = signal_dataset(4, sizes=(22,), beta=(1.2,), noise=0.6)
    small = bootstrap_lasso_group(ds, quick_cfg(B=3, seed=11))
    large = bootstrap_lasso_group(ds, quick_cfg(B=6, seed=11))
    assert (set(small[1][1].features.tolist())
            <= set(large[1][1].features.tolist()))


def test_bootstrap_group_failure_tally():
    ds, _ = signal_dataset(5, sizes=(20,), beta=(2.0,), noise=0.5)
    cfg = quick_cfg(B=3, seed=1, max_iterations=1, tolerance=1e-16)
    out = bootstrap_lasso_group(ds, cfg)
    counts, reduced = out[1]
    assert counts.failures == 3
    assert counts.successes == 0
    assert reduced.size == 0


def test_bootstrap_group_small_group_fails_fast():
    ds, _ = signal_dataset(6, sizes=(12, 2), beta=(1.0,))
    with pytest.raises(ConfigurationError, match="'2'"):
        bootstrap_lasso_group(ds, quick_cfg(B=2))


def test_bootstrap_group_resample_size_override():
    ds, _ = signal_dataset(7, sizes=(30,), beta=(2.0,), noise=0.3)
    out = bootstrap_lasso_group(ds, BootstrapConfig(
        replicates=2, seed=3, resample_size=12,
        options=LassoOptions(lambda_grid_size=8, cv_folds=3)))
    counts, _ = out[1]
    assert counts.replicates == 2


# -- shared-model bootstrap ------------------------------------------------------------

def test_bootstrap_dsl_zero_response_empty_union():
    ds, _ = signal_dataset(8, sizes=(14, 12), beta=())
    ds = GroupedDataset(ds.X, np.zeros(ds.n_rows), ds.groups)
    counts, reduced = bootstrap_dsl(ds, "sqrt_share", quick_cfg(B=3))
    assert counts.counts.sum() == 0
    assert reduced.size == 0
    assert counts.counts.shape == (ds.n_features * 3,)


def test_bootstrap_dsl_deterministic():
    ds, _ = signal_dataset(9, sizes=(18, 15), beta=(1.5, -1.0), noise=0.4)
    a = bootstrap_dsl(ds, "sqrt_share", quick_cfg(B=3, seed=4))
    b = bootstrap_dsl(ds, "sqrt_share", quick_cfg(B=3, seed=4))
    c = bootstrap_dsl(ds, "sqrt_share", quick_cfg(B=3, seed=4, threads=3))
    np.testing.assert_array_equal(a[0].counts, b[0].counts)
    np.testing.assert_array_equal(a[0].counts, c[0].counts)
    np.testing.assert_array_equal(a[1].features, c[1].features)


def test_bootstrap_dsl_feature_union_covers_block_activity():
    ds, _ = signal_dataset(10, sizes=(20, 16), beta=(2.0, -1.5), noise=0.3)
    counts, reduced = bootstrap_dsl(ds, "sqrt_share", quick_cfg(B=4, seed=6))
    p = ds.n_features
    active_aug = np.flatnonzero(counts.counts)
    assert set((active_aug % p).tolist()) == set(reduced.features.tolist())


@pytest.mark.filterwarnings("ignore::shared_lasso.dsl.SeparateRegimeWarning")
def test_bootstrap_dsl_single_group_determinism():
    ds, _ = signal_dataset(11, sizes=(25,), beta=(1.8,), noise=0.4)
    a = bootstrap_dsl(ds, np.array([1.0]), quick_cfg(B=2, seed=8))
    b = bootstrap_dsl(ds, np.array([1.0]), quick_cfg(B=2, seed=8))
    np.testing.assert_array_equal(a[0].counts, b[0].counts)
    np.testing.assert_array_equal(a[1].features, b[1].features)


# -- reduction ---------------------------------------------------------------------------

def test_reduce_dataset_full_set_identity():
    ds, _ = signal_dataset(12, sizes=(10,), p=5)
    full = ReducedFeatureSet(np.arange(5), np.ones(5, dtype=np.int64), 5)
    out, mapping = reduce_dataset(ds, full)
    np.testing.assert_array_equal(out.X.to_dense(), ds.X.to_dense())
    assert mapping == {j: j for j in range(5)}


def test_reduce_dataset_empty_set():
    ds, _ = signal_dataset(13, sizes=(10,), p=5)
    empty = ReducedFeatureSet(np.empty(0, dtype=np.int64),
                              np.empty(0, dtype=np.int64), 5)
    out, mapping = reduce_dataset(ds, empty)
    assert out.n_features == 0
    assert out.n_rows == ds.n_rows
    np.testing.assert_array_equal(out.y, ds.y)
    assert mapping == {}


def test_reduce_dataset_checks_feature_space():
    ds, _ = signal_dataset(14, sizes=(10,), p=5)
    wrong = ReducedFeatureSet(np.array([0]), np.array([1]), 7)
    with pytest.raises(StructuralError):
        reduce_dataset(ds, wrong)


def test_reduced_refit_matches_full_fit_mse():
    # reduction keeps every feature the full fit uses, so a refit on the
    # reduced columns reaches the same quality
    from shared_lasso.lasso_solver import fit_cv, mse, predict
    ds, _ = signal_dataset(15, sizes=(60,), p=8, beta=(2.0, -1.5), noise=0.5)
    train, test = np.arange(40), np.arange(40, 60)
    tr, te = ds.take(train), ds.take(test)
    opts = LassoOptions(lambda_grid_size=20, cv_folds=5)
    full_fit, _ = fit_cv(tr.X, tr.y, np.ones(8), opts, seed=1)
    out = bootstrap_lasso_group(tr, BootstrapConfig(
        replicates=6, seed=1, options=opts))
    red_tr, mapping = reduce_dataset(tr, out[1][1])
    red_te = te.with_design(te.X.column_slice(out[1][1].features)[0])
    red_fit, _ = fit_cv(red_tr.X, red_tr.y, np.ones(red_tr.n_features),
                        opts, seed=1)
    full_mse = mse(predict(full_fit, te.X), te.y)
    red_mse = mse(predict(red_fit, red_te.X), red_te.y)
    assert abs(full_mse - red_mse) < 0.05


# -- stability report ----------------------------------------------------------------------

def test_stability_report_empty_for_zero_counts():
    c = StabilityCounts(np.zeros(6, dtype=np.int64), replicates=4)
    assert stability_report(c) == []


def test_stability_report_proportions_and_order():
    c = StabilityCounts(np.array([0, 4, 2, 2, 1]), replicates=4)
    rows = stability_report(c)
    assert rows[0] == (1, 4, 1.0)
    assert [r[0] for r in rows] == [1, 2, 3, 4]  # ties break on feature id
    assert rows[1][2] == pytest.approx(0.5)


def test_stability_report_top_truncation():
    c = StabilityCounts(np.array([3, 1, 2]), replicates=3)
    rows = stability_report(c, top=2)
    assert len(rows) == 2
    assert rows[0][0] == 0
