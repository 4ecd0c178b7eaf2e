"""Bootstrapped feature reduction for grouped lasso problems.

Fitting a lasso once keeps whichever features a single draw of the data
happens to favor.  Refitting over B with-replacement resamples and
keeping the union of every replicate's active set gives a reduced feature
space that is far smaller than p but stable under resampling noise; the
per-feature replicate counts double as a stability ranking.

Two flavors: per-group bootstrap of plain lasso fits (each group
resampled and fit on its own), and bootstrap of the data-shared model
(every group resampled inside each replicate, the augmented problem fit
whole).  lambda is re-selected by cross-validation inside every
replicate.  Replicate seeds are derived by a splittable hash of
(master seed, group, replicate index), so enlarging B extends the
replicate stream without reshuffling earlier draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsl import GroupedDataset, build_augmented, compute_weights
from .errors import ConfigurationError, ConvergenceError, StructuralError
from .lasso_solver import LassoOptions, fit_cv
from .seeding import generator, subseed
from .sparse_core import SparseBinaryDesign


@dataclass
class BootstrapConfig:
    """Replicate count, master seed, solver options, resample size.

    `resample_size` of None draws each resample at the group's own size;
    an integer draws that many rows per group instead.
    """

    replicates: int = 100
    seed: int = 0
    options: LassoOptions = field(default_factory=LassoOptions)
    resample_size: int | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigurationError("replicates must be >= 1")
        if self.resample_size is not None and self.resample_size < 1:
            raise ConfigurationError("resample_size must be >= 1")


@dataclass
class StabilityCounts:
    """How many successful replicates kept each column active."""

    counts: np.ndarray
    replicates: int
    failures: int = 0

    def __post_init__(self):
        self.counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 0) or np.any(self.counts > self.replicates):
            raise StructuralError("counts must lie in [0, replicates]")
        if not 0 <= self.failures <= self.replicates:
            raise StructuralError("failures must lie in [0, replicates]")

    @property
    def successes(self) -> int:
        return self.replicates - self.failures


@dataclass
class ReducedFeatureSet:
    """Union of replicate active sets, with per-feature counts."""

    features: np.ndarray
    counts: np.ndarray
    original_p: int

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.int64)
        self.counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if self.features.shape != self.counts.shape:
            raise StructuralError("one count per feature required")
        if self.features.size:
            if np.any(np.diff(self.features) <= 0):
                raise StructuralError("features must be strictly increasing")
            if self.features[0] < 0 or self.features[-1] >= self.original_p:
                raise StructuralError("feature id out of range")
        if np.any(self.counts < 1):
            raise StructuralError("union members need count >= 1")

    @property
    def size(self) -> int:
        return int(self.features.size)


def resample_indices(n: int, rng: np.random.Generator,
                     size: int | None = None) -> np.ndarray:
    """`size` (default n) uniform with-replacement draws from [0, n)."""
    if n < 1:
        raise ConfigurationError("need at least one row to resample")
    return rng.integers(0, n, size=n if size is None else size)


def _run_replicates(n_replicates: int, run_one, threads: int):
    """Replicate k -> active column array, or None on a failed solve.

    Results are merged by replicate index, so any execution order (or
    thread count) yields identical output.
    """
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run_one, range(n_replicates)))
    return [run_one(k) for k in range(n_replicates)]


def _merge(supports, n_cols: int, B: int):
    counts = np.zeros(n_cols, dtype=np.int64)
    failures = 0
    for sup in supports:
        if sup is None:
            failures += 1
        else:
            counts[sup] += 1
    return counts, failures


def bootstrap_lasso_group(ds: GroupedDataset, cfg: BootstrapConfig
                          ) -> dict[int, tuple[StabilityCounts,
                                               ReducedFeatureSet]]:
    """Per-group bootstrap of plain lasso fits.

    For each group g and replicate k, n_g rows of group g are resampled
    with replacement and a lasso is fit at a freshly cross-validated
    lambda.  A replicate whose solve does not converge is skipped and
    tallied in `failures`; successes + failures = replicates.
    """
    opts = cfg.options
    p = ds.n_features
    pf = np.ones(p)
    for g in range(1, ds.n_groups + 1):
        size = cfg.resample_size or int(ds.group_sizes[g - 1])
        if size < opts.cv_folds:
            raise ConfigurationError(
                f"group {ds.group_names[g - 1]!r} resamples have {size} rows, "
                f"fewer than cv_folds={opts.cv_folds}")

    inner = LassoOptions(**{**opts.__dict__, "threads": 1})
    out = {}
    for g in range(1, ds.n_groups + 1):
        rows = ds.group_rows(g)

        def run_one(k: int, g=g, rows=rows):
            rng = generator(cfg.seed, "bls", g, k)
            idx = rows[resample_indices(rows.size, rng, cfg.resample_size)]
            try:
                best, _ = fit_cv(ds.X.row_select(idx), ds.y[idx], pf, inner,
                                 seed=subseed(cfg.seed, "bls-cv", g, k))
            except ConvergenceError:
                return None
            return best.coefficients.support()

        supports = _run_replicates(cfg.replicates, run_one, opts.threads)
        counts, failures = _merge(supports, p, cfg.replicates)
        union = np.flatnonzero(counts)
        out[g] = (StabilityCounts(counts, cfg.replicates, failures),
                  ReducedFeatureSet(union, counts[union], p))
    return out


def bootstrap_dsl(ds: GroupedDataset, scheme, cfg: BootstrapConfig
                  ) -> tuple[StabilityCounts, ReducedFeatureSet]:
    """Bootstrap of the data-shared model over within-group resamples.

    Stability counts are kept per augmented column (shared block and all
    group blocks); the reduced set is over original features, a feature
    surviving if its shared column or any of its group columns was active
    in at least one successful replicate.
    """
    opts = cfg.options
    p = ds.n_features
    sizes = (np.full(ds.n_groups, cfg.resample_size, dtype=np.int64)
             if cfg.resample_size else ds.group_sizes)
    if np.any(sizes < opts.cv_folds):
        g = int(np.flatnonzero(sizes < opts.cv_folds)[0])
        raise ConfigurationError(
            f"group {ds.group_names[g]!r} resamples have {sizes[g]} rows, "
            f"fewer than cv_folds={opts.cv_folds}")
    r = compute_weights(scheme, sizes)
    group_rows = [ds.group_rows(g) for g in range(1, ds.n_groups + 1)]
    inner = LassoOptions(**{**opts.__dict__, "threads": 1})
    n_aug = p * (ds.n_groups + 1)

    def run_one(k: int):
        rng = generator(cfg.seed, "bsls", k)
        idx = np.concatenate([
            rows[resample_indices(rows.size, rng, cfg.resample_size)]
            for rows in group_rows])
        sub = ds.take(idx)
        aug = build_augmented(sub, r)
        try:
            best, _ = fit_cv(aug.design, sub.y, aug.penalty_factors, inner,
                             seed=subseed(cfg.seed, "bsls-cv", k),
                             groups=sub.groups)
        except ConvergenceError:
            return None
        return best.coefficients.support()

    supports = _run_replicates(cfg.replicates, run_one, opts.threads)
    counts_aug, failures = _merge(supports, n_aug, cfg.replicates)
    feature_counts = np.zeros(p, dtype=np.int64)
    aug_features = np.tile(np.arange(p, dtype=np.int64), ds.n_groups + 1)
    for sup in supports:
        if sup is not None and sup.size:
            feature_counts[np.unique(aug_features[sup])] += 1
    union = np.flatnonzero(feature_counts)
    return (StabilityCounts(counts_aug, cfg.replicates, failures),
            ReducedFeatureSet(union, feature_counts[union], p))


def reduce_dataset(ds: GroupedDataset, reduced: ReducedFeatureSet
                   ) -> tuple[GroupedDataset, dict[int, int]]:
    """Slice the dataset to the reduced feature set; rows untouched."""
    if reduced.original_p != ds.n_features:
        raise StructuralError(
            f"reduced set was built over {reduced.original_p} features, "
            f"dataset has {ds.n_features}")
    X2, mapping = ds.X.column_slice(reduced.features)
    return ds.with_design(X2), mapping


def stability_report(counts: StabilityCounts, top: int | None = None
                     ) -> list[tuple[int, int, float]]:
    """(feature, count, proportion) rows, descending by count.

    Features never active are omitted; ties break toward the smaller
    feature id.  `top` truncates the list.
    """
    active = np.flatnonzero(counts.counts)
    order = np.lexsort((active, -counts.counts[active]))
    rows = [(int(j), int(counts.counts[j]),
             float(counts.counts[j] / counts.replicates))
            for j in active[order]]
    return rows[:top] if top is not None else rows
