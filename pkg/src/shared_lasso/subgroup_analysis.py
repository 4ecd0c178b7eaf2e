"""Set algebra over active sets and removal-effect analysis.

Separate per-group lasso fits each keep an active set S_g; the
data-shared fit keeps a shared active set (the support of its common
coefficient vector).  Intersections of these sets name interpretable
feature families: features every model agrees on, features a group shares
with the common block, and features only the shared block found.  The
follow-up question "does a family actually matter?" is answered by
removing its columns, refitting, and reporting the relative change in
held-out MSE.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dsl import (DslFit, EvalResult, GroupedDataset, build_augmented,
                  compute_weights, evaluate, fit_dsl)
from .errors import ConfigurationError, StructuralError
from .lasso_solver import (LassoFit, LassoOptions, SparseCoefficients, fit,
                           fit_path_on_grid, lambda_max)


@dataclass
class ActiveSet:
    """A labeled, sorted, duplicate-free collection of feature ids."""

    label: str
    features: np.ndarray

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.int64)
        if self.features.size and np.any(np.diff(self.features) <= 0):
            raise StructuralError("features must be sorted and duplicate-free")

    @classmethod
    def from_support(cls, label: str, coefs: SparseCoefficients) -> "ActiveSet":
        return cls(label, coefs.support())

    def to_set(self) -> set[int]:
        return set(self.features.tolist())

    def __len__(self) -> int:
        return int(self.features.size)


def extract_sets(separate_fits, dsl_fit: DslFit, group_names=None
                 ) -> tuple[list[ActiveSet], ActiveSet]:
    """Active sets of the per-group fits and of the shared block."""
    fits = list(separate_fits)
    p = dsl_fit.n_features
    if len(fits) != dsl_fit.n_groups:
        raise StructuralError(
            f"{len(fits)} per-group fits for a {dsl_fit.n_groups}-group fit")
    names = group_names or [str(g) for g in range(1, len(fits) + 1)]
    if len(names) != len(fits):
        raise StructuralError("need one name per group")
    group_sets = []
    for name, f in zip(names, fits):
        if f.coefficients.size != p:
            raise StructuralError(
                f"fit {name!r} lives on {f.coefficients.size} features, "
                f"shared fit on {p}")
        group_sets.append(ActiveSet.from_support(name, f.coefficients))
    shared = ActiveSet.from_support("shared", dsl_fit.beta)
    return group_sets, shared


@dataclass
class SubgroupSets:
    """Named intersections of the group active sets with the shared set.

    `venn` maps each nonempty label combination to the count of features
    belonging to exactly those sets (all 2^k - 1 regions, zeros included).
    """

    all_intersection: ActiveSet
    shared_int: list[ActiveSet]
    additional: ActiveSet
    venn: dict[frozenset, int]
    labels: list[str]


def subgroups(group_sets, shared: ActiveSet) -> SubgroupSets:
    """Intersection families and exact venn region counts."""
    group_sets = list(group_sets)
    sh = shared.to_set()
    gsets = [a.to_set() for a in group_sets]

    common = sh.copy()
    for s in gsets:
        common &= s
    union_groups = set().union(*gsets) if gsets else set()

    all_inter = ActiveSet("all_intersection",
                          np.sort(np.fromiter(common, dtype=np.int64,
                                              count=len(common))))
    shared_int = []
    for a, s in zip(group_sets, gsets):
        inter = s & sh
        shared_int.append(ActiveSet(
            f"shared_int_{a.label}",
            np.sort(np.fromiter(inter, dtype=np.int64, count=len(inter)))))
    extra = sh - union_groups
    additional = ActiveSet("additional",
                           np.sort(np.fromiter(extra, dtype=np.int64,
                                               count=len(extra))))

    named = {a.label: s for a, s in zip(group_sets, gsets)}
    named[shared.label] = sh
    labels = list(named)
    venn: dict[frozenset, int] = {}
    for r in range(1, len(labels) + 1):
        for combo in itertools.combinations(labels, r):
            venn[frozenset(combo)] = 0
    for x in set().union(*named.values()) if named else set():
        members = frozenset(l for l in labels if x in named[l])
        venn[members] += 1
    return SubgroupSets(all_intersection=all_inter, shared_int=shared_int,
                        additional=additional, venn=venn, labels=labels)


@dataclass
class RemovalRow:
    """Relative MSE change (percent) after removing one feature family."""

    penalty: str
    removal_type: str
    pct: dict[str, float]
    coef_removed: int


@dataclass
class RemovalReport:
    rows: list[RemovalRow]
    group_names: list[str]


def _strip_features(coefs: SparseCoefficients, drop: np.ndarray
                    ) -> SparseCoefficients:
    keep = ~np.isin(coefs.indices, drop)
    return SparseCoefficients(coefs.size, coefs.indices[keep],
                              coefs.values[keep])


def _refit_at_lambda(train: GroupedDataset, scheme, lam: float,
                     opts: LassoOptions, label: str) -> DslFit:
    r = compute_weights(scheme, train.group_sizes)
    aug = build_augmented(train, r)
    lmax = lambda_max(aug.design, train.y, aug.penalty_factors,
                      opts.fit_intercept)
    if lam >= lmax:
        fitted = fit(aug.design, train.y, lam, aug.penalty_factors, opts)
    else:
        grid = np.geomspace(lmax, lam, 20)
        grid[-1] = lam
        fitted = fit_path_on_grid(aug.design, train.y, aug.penalty_factors,
                                  grid, opts).fits[-1]
    return aug.unpack(fitted, scheme=label)


def removal_effect(ds_train: GroupedDataset, ds_test: GroupedDataset,
                   scheme, subgroup, baseline: DslFit, seed: int = 0,
                   opts: LassoOptions | None = None, zero_only: bool = False,
                   reuse_lambda: bool = False,
                   removal_type: str = "") -> RemovalRow:
    """One removal experiment against a baseline data-shared fit.

    The subgroup's columns are dropped and the model refit with a freshly
    cross-validated lambda (`reuse_lambda` keeps the baseline's lambda
    instead).  `zero_only` skips refitting entirely and just zeroes the
    subgroup's coefficients in the baseline, a cheaper lower-cost variant.
    An empty subgroup with the same seed reproduces the baseline exactly.
    """
    opts = opts or LassoOptions()
    drop = np.asarray(subgroup.features if isinstance(subgroup, ActiveSet)
                      else subgroup, dtype=np.int64)
    p = ds_train.n_features
    if drop.size and (drop.min() < 0 or drop.max() >= p):
        raise StructuralError("subgroup contains a feature id out of range")
    base_eval = evaluate(baseline, ds_test)

    if zero_only:
        from dataclasses import replace
        stripped = replace(baseline,
                           beta=_strip_features(baseline.beta, drop),
                           deltas=[_strip_features(d, drop)
                                   for d in baseline.deltas])
        removed_eval = evaluate(stripped, ds_test)
    else:
        keep = np.setdiff1d(np.arange(p, dtype=np.int64), drop)
        Xtr, _ = ds_train.X.column_slice(keep)
        Xte, _ = ds_test.X.column_slice(keep)
        train2 = ds_train.with_design(Xtr)
        test2 = ds_test.with_design(Xte)
        label = scheme if isinstance(scheme, str) else "custom"
        if reuse_lambda:
            refit = _refit_at_lambda(train2, scheme, baseline.lam, opts, label)
        else:
            refit = fit_dsl(train2, scheme, opts, seed)
        removed_eval = evaluate(refit, test2)

    pct = {"all": 100.0 * (removed_eval.all_mse - base_eval.all_mse)
                  / base_eval.all_mse}
    for name in base_eval.group_mse:
        pct[name] = (100.0 * (removed_eval.group_mse[name]
                              - base_eval.group_mse[name])
                     / base_eval.group_mse[name])
    return RemovalRow(penalty=baseline.scheme, removal_type=removal_type,
                      pct=pct, coef_removed=int(drop.size))


def removal_table(ds_train: GroupedDataset, ds_test: GroupedDataset, scheme,
                  named_subgroups: dict, baseline: DslFit, seed: int = 0,
                  opts: LassoOptions | None = None, zero_only: bool = False,
                  reuse_lambda: bool = False) -> RemovalReport:
    """Removal rows for each named subgroup, preceded by a no-removal row."""
    opts = opts or LassoOptions()
    items = [("none", np.empty(0, dtype=np.int64))] + list(named_subgroups.items())

    def run(item):
        name, sub = item
        inner = LassoOptions(**{**opts.__dict__, "threads": 1})
        return removal_effect(ds_train, ds_test, scheme, sub, baseline, seed,
                              inner, zero_only, reuse_lambda,
                              removal_type=name)

    if opts.threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            rows = list(pool.map(run, items))
    else:
        rows = [run(item) for item in items]
    return RemovalReport(rows=rows, group_names=list(ds_test.group_names))
