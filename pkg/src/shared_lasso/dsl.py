"""Data-shared lasso for grouped observations.

Each row belongs to one of G groups.  The model gives every group the
per-group coefficient vector beta + delta_g: beta is shared across groups
while delta_g captures group-specific deviations, and the penalty

    lambda * ( ||beta||_1 + sum_g r_g * ||delta_g||_1 )

controls how much of the signal is explained jointly versus per group.
Large weights r_g push group effects into the shared block; weights
summing to at most 1 let every group keep its own fit (the shared block
is then redundant and stays at zero).

The whole problem is one ordinary lasso on an augmented design with
N rows and p*(G+1) columns: block 0 holds the stacked design (penalty
factor 1), block g repeats group g's rows in its own column range
(penalty factor r_g).  Keeping the augmented matrix binary and expressing
the weights through penalty factors is numerically cleaner than scaling
block values; the value-scaled construction is also provided and the two
unpack to the same model (see tests).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError, StructuralError
from .lasso_solver import (CvResult, LassoFit, LassoOptions,
                           SparseCoefficients, fit_cv, mse, predict)
from .sparse_core import SparseBinaryDesign


class SeparateRegimeWarning(UserWarning):
    """Weights sum to at most 1: the shared block cannot gain anything."""


@dataclass
class GroupedDataset:
    """A design, response, and group id per row (ids run 1..G)."""

    X: SparseBinaryDesign
    y: np.ndarray
    groups: np.ndarray
    group_names: list[str] | None = None

    def __post_init__(self):
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        self.groups = np.ascontiguousarray(self.groups, dtype=np.int64)
        if self.y.shape != (self.X.n_rows,):
            raise StructuralError("y length must equal n_rows")
        if self.groups.shape != (self.X.n_rows,):
            raise StructuralError("groups length must equal n_rows")
        if self.X.n_rows == 0:
            raise StructuralError("dataset needs at least one row")
        if self.groups.min() < 1:
            raise StructuralError("group ids start at 1")
        G = int(self.groups.max())
        sizes = np.bincount(self.groups, minlength=G + 1)[1:]
        if np.any(sizes == 0):
            missing = int(np.flatnonzero(sizes == 0)[0] + 1)
            raise StructuralError(f"group {missing} has no rows")
        if self.group_names is None:
            self.group_names = [str(g) for g in range(1, G + 1)]
        elif len(self.group_names) != G:
            raise StructuralError("need one name per group")
        self.group_sizes = sizes
        self.n_groups = G

    @property
    def n_rows(self) -> int:
        return self.X.n_rows

    @property
    def n_features(self) -> int:
        return self.X.n_cols

    def group_rows(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.groups == g)

    def take(self, rows) -> "GroupedDataset":
        """Row subset (repeats allowed); group labels follow the rows."""
        rows = np.asarray(rows, dtype=np.int64)
        return GroupedDataset(self.X.row_select(rows), self.y[rows],
                              self.groups[rows], list(self.group_names))

    def with_design(self, X: SparseBinaryDesign) -> "GroupedDataset":
        """Same rows and labels over a different column space."""
        if X.n_rows != self.X.n_rows:
            raise StructuralError("replacement design must keep the rows")
        return GroupedDataset(X, self.y, self.groups, list(self.group_names))


def _sqrt_third(n, N):
    return np.full(n.shape, np.sqrt(1.0 / 3.0))


def _sqrt_share(n, N):
    return np.sqrt(n / N)


def _sqrt_log_ratio_inv(n, N):
    return np.sqrt(np.log(N) / np.log(n))


def _size_ratio_inv(n, N):
    return N / n


def _log_ratio_inv(n, N):
    return np.log(N) / np.log(n)


def _log_ratio(n, N):
    return np.log(n) / np.log(N)


def _sqrt_log_ratio(n, N):
    return np.sqrt(np.log(n) / np.log(N))


def _sqrt_mixed(n, N):
    return np.sqrt((np.log(n) * N) / (np.log(N) * n))


WEIGHT_SCHEMES = {
    "sqrt_third": _sqrt_third,
    "sqrt_share": _sqrt_share,
    "sqrt_log_ratio_inv": _sqrt_log_ratio_inv,
    "size_ratio_inv": _size_ratio_inv,
    "log_ratio_inv": _log_ratio_inv,
    "log_ratio": _log_ratio,
    "sqrt_log_ratio": _sqrt_log_ratio,
    "sqrt_mixed": _sqrt_mixed,
}

# schemes whose formula takes a logarithm of a group size
_LOG_SCHEMES = frozenset(["sqrt_log_ratio_inv", "log_ratio_inv",
                          "log_ratio", "sqrt_log_ratio", "sqrt_mixed"])


def compute_weights(scheme, group_sizes) -> np.ndarray:
    """Group weights r_g from a named scheme or explicit custom values.

    Named schemes need at least two groups; schemes involving log(n_g)
    additionally need every group size >= 2.  Custom values are checked
    for positivity only.  Either way a SeparateRegimeWarning is emitted
    when the weights sum to at most 1, since the penalty then never
    prefers the shared block over pure per-group fits.
    """
    sizes = np.asarray(group_sizes, dtype=np.float64)
    if isinstance(scheme, str):
        if scheme not in WEIGHT_SCHEMES:
            raise ConfigurationError(
                f"unknown weight scheme {scheme!r}; "
                f"valid: {', '.join(sorted(WEIGHT_SCHEMES))} or custom values")
        if sizes.size < 2:
            raise ConfigurationError("named weight schemes need >= 2 groups")
        if scheme in _LOG_SCHEMES and np.any(sizes < 2):
            raise ConfigurationError(
                f"scheme {scheme!r} takes log(n_g); every group size must be >= 2")
        r = WEIGHT_SCHEMES[scheme](sizes, sizes.sum())
    else:
        r = np.asarray(scheme, dtype=np.float64)
        if r.shape != sizes.shape:
            raise ConfigurationError("need one custom weight per group")
    if np.any(r <= 0):
        raise ConfigurationError("weights must be strictly positive")
    if r.sum() <= 1.0:
        warnings.warn(
            f"weights sum to {r.sum():g} <= 1; the fit is equivalent to "
            f"separate per-group regressions (shared coefficients stay 0)",
            SeparateRegimeWarning, stacklevel=2)
    return r


@dataclass
class AugmentedDesign:
    """The stacked one-problem view of a grouped dataset.

    `blocks[j]` is 0 for a shared column and g for group g's block;
    `features[j]` is the original feature id.  `mode` records whether the
    weights live in the penalty factors ("penalty", binary design) or in
    the block values ("scaled", uniform penalty).
    """

    design: SparseBinaryDesign
    penalty_factors: np.ndarray
    blocks: np.ndarray
    features: np.ndarray
    weights: np.ndarray
    n_features: int
    n_groups: int
    mode: str

    def unpack(self, fit: LassoFit, scheme: str = "custom",
               cv: CvResult | None = None) -> "DslFit":
        """Split augmented coefficients into (beta, delta_1..delta_G)."""
        p, G = self.n_features, self.n_groups
        coefs = fit.coefficients.dense()
        beta = coefs[:p]
        deltas = []
        for g in range(1, G + 1):
            block = coefs[g * p:(g + 1) * p]
            if self.mode == "scaled":
                block = block / self.weights[g - 1]
            deltas.append(SparseCoefficients.from_dense(block))
        return DslFit(intercept=fit.intercept,
                      beta=SparseCoefficients.from_dense(beta),
                      deltas=deltas, weights=self.weights.copy(),
                      lam=fit.lam, scheme=scheme, cv=cv)


def build_augmented(ds: GroupedDataset, r,
                    mode: str = "penalty") -> AugmentedDesign:
    """Stack the grouped problem into one N x p(G+1) design.

    Every row keeps its feature pattern twice: once in the shared block
    (columns 0..p-1) and once in its group's block (offset g*p).  With
    mode "penalty" the design stays binary and block g's columns carry
    penalty factor r_g; with mode "scaled" block g's values are 1/r_g and
    the penalty is uniform.
    """
    if mode not in ("penalty", "scaled"):
        raise ConfigurationError(f"unknown augmentation mode {mode!r}")
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (ds.n_groups,):
        raise ConfigurationError("need one weight per group")
    X, p, G = ds.X, ds.n_features, ds.n_groups
    lengths = np.diff(X.row_offsets)
    row_ids = np.repeat(np.arange(X.n_rows, dtype=np.int64), lengths)
    offsets_per_entry = ds.groups[row_ids] * p
    combined_cols = np.concatenate([X.col_indices,
                                    X.col_indices + offsets_per_entry])
    combined_rows = np.concatenate([row_ids, row_ids])
    order = np.lexsort((combined_cols, combined_rows))
    new_cols = combined_cols[order]
    new_offsets = np.zeros(X.n_rows + 1, dtype=np.int64)
    np.cumsum(2 * lengths, out=new_offsets[1:])

    n_aug = p * (G + 1)
    blocks = np.repeat(np.arange(G + 1, dtype=np.int64), p)
    features = np.tile(np.arange(p, dtype=np.int64), G + 1)
    if mode == "penalty":
        scales = None
        pf = np.concatenate([np.ones(p), np.repeat(r, p)])
    else:
        scales = np.concatenate([np.ones(p), np.repeat(1.0 / r, p)])
        pf = np.ones(n_aug)
    design = SparseBinaryDesign(X.n_rows, n_aug, new_offsets, new_cols, scales)
    return AugmentedDesign(design=design, penalty_factors=pf, blocks=blocks,
                           features=features, weights=r, n_features=p,
                           n_groups=G, mode=mode)


@dataclass
class DslFit:
    """A fitted data-shared model: one shared vector plus G deviations."""

    intercept: float
    beta: SparseCoefficients
    deltas: list[SparseCoefficients]
    weights: np.ndarray
    lam: float
    scheme: str = "custom"
    cv: CvResult | None = None

    @property
    def n_groups(self) -> int:
        return len(self.deltas)

    @property
    def n_features(self) -> int:
        return self.beta.size

    def group_coefficients(self, g: int) -> np.ndarray:
        """Dense beta + delta_g for group g (1-based)."""
        if not 1 <= g <= self.n_groups:
            raise DataError(f"no group {g} in a {self.n_groups}-group fit")
        return self.beta.dense() + self.deltas[g - 1].dense()

    def predict(self, X: SparseBinaryDesign, groups) -> np.ndarray:
        groups = np.asarray(groups, dtype=np.int64)
        if groups.shape != (X.n_rows,):
            raise StructuralError("groups length must equal n_rows")
        if X.n_cols != self.n_features:
            raise StructuralError("design column count does not match fit")
        if groups.size and (groups.min() < 1 or groups.max() > self.n_groups):
            bad = groups[(groups < 1) | (groups > self.n_groups)][0]
            raise DataError(f"unknown group id {bad} for this fit")
        pred = np.full(X.n_rows, self.intercept)
        for g in range(1, self.n_groups + 1):
            rows = np.flatnonzero(groups == g)
            if rows.size:
                pred[rows] += X.row_select(rows).dot(self.group_coefficients(g))
        return pred

    def to_json(self) -> str:
        def pairs(c: SparseCoefficients):
            return [[int(j), float(v)] for j, v in zip(c.indices, c.values)]
        doc = {
            "scheme": self.scheme,
            "r": [float(v) for v in self.weights],
            "lambda": self.lam,
            "intercept": self.intercept,
            "beta": pairs(self.beta),
            "delta": {str(g + 1): pairs(d) for g, d in enumerate(self.deltas)},
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str, n_features: int) -> "DslFit":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed fit document: {exc}") from exc
        for key in ("scheme", "r", "lambda", "intercept", "beta", "delta"):
            if key not in doc:
                raise DataError(f"fit document missing key {key!r}")

        def coefs(pairs):
            pairs = sorted((int(j), float(v)) for j, v in pairs)
            return SparseCoefficients(
                n_features,
                np.asarray([q[0] for q in pairs], dtype=np.int64),
                np.asarray([q[1] for q in pairs], dtype=np.float64))

        G = len(doc["delta"])
        deltas = [coefs(doc["delta"][str(g)]) for g in range(1, G + 1)]
        return cls(intercept=float(doc["intercept"]), beta=coefs(doc["beta"]),
                   deltas=deltas,
                   weights=np.asarray(doc["r"], dtype=np.float64),
                   lam=float(doc["lambda"]), scheme=str(doc["scheme"]))


def fit_dsl(ds: GroupedDataset, scheme="sqrt_share",
            opts: LassoOptions | None = None, seed: int = 0,
            mode: str = "penalty") -> DslFit:
    """Fit the data-shared model with a CV-selected lambda.

    `scheme` is a WEIGHT_SCHEMES name or a sequence of custom weights.
    CV folds are stratified by group so each fold preserves the group
    proportions (a plain random fold can starve the smallest group).
    """
    opts = opts or LassoOptions()
    r = compute_weights(scheme, ds.group_sizes)
    aug = build_augmented(ds, r, mode)
    best, cv = fit_cv(aug.design, ds.y, aug.penalty_factors, opts, seed,
                      groups=ds.groups)
    name = scheme if isinstance(scheme, str) else "custom"
    return aug.unpack(best, scheme=name, cv=cv)


def fit_pooled(ds: GroupedDataset, opts: LassoOptions | None = None,
               seed: int = 0) -> LassoFit:
    """One lasso over all rows, groups ignored; lambda by CV."""
    opts = opts or LassoOptions()
    best, _ = fit_cv(ds.X, ds.y, np.ones(ds.n_features), opts, seed,
                     groups=ds.groups)
    return best


def fit_separate(ds: GroupedDataset, opts: LassoOptions | None = None,
                 seed: int = 0) -> list[LassoFit]:
    """One independent lasso per group, each with its own CV lambda."""
    opts = opts or LassoOptions()
    for g in range(1, ds.n_groups + 1):
        if ds.group_sizes[g - 1] < opts.cv_folds:
            raise ConfigurationError(
                f"group {ds.group_names[g - 1]!r} has {ds.group_sizes[g - 1]} "
                f"rows, fewer than cv_folds={opts.cv_folds}")

    def fit_group(g: int) -> LassoFit:
        rows = ds.group_rows(g)
        inner = LassoOptions(**{**opts.__dict__, "threads": 1})
        best, _ = fit_cv(ds.X.row_select(rows), ds.y[rows],
                         np.ones(ds.n_features), inner, seed=seed)
        return best

    order = range(1, ds.n_groups + 1)
    if opts.threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=min(opts.threads,
                                                ds.n_groups)) as pool:
            return list(pool.map(fit_group, order))
    return [fit_group(g) for g in order]


def dsl_objective(ds: GroupedDataset, fit: DslFit) -> float:
    """(1/(2N)) * ||y - pred||^2 + lambda * (||beta||_1 + sum r_g ||delta_g||_1)."""
    pred = fit.predict(ds.X, ds.groups)
    r = ds.y - pred
    penalty = float(np.abs(fit.beta.values).sum()) if fit.beta.nnz else 0.0
    for g, d in enumerate(fit.deltas):
        penalty += fit.weights[g] * float(np.abs(d.values).sum())
    return 0.5 / ds.n_rows * float(r @ r) + fit.lam * penalty


@dataclass
class EvalResult:
    """Test MSE over all rows and within each group."""

    model: str
    weights: str
    all_mse: float
    group_mse: dict[str, float]


def evaluate(fitted, test: GroupedDataset, model: str | None = None,
             weights_label: str | None = None) -> EvalResult:
    """MSE table for a data-shared, pooled, or separate fit.

    `fitted` is a DslFit, a single LassoFit (applied to every group), or a
    sequence of per-group LassoFits.
    """
    if isinstance(fitted, DslFit):
        if test.n_groups > fitted.n_groups:
            raise DataError(
                f"test set has group {test.n_groups}, fit only covers "
                f"{fitted.n_groups} groups")
        pred = fitted.predict(test.X, test.groups)
        model = model or "data_shared"
        weights_label = weights_label if weights_label is not None else fitted.scheme
    elif isinstance(fitted, LassoFit):
        pred = predict(fitted, test.X)
        model = model or "pooled"
        weights_label = weights_label or ""
    else:
        fits = list(fitted)
        if len(fits) < test.n_groups:
            raise DataError(
                f"test set has group {test.n_groups}, only "
                f"{len(fits)} per-group fits given")
        pred = np.empty(test.n_rows)
        for g in range(1, test.n_groups + 1):
            rows = test.group_rows(g)
            pred[rows] = predict(fits[g - 1], test.X.row_select(rows))
        model = model or "separate"
        weights_label = weights_label or ""
    group_mse = {}
    for g in range(1, test.n_groups + 1):
        rows = test.group_rows(g)
        group_mse[test.group_names[g - 1]] = mse(pred[rows], test.y[rows])
    return EvalResult(model=model, weights=weights_label,
                      all_mse=mse(pred, test.y), group_mse=group_mse)
