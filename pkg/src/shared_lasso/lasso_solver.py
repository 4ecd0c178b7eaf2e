"""Coordinate-descent LASSO with per-feature penalty factors.

Solves

    min over mu, beta of  (1/(2n)) * sum_i (y_i - mu - x_i' beta)^2
                          + lambda * sum_j pf_j * |beta_j|

for a sparse binary design with optional per-column scales.  The
squared-error term is divided by n so lambda is comparable across
cross-validation folds of different sizes; multiply by n to translate a
lambda into the unnormalized half-sum-of-squares convention.

Columns are neither centered nor scaled (centering would densify the
design); the unpenalized intercept is re-fit explicitly at the end of
every sweep.  An off-by-default option mimics standardization by scaling
each penalty factor by its column's standard deviation instead of
transforming the data.

Convergence is declared when the largest absolute coefficient change in a
full sweep is at most `tolerance`, with an active-set strategy: sweep the
current support to convergence, then one full sweep to admit violators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._kernels import cd_sweep
from .errors import ConfigurationError, ConvergenceError, DataError, StructuralError
from .seeding import generator
from .sparse_core import SparseBinaryDesign


def soft_threshold(z: float, t: float) -> float:
    """sgn(z) * max(|z| - t, 0) for threshold t >= 0."""
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


class SparseCoefficients:
    """Immutable sparse vector: strictly increasing indices, nonzero values."""

    __slots__ = ("size", "indices", "values")

    def __init__(self, size: int, indices, values):
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        values = np.ascontiguousarray(values, dtype=np.float64)
        if indices.shape != values.shape:
            raise StructuralError("indices and values must have equal length")
        if indices.size:
            if indices[0] < 0 or indices[-1] >= size:
                raise StructuralError("coefficient index out of range")
            if np.any(np.diff(indices) <= 0):
                raise StructuralError("indices must be strictly increasing")
        self.size = int(size)
        self.indices = indices
        self.values = values

    @classmethod
    def from_dense(cls, arr) -> "SparseCoefficients":
        arr = np.asarray(arr, dtype=np.float64)
        idx = np.flatnonzero(arr)
        return cls(arr.size, idx, arr[idx])

    def dense(self) -> np.ndarray:
        out = np.zeros(self.size)
        out[self.indices] = self.values
        return out

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def support(self) -> np.ndarray:
        return self.indices.copy()

    def __repr__(self):
        return f"SparseCoefficients(size={self.size}, nnz={self.nnz})"


@dataclass
class LassoOptions:
    """Solver and cross-validation knobs.

    `threads` parallelizes CV folds (and callers' independent fits); results
    are identical for any thread count.  `track_objective` records the
    objective after every sweep on the returned fit, for diagnostics.
    `standardize_penalties` multiplies each penalty factor by the column
    standard deviation instead of transforming the data; zero-variance
    penalized columns are then held at coefficient 0.
    """

    lambda_grid_size: int = 100
    lambda_min_ratio: float = 1e-3
    max_iterations: int = 10000
    tolerance: float = 1e-7
    cv_folds: int = 10
    fit_intercept: bool = True
    threads: int = 1
    track_objective: bool = False
    standardize_penalties: bool = False

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ConfigurationError("tolerance must be > 0")
        if self.cv_folds < 2:
            raise ConfigurationError("cv_folds must be >= 2")
        if not 0 < self.lambda_min_ratio < 1:
            raise ConfigurationError("lambda_min_ratio must be in (0, 1)")
        if self.lambda_grid_size < 1:
            raise ConfigurationError("lambda_grid_size must be >= 1")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")


@dataclass
class LassoFit:
    """A solution at one lambda.

    `penalty_factors` may be None on fits reconstructed from JSON; it is
    always present on fits produced by the solver.
    """

    intercept: float
    coefficients: SparseCoefficients
    lam: float
    penalty_factors: np.ndarray | None
    n_sweeps: int = 0
    objective_trajectory: list[float] | None = None

    def to_json(self) -> str:
        doc = {
            "lambda": self.lam,
            "intercept": self.intercept,
            "coef": [[int(j), float(v)] for j, v in
                     zip(self.coefficients.indices, self.coefficients.values)],
            "penalty_convention": "per-n",
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str, n_cols: int | None = None) -> "LassoFit":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed fit document: {exc}") from exc
        for key in ("lambda", "intercept", "coef", "penalty_convention"):
            if key not in doc:
                raise DataError(f"fit document missing key {key!r}")
        if doc["penalty_convention"] != "per-n":
            raise DataError(
                f"unsupported penalty convention {doc['penalty_convention']!r}")
        pairs = sorted((int(j), float(v)) for j, v in doc["coef"])
        idx = np.asarray([p[0] for p in pairs], dtype=np.int64)
        vals = np.asarray([p[1] for p in pairs], dtype=np.float64)
        size = n_cols if n_cols is not None else (int(idx[-1]) + 1 if idx.size else 0)
        coef = SparseCoefficients(size, idx, vals)
        return cls(intercept=float(doc["intercept"]), coefficients=coef,
                   lam=float(doc["lambda"]), penalty_factors=None)


@dataclass
class LassoPath:
    """Warm-started fits along a decreasing lambda grid."""

    lambdas: np.ndarray
    fits: list[LassoFit]

    def __post_init__(self):
        if len(self.fits) != self.lambdas.shape[0]:
            raise StructuralError("one fit per lambda required")
        if np.any(np.diff(self.lambdas) >= 0) and self.lambdas.size > 1:
            raise StructuralError("lambda grid must be strictly decreasing")


@dataclass
class CvResult:
    """Cross-validation curve and the selected lambda."""

    lambdas: np.ndarray
    mean_mse: np.ndarray
    se_mse: np.ndarray
    lambda_min: float
    seed: int

    def __post_init__(self):
        if not np.any(self.lambdas == self.lambda_min):
            raise StructuralError("lambda_min must lie on the grid")


def _effective_penalties(X: SparseBinaryDesign, penalty_factors,
                         opts: LassoOptions) -> np.ndarray:
    pf = np.ascontiguousarray(penalty_factors, dtype=np.float64)
    if pf.shape != (X.n_cols,):
        raise StructuralError("penalty_factors length must equal n_cols")
    if np.any(pf < 0):
        raise ConfigurationError("penalty factors must be >= 0")
    if opts.standardize_penalties:
        n = X.n_rows
        sq = X.column_sq_norms()
        means = X.column_counts().astype(np.float64) / n
        if X.scales is not None:
            means *= X.scales
        var = sq / n - means ** 2
        std = np.sqrt(np.maximum(var, 0.0))
        pf = pf * std
        # a zero-variance column cannot be standardized; pin it at zero
        pf[(std == 0.0) & (penalty_factors > 0)] = np.inf
    return pf


def lambda_max(X: SparseBinaryDesign, y, penalty_factors,
               fit_intercept: bool = True) -> float:
    """Smallest lambda at which every penalized coefficient is exactly 0.

    max over j with pf_j > 0 of |sum_i x_ij (y_i - ybar)| / (n * pf_j);
    y is left uncentered when fit_intercept is off.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.n_rows,):
        raise StructuralError("y length must equal n_rows")
    pf = np.ascontiguousarray(penalty_factors, dtype=np.float64)
    if pf.shape != (X.n_cols,):
        raise StructuralError("penalty_factors length must equal n_cols")
    penalized = pf > 0
    if not np.any(penalized):
        raise ConfigurationError("at least one penalty factor must be > 0")
    r = y - y.mean() if fit_intercept else y
    g = np.abs(X.transpose_dot(r))
    with np.errstate(divide="ignore"):
        ratios = g[penalized] / (X.n_rows * pf[penalized])
    return float(ratios.max(initial=0.0))


def _sweep_state(X: SparseBinaryDesign):
    col_offsets, row_indices = X.column_adjacency()
    scales = (X.scales if X.scales is not None
              else np.ones(X.n_cols))
    sq_norms = X.column_sq_norms()
    return col_offsets, row_indices, scales, sq_norms


def _objective(residual, beta, lam, pf, n) -> float:
    return float(0.5 / n * residual @ residual + lam * np.abs(beta) @ pf)


def fit(X: SparseBinaryDesign, y, lam: float, penalty_factors,
        opts: LassoOptions | None = None,
        warm_start: LassoFit | None = None) -> LassoFit:
    """Solve one LASSO problem; see the module docstring for the objective.

    Raises ConvergenceError (with the last iterate on its `.fit`) if
    `max_iterations` sweeps do not reach `tolerance`.
    """
    opts = opts or LassoOptions()
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.n_rows,):
        raise StructuralError("y length must equal n_rows")
    if lam < 0:
        raise ConfigurationError("lambda must be >= 0")
    pf = _effective_penalties(X, penalty_factors, opts)
    n = X.n_rows
    if n == 0:
        raise DataError("cannot fit with zero rows")

    if opts.fit_intercept and np.ptp(y) == 0.0:
        # constant response: intercept-only solution, exactly
        return LassoFit(intercept=float(y[0]),
                        coefficients=SparseCoefficients.from_dense(
                            np.zeros(X.n_cols)),
                        lam=float(lam),
                        penalty_factors=np.asarray(penalty_factors,
                                                   dtype=np.float64),
                        n_sweeps=0,
                        objective_trajectory=[] if opts.track_objective else None)

    col_offsets, row_indices, scales, sq_norms = _sweep_state(X)
    lam_pf = lam * pf

    if warm_start is not None:
        if warm_start.coefficients.size != X.n_cols:
            raise StructuralError("warm start has wrong coefficient length")
        beta = warm_start.coefficients.dense()
        mu = float(warm_start.intercept)
        residual = y - mu - X.dot(beta)
    else:
        beta = np.zeros(X.n_cols)
        mu = float(y.mean()) if opts.fit_intercept else 0.0
        residual = y - mu

    all_cols = np.arange(X.n_cols, dtype=np.int64)
    trajectory: list[float] | None = [] if opts.track_objective else None
    sweeps = 0

    def one_sweep(cols) -> float:
        nonlocal mu, sweeps, residual
        delta = cd_sweep(col_offsets, row_indices, scales, sq_norms,
                         cols, beta, residual, lam_pf, float(n))
        if opts.fit_intercept:
            shift = residual.mean()
            if shift != 0.0:
                mu += shift
                residual -= shift
        sweeps += 1
        if trajectory is not None:
            trajectory.append(_objective(residual, beta, lam, pf, n))
        return delta

    def build_fit() -> LassoFit:
        return LassoFit(intercept=mu,
                        coefficients=SparseCoefficients.from_dense(beta),
                        lam=float(lam),
                        penalty_factors=np.asarray(penalty_factors,
                                                   dtype=np.float64),
                        n_sweeps=sweeps,
                        objective_trajectory=trajectory)

    def converge(cols) -> None:
        while True:
            if sweeps >= opts.max_iterations:
                raise ConvergenceError(
                    f"no convergence after {sweeps} sweeps "
                    f"(lambda={lam:g}, tolerance={opts.tolerance:g})",
                    fit=build_fit())
            if one_sweep(cols) <= opts.tolerance:
                return

    active = np.flatnonzero(beta).astype(np.int64)
    if active.size:
        converge(active)
    while True:
        if sweeps >= opts.max_iterations:
            raise ConvergenceError(
                f"no convergence after {sweeps} sweeps "
                f"(lambda={lam:g}, tolerance={opts.tolerance:g})",
                fit=build_fit())
        if one_sweep(all_cols) <= opts.tolerance:
            return build_fit()
        converge(np.flatnonzero(beta).astype(np.int64))


def _path_grid(lmax: float, opts: LassoOptions) -> np.ndarray:
    if lmax <= 0.0:
        return np.zeros(1)
    grid = np.geomspace(lmax, lmax * opts.lambda_min_ratio,
                        opts.lambda_grid_size)
    grid[0] = lmax
    return grid


def fit_path_on_grid(X: SparseBinaryDesign, y, penalty_factors,
                     grid, opts: LassoOptions | None = None) -> LassoPath:
    """Warm-started fits down an externally supplied decreasing grid."""
    opts = opts or LassoOptions()
    grid = np.asarray(grid, dtype=np.float64)
    fits: list[LassoFit] = []
    warm = None
    for lam in grid:
        warm = fit(X, y, float(lam), penalty_factors, opts, warm_start=warm)
        fits.append(warm)
    return LassoPath(lambdas=grid, fits=fits)


def fit_path(X: SparseBinaryDesign, y, penalty_factors,
             opts: LassoOptions | None = None) -> LassoPath:
    """Log-spaced path from lambda_max down to lambda_min_ratio * lambda_max.

    A degenerate instance (constant response or all-zero design) collapses
    to a single intercept-only fit at lambda 0.
    """
    opts = opts or LassoOptions()
    lmax = lambda_max(X, y, penalty_factors, opts.fit_intercept)
    return fit_path_on_grid(X, y, penalty_factors, _path_grid(lmax, opts), opts)


def _fold_assignment(n: int, folds: int, seed: int, groups=None) -> np.ndarray:
    """Seeded fold ids in [0, folds); stratified by group when given.

    A permutation of each group is dealt round-robin onto the folds, so
    fold sizes within a group differ by at most one.  No groups is the
    same as one group covering everything.
    """
    rng = generator(seed, "cv-folds")
    groups = np.zeros(n) if groups is None else np.asarray(groups)
    assign = np.empty(n, dtype=np.int64)
    for offset, g in enumerate(np.unique(groups)):
        members = np.flatnonzero(groups == g)
        perm = rng.permutation(members)
        # rotate the starting fold per group so totals stay balanced
        assign[perm] = (np.arange(perm.size) + offset) % folds
    return assign


def cross_validate(X: SparseBinaryDesign, y, penalty_factors,
                   opts: LassoOptions | None = None, seed: int = 0,
                   groups=None) -> CvResult:
    """K-fold CV over the full-data lambda grid.

    Folds are a seeded near-equal random partition (stratified within
    `groups` when given, so every fold sees every group).  Ties in mean
    MSE break toward the larger lambda.  Fold fits run on `opts.threads`
    threads; the result is identical for any thread count.
    """
    opts = opts or LassoOptions()
    y = np.asarray(y, dtype=np.float64)
    n = X.n_rows
    if n < opts.cv_folds:
        raise ConfigurationError(
            f"need at least cv_folds={opts.cv_folds} rows, have {n}")
    lmax = lambda_max(X, y, penalty_factors, opts.fit_intercept)
    grid = _path_grid(lmax, opts)
    assign = _fold_assignment(n, opts.cv_folds, seed, groups)

    def fold_mse(k: int) -> np.ndarray:
        train = np.flatnonzero(assign != k)
        test = np.flatnonzero(assign == k)
        Xtr = X.row_select(train)
        path = fit_path_on_grid(Xtr, y[train], penalty_factors, grid, opts)
        Xte = X.row_select(test)
        return np.asarray([mse(predict(f, Xte), y[test]) for f in path.fits])

    if opts.threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            rows = list(pool.map(fold_mse, range(opts.cv_folds)))
    else:
        rows = [fold_mse(k) for k in range(opts.cv_folds)]
    per_fold = np.vstack(rows)
    mean = per_fold.mean(axis=0)
    se = per_fold.std(axis=0, ddof=1) / np.sqrt(opts.cv_folds)
    # grid is decreasing, so the first argmin is the largest such lambda
    best = int(np.argmin(mean))
    return CvResult(lambdas=grid, mean_mse=mean, se_mse=se,
                    lambda_min=float(grid[best]), seed=seed)


def fit_cv(X: SparseBinaryDesign, y, penalty_factors,
           opts: LassoOptions | None = None, seed: int = 0,
           groups=None) -> tuple[LassoFit, CvResult]:
    """Select lambda by CV, then fit the full data at that lambda.

    The final fit warm-starts down the path to lambda_min, which is both
    faster and better conditioned than a cold solve at a small lambda.
    """
    opts = opts or LassoOptions()
    cv = cross_validate(X, y, penalty_factors, opts, seed, groups)
    keep = cv.lambdas >= cv.lambda_min
    path = fit_path_on_grid(X, np.asarray(y, dtype=np.float64),
                            penalty_factors, cv.lambdas[keep], opts)
    return path.fits[-1], cv


def predict(fit_: LassoFit, X: SparseBinaryDesign) -> np.ndarray:
    """mu + X beta."""
    if fit_.coefficients.size != X.n_cols:
        raise StructuralError(
            f"fit has {fit_.coefficients.size} coefficients, "
            f"design has {X.n_cols} columns")
    pred = np.full(X.n_rows, fit_.intercept)
    if fit_.coefficients.nnz:
        pred += X.dot(fit_.coefficients.dense())
    return pred


def mse(pred, y) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if pred.shape != y.shape:
        raise StructuralError("prediction and response lengths differ")
    diff = pred - y
    return float(diff @ diff / diff.size)


def kkt_gap(X: SparseBinaryDesign, y, fit_: LassoFit) -> float:
    """Largest stationarity violation of a fit, in gradient units.

    For nonzero beta_j the subgradient condition pins (1/n) X_j' r at
    lambda * pf_j * sgn(beta_j); for zero beta_j it only bounds the
    magnitude.  Returns the max excess over all coordinates.
    """
    if fit_.penalty_factors is None:
        raise ConfigurationError("fit carries no penalty factors")
    y = np.asarray(y, dtype=np.float64)
    r = y - predict(fit_, X)
    g = X.transpose_dot(r) / X.n_rows
    beta = fit_.coefficients.dense()
    bound = fit_.lam * np.asarray(fit_.penalty_factors, dtype=np.float64)
    nz = beta != 0
    gap_nz = np.abs(g[nz] - bound[nz] * np.sign(beta[nz]))
    gap_z = np.abs(g[~nz]) - bound[~nz]
    worst = 0.0
    if gap_nz.size:
        worst = max(worst, float(gap_nz.max()))
    if gap_z.size:
        worst = max(worst, float(gap_z.max(initial=0.0)))
    return worst
