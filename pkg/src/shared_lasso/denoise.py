"""Global soft-threshold de-noising of fitted coefficients.

A converged lasso fit still carries many small coefficients that are
mostly noise.  Shrinking every coefficient toward zero by the universal
threshold

    t = sqrt(2 * ln(n)) * gamma1 * sigma / sqrt(n)

kills those while barely moving the large ones.  gamma1 is treated as a
pure tuning knob swept over [0, 1/2] on a 100-point grid against held-out
MSE; sigma defaults to the residual standard deviation of the fit on its
training data, and n to the training row count, but both are parameters
since neither choice is canonical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dsl import DslFit, GroupedDataset
from .errors import ConfigurationError
from .lasso_solver import LassoFit, SparseCoefficients, mse, predict

GAMMA_GRID_SIZE = 100


def donoho_threshold(n, gamma1: float, sigma: float) -> float:
    """sqrt(2 ln n) * gamma1 * sigma / sqrt(n); n may be fractional."""
    if n < 2:
        raise ConfigurationError("threshold needs n >= 2")
    if gamma1 < 0:
        raise ConfigurationError("gamma1 must be >= 0")
    if sigma < 0:
        raise ConfigurationError("sigma must be >= 0")
    return math.sqrt(2.0 * math.log(n)) * gamma1 * sigma / math.sqrt(n)


def _shrink(coefs: SparseCoefficients, t: float) -> SparseCoefficients:
    values = np.sign(coefs.values) * np.maximum(np.abs(coefs.values) - t, 0.0)
    keep = values != 0.0
    return SparseCoefficients(coefs.size, coefs.indices[keep], values[keep])


def apply_threshold(fitted, t: float):
    """Soft-threshold every coefficient by t; the intercept is untouched.

    Accepts a LassoFit or a DslFit and returns the same kind.
    """
    if t < 0:
        raise ConfigurationError("threshold must be >= 0")
    if isinstance(fitted, DslFit):
        return replace(fitted, beta=_shrink(fitted.beta, t),
                       deltas=[_shrink(d, t) for d in fitted.deltas])
    if isinstance(fitted, LassoFit):
        return replace(fitted, coefficients=_shrink(fitted.coefficients, t))
    raise ConfigurationError(f"cannot threshold a {type(fitted).__name__}")


def estimate_sigma(fitted, train: GroupedDataset) -> float:
    """Residual standard deviation of a fit on its training data."""
    if isinstance(fitted, DslFit):
        pred = fitted.predict(train.X, train.groups)
    else:
        pred = predict(fitted, train.X)
    return float(np.std(train.y - pred))


@dataclass
class DenoiseSweep:
    """Held-out MSE as a function of gamma1."""

    gammas: np.ndarray
    thresholds: np.ndarray
    mses: np.ndarray
    argmin_gamma: float
    sigma: float
    n: int

    def summary(self) -> dict:
        best = int(np.argmin(self.mses))
        return {"argmin_gamma": float(self.argmin_gamma),
                "min_mse": float(self.mses[best]),
                "sigma": float(self.sigma), "n": int(self.n)}


def sweep_gamma(fitted, test: GroupedDataset, sigma: float,
                n) -> DenoiseSweep:
    """Threshold the fit at each gamma1 on the grid and score it on `test`.

    The grid is GAMMA_GRID_SIZE evenly spaced points with endpoints
    exactly 0 and 0.5; ties in MSE resolve toward the smaller gamma1.
    """
    gammas = np.linspace(0.0, 0.5, GAMMA_GRID_SIZE)
    thresholds = np.array([donoho_threshold(n, float(g), sigma)
                           for g in gammas])
    mses = np.empty(GAMMA_GRID_SIZE)
    for i, t in enumerate(thresholds):
        shrunk = apply_threshold(fitted, float(t))
        if isinstance(shrunk, DslFit):
            pred = shrunk.predict(test.X, test.groups)
        else:
            pred = predict(shrunk, test.X)
        mses[i] = mse(pred, test.y)
    best = int(np.argmin(mses))
    return DenoiseSweep(gammas=gammas, thresholds=thresholds, mses=mses,
                        argmin_gamma=float(gammas[best]), sigma=float(sigma),
                        n=int(n))
