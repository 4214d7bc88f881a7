"""Prevalence as a function of a scalar covariate.

The target population's prevalence may vary with an observed covariate z
while the class-conditional score distributions stay fixed.  Smoothing the
scores of the unlabeled sample against z and applying the ratio correction
pointwise yields a prevalence curve; smoothing thresholded scores instead
gives the uncorrected classify-and-count curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EstimationError, RawDataset, ScoreFunction
from .estimators import DEFAULT_MIN_DENOM


def nadaraya_watson(
    z: np.ndarray, g: np.ndarray, bandwidth: float, queries: np.ndarray
) -> np.ndarray:
    """Gaussian-kernel local average of g against z at each query point.

    Queries so far from the data that every kernel weight underflows to zero
    fall back to the nearest data point's value.
    """
    z = np.asarray(z, dtype=float).ravel()
    g = np.asarray(g, dtype=float).ravel()
    queries = np.asarray(queries, dtype=float).ravel()
    if z.size == 0 or z.size != g.size:
        raise EstimationError("need matching, nonempty covariate and score arrays")
    if not bandwidth > 0:
        raise EstimationError(f"bandwidth must be positive, got {bandwidth}")
    weights = np.exp(-0.5 * ((queries[:, None] - z[None, :]) / bandwidth) ** 2)
    totals = weights.sum(axis=1)
    out = np.empty(queries.size)
    covered = totals > 0.0
    out[covered] = (weights[covered] @ g) / totals[covered]
    if not np.all(covered):
        nearest = np.abs(queries[~covered, None] - z[None, :]).argmin(axis=1)
        out[~covered] = g[nearest]
    return out


def cv_bandwidth(z: np.ndarray, values: np.ndarray, candidates=None) -> float:
    """Leave-one-out cross-validated bandwidth for the local average.

    Each candidate is scored by the mean squared error of predicting every
    point from all the others; ties go to the smallest candidate.  The
    default candidates scale sd(z) * n^(-1/5) by powers of two.
    """
    z = np.asarray(z, dtype=float).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if z.size < 3 or z.size != values.size:
        raise EstimationError("cross-validation needs at least 3 matching pairs")
    if candidates is None:
        spread = float(np.std(z, ddof=1))
        if spread <= 0.0:
            raise EstimationError("covariate has no spread; pass a bandwidth explicitly")
        base = spread * z.size ** (-0.2)
        candidates = [base * factor for factor in (0.25, 0.5, 1.0, 2.0, 4.0)]
    candidates = [float(h) for h in candidates]
    if not candidates or any(h <= 0 for h in candidates):
        raise EstimationError("bandwidth candidates must be positive")
    best_h, best_err = None, np.inf
    for h in sorted(set(candidates)):
        err = 0.0
        for start in range(0, z.size, 512):
            stop = min(start + 512, z.size)
            local = np.arange(stop - start)
            weights = np.exp(-0.5 * ((z[start:stop, None] - z[None, :]) / h) ** 2)
            weights[local, local + start] = 0.0
            totals = weights.sum(axis=1)
            preds = np.divide(weights @ values, totals, out=np.zeros(stop - start), where=totals > 0)
            empty = totals == 0.0
            if np.any(empty):
                # an all-underflow row falls back to its nearest neighbour,
                # as the smoother itself would; predicting the held-out value
                # would declare every vanishing bandwidth perfect
                gaps = np.abs(z[start:stop, None] - z[None, :])
                gaps[local, local + start] = np.inf
                preds[empty] = values[gaps.argmin(axis=1)[empty]]
            err += float(np.sum((preds - values[start:stop]) ** 2))
        if err < best_err:
            best_h, best_err = h, err
    return float(best_h)


@dataclass(frozen=True)
class RegressionCurve:
    """A prevalence estimate per grid point, with the bandwidth that made it."""

    grid: np.ndarray
    values: np.ndarray
    bandwidth: float
    method: str

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.grid.tolist(), self.values.tolist()))


def _validate_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise EstimationError("evaluation grid must be nonempty and finite")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise EstimationError("evaluation grid must be strictly increasing")
    return grid


def _unlabeled_pairs(
    data: RawDataset, g: ScoreFunction, bandwidth: float | str | None
) -> tuple[np.ndarray, np.ndarray, float]:
    if data.covariate is None:
        raise EstimationError("regression needs a covariate column")
    idx = data.unlabeled_indices()
    if idx.size == 0:
        raise EstimationError("no unlabeled rows")
    z = data.covariate[idx]
    values = g.scores(data.features[idx]).ravel()
    if bandwidth == "cv":
        bandwidth = cv_bandwidth(z, values)
    elif isinstance(bandwidth, str):
        raise EstimationError(f"bandwidth must be a positive number or 'cv', got {bandwidth!r}")
    elif bandwidth is None:
        spread = float(np.std(z, ddof=1)) if z.size > 1 else 0.0
        if spread <= 0.0:
            raise EstimationError("covariate has no spread; pass a bandwidth explicitly")
        bandwidth = spread * z.size ** (-0.2)
    return z, values, float(bandwidth)


def ratio_regress(
    data: RawDataset,
    g: ScoreFunction,
    grid: np.ndarray,
    bandwidth: float | str | None = None,
    min_denom: float = DEFAULT_MIN_DENOM,
) -> RegressionCurve:
    """Prevalence curve: ratio correction applied to a smoothed score curve.

    The class score means come from the labeled sample (they do not depend
    on z); the local unlabeled mean of g comes from a Nadaraya-Watson
    smoother.  The default bandwidth is sd(z) * n^(-1/5); pass "cv" for the
    leave-one-out choice.  Values are trimmed to [0, 1].
    """
    grid = _validate_grid(grid)
    if data.n_classes != 2:
        raise EstimationError("prevalence regression is binary")
    labeled0 = data.labeled_class_indices(0)
    labeled1 = data.labeled_class_indices(1)
    if labeled0.size == 0 or labeled1.size == 0:
        raise EstimationError("both labeled classes must be nonempty")
    mu0 = float(g.scores(data.features[labeled0]).mean())
    mu1 = float(g.scores(data.features[labeled1]).mean())
    denom = mu1 - mu0
    if abs(denom) <= min_denom:
        raise EstimationError(
            f"separability violated: |mu1 - mu0| = {abs(denom):.3e} <= {min_denom:.3e}"
        )
    z, values, bandwidth = _unlabeled_pairs(data, g, bandwidth)
    smoothed = nadaraya_watson(z, values, bandwidth, grid)
    curve = np.clip((smoothed - mu0) / denom, 0.0, 1.0)
    return RegressionCurve(grid=grid, values=curve, bandwidth=bandwidth, method="ratio")


def cc_regress(
    data: RawDataset,
    g: ScoreFunction,
    grid: np.ndarray,
    threshold: float = 0.5,
    bandwidth: float | str | None = None,
) -> RegressionCurve:
    """Classify-and-count curve: smoothed fraction of scores above a threshold."""
    grid = _validate_grid(grid)
    z, values, bandwidth = _unlabeled_pairs(data, g, bandwidth)
    indicator = (values > threshold).astype(float)
    curve = np.clip(nadaraya_watson(z, indicator, bandwidth, grid), 0.0, 1.0)
    return RegressionCurve(grid=grid, values=curve, bandwidth=bandwidth, method="cc")
