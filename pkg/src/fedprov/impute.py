"""Chained-equation imputation of the five optional lab features.

A deliberately simple MICE variant: all imputable columns are continuous,
so every conditional model is a linear least-squares regression on the
other 13 columns. The default is deterministic regression imputation
(noise off), producing a single completed dataset.

Train and test sets are imputed by separate calls; nothing is shared.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rng import substream
from .schema import FEATURE_COLUMNS, Dataset, LabeledMatrix, encode_dataset

_RIDGE_LAMBDA = 1e-6


@dataclass(frozen=True, slots=True)
class MiceConfig:
    n_iterations: int = 10
    noise: bool = False  # off -> deterministic regression imputation
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_iterations < 1:
            raise ValidationError("n_iterations must be >= 1")


def _encode_checked(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    if len(ds.records) == 0:
        raise ValidationError("cannot impute an empty dataset")
    x, y = encode_dataset(ds)
    miss = np.isnan(x)
    fully_missing = np.flatnonzero(miss.all(axis=0))
    if fully_missing.size:
        names = [FEATURE_COLUMNS[i] for i in fully_missing]
        raise ValidationError(f"column(s) {names} have no observed values")
    if miss.any(axis=0).all():
        raise ValidationError("at least one fully observed column is required")
    return x, y


def initial_fill(ds: Dataset) -> LabeledMatrix:
    """Replace every missing cell with its column's observed mean."""
    x, y = _encode_checked(ds)
    for c in np.flatnonzero(np.isnan(x).any(axis=0)):
        col = x[:, c]
        col[np.isnan(col)] = np.nanmean(col)
    return LabeledMatrix(x=x, y=y)


def _fit_predict(
    design: np.ndarray, target: np.ndarray, query: np.ndarray, column: str
) -> tuple[np.ndarray, np.ndarray]:
    """Least squares with intercept; ridge fallback on rank deficiency.

    Returns (predictions at query rows, residuals at design rows).
    """
    a = np.column_stack([np.ones(design.shape[0]), design])
    q = np.column_stack([np.ones(query.shape[0]), query])
    coef, _, rank, _ = np.linalg.lstsq(a, target, rcond=None)
    if rank < a.shape[1]:
        warnings.warn(
            f"rank-deficient design while imputing {column!r}; "
            f"falling back to ridge (lambda={_RIDGE_LAMBDA})"
        )
        gram = a.T @ a + _RIDGE_LAMBDA * np.eye(a.shape[1])
        coef = np.linalg.solve(gram, a.T @ target)
    return q @ coef, target - a @ coef


def _chained_pass(
    x: np.ndarray,
    miss: np.ndarray,
    order: np.ndarray,
    noise_rng: np.random.Generator | None,
) -> None:
    """One sweep over the incomplete columns, in ascending-missingness order."""
    for c in order:
        rows_miss = miss[:, c]
        rows_obs = ~rows_miss
        others = [j for j in range(x.shape[1]) if j != c]
        pred, resid = _fit_predict(
            x[np.ix_(rows_obs, others)], x[rows_obs, c],
            x[np.ix_(rows_miss, others)], FEATURE_COLUMNS[c],
        )
        if noise_rng is not None:
            dof = max(int(rows_obs.sum()) - len(others) - 1, 1)
            sd = float(np.sqrt((resid @ resid) / dof))
            pred = pred + noise_rng.normal(0.0, sd, size=pred.size)
        x[rows_miss, c] = pred


def mice_impute_with_history(
    ds: Dataset, cfg: MiceConfig
) -> tuple[LabeledMatrix, list[float]]:
    """Chained-equation imputation, also reporting per-iteration movement.

    The history holds one entry per iteration: the Frobenius norm of the
    change in the imputed cells during that sweep (a convergence
    diagnostic; the first entry measures movement away from the mean fill).
    """
    x, y = _encode_checked(ds)
    miss = np.isnan(x)
    incomplete = np.flatnonzero(miss.any(axis=0))

    # initial mean fill
    for c in incomplete:
        col = x[:, c]
        col[miss[:, c]] = np.nanmean(col)

    if incomplete.size == 0:
        return LabeledMatrix(x=x, y=y), []

    frac = miss[:, incomplete].mean(axis=0)
    order = incomplete[np.lexsort((incomplete, frac))]  # ascending missingness, ties by index
    noise_rng = substream(cfg.seed, "mice-noise") if cfg.noise else None

    deltas: list[float] = []
    prev = x[miss].copy()
    for _ in range(cfg.n_iterations):
        _chained_pass(x, miss, order, noise_rng)
        current = x[miss]
        deltas.append(float(np.linalg.norm(current - prev)))
        prev = current.copy()
    return LabeledMatrix(x=x, y=y), deltas


def mice_impute(ds: Dataset, cfg: MiceConfig | None = None) -> LabeledMatrix:
    """Fill missing values; observed cells pass through bit-identically."""
    matrix, _ = mice_impute_with_history(ds, cfg or MiceConfig())
    return matrix
