from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..market_data import ReturnMatrix

log = logging.getLogger(__name__)

REG_EIG_FLOOR = 1e-10
REG_SCALE = 1e-8


@dataclass(frozen=True)
class PortfolioWeights:
    assets: list[str]
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.shape != (len(self.assets),):
            raise ValueError("one weight per asset required")
        validate_weights(w)

    def as_dict(self) -> dict[str, float]:
        return {a: float(w) for a, w in zip(self.assets, self.weights)}


@dataclass(frozen=True)
class MomentEstimates:
    assets: list[str]
    mean_returns: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        c = self.covariance
        if not np.allclose(c, c.T, atol=1e-10, rtol=0):
            raise ValueError("covariance is not symmetric")
        if np.any(np.diag(c) < 0):
            raise ValueError("covariance has a negative variance")


@dataclass(frozen=True)
class FrontierPoint:
    weights: PortfolioWeights
    expected_return: float
    risk: float


def validate_weights(w: np.ndarray, tol_sum: float = 1e-8, tol_neg: float = 1e-12) -> None:
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if abs(w.sum() - 1.0) > tol_sum:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    if np.any(w < -tol_neg):
        raise ValueError(f"negative weight {w.min()!r} in a long-only portfolio")


def clean_weights(w: np.ndarray) -> np.ndarray:
    """Clip numerical negatives and renormalise."""
    w = np.where(w < 0, 0.0, w)
    return w / w.sum()


def estimate_moments(returns: ReturnMatrix, assets: Sequence[str]) -> MomentEstimates:
    """Sample means and unbiased sample covariance for ``assets``."""
    x = returns.columns(list(assets))
    if x.shape[0] < 2:
        raise ValueError("need at least 2 return rows")
    cov = np.cov(x, rowvar=False, ddof=1).reshape(len(assets), len(assets))
    return MomentEstimates(list(assets), x.mean(axis=0), (cov + cov.T) / 2.0)


def regularize_covariance(cov: np.ndarray) -> np.ndarray:
    """Add ``1e-8 * trace / n`` to the diagonal when the smallest eigenvalue
    falls below 1e-10."""
    n = len(cov)
    if np.linalg.eigvalsh(cov).min() < REG_EIG_FLOOR:
        lam = REG_SCALE * np.trace(cov) / n
        if lam <= 0:
            lam = REG_SCALE
        log.debug("regularising covariance with lambda=%g", lam)
        return cov + lam * np.eye(n)
    return cov
