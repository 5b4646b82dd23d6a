"""Performance metrics on a return range and stability of selections between
two training runs.

Ratios whose denominator is a zero standard deviation are reported as
``None`` (written out as ``undefined``), never as NaN or inf.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

from .market_data import (
    CorrelationMatrix,
    DataSplit,
    PriceMatrix,
    compute_returns,
    pearson_correlation,
    perturb_correlation,
    shift_split,
)
from .selection import SelectionResult
from .weighting import PortfolioWeights

UNDEFINED = None
_ZERO_STD = 1e-14


@dataclass(frozen=True)
class PerformanceReport:
    avg_pairwise_correlation: float | None
    total_return: float
    risk: float
    sharpe: float | None
    information_ratio: float | None
    m2: float | None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BenchmarkSeries:
    returns: np.ndarray
    total_return: float
    risk: float

    @classmethod
    def from_returns(cls, series, compounding: bool = True) -> "BenchmarkSeries":
        series = np.asarray(series, dtype=float)
        return cls(series, total_return(series, compounding), _std(series))


def _std(series: np.ndarray) -> float:
    return float(np.std(series, ddof=1)) if len(series) > 1 else 0.0


def _is_zero(std: float, series: np.ndarray) -> bool:
    scale = max(1.0, float(np.abs(series).max())) if len(series) else 1.0
    return std <= _ZERO_STD * scale


def total_return(series: np.ndarray, compounding: bool = True) -> float:
    """Compounded ``prod(1 + r) - 1``, or the plain sum when ``compounding``
    is off."""
    series = np.asarray(series, dtype=float)
    if compounding:
        return float(np.prod(1.0 + series) - 1.0)
    return float(series.sum())


def portfolio_returns(weights: PortfolioWeights, returns, rows: tuple[int, int] | None = None) -> np.ndarray:
    """Per-period ``sum_i w_i r_i(t)`` over return rows ``[start, stop)``
    (every row by default), rebalanced each period."""
    x = returns.columns(weights.assets)
    if rows is not None:
        start, stop = rows
        if not 0 <= start < stop <= len(x):
            raise ValueError(f"return range {rows} is empty or outside [0, {len(x)})")
        x = x[start:stop]
    if len(x) == 0:
        raise ValueError("empty return range")
    return x @ weights.weights


def equal_weight_benchmark(returns, compounding: bool = True) -> BenchmarkSeries:
    return BenchmarkSeries.from_returns(returns.values.mean(axis=1), compounding)


def average_pairwise_correlation(corr: CorrelationMatrix, assets: Sequence[str]) -> float | None:
    assets = list(assets)
    if len(assets) < 2:
        return UNDEFINED
    sub = corr.restrict(assets).values
    iu = np.triu_indices(len(assets), 1)
    return float(sub[iu].mean())


def m2_ratio(sharpe: float | None, bench_risk: float, risk_free: float = 0.0) -> float | None:
    """Sharpe ratio rescaled to the benchmark's risk: ``SR * sigma_b + rf``."""
    return UNDEFINED if sharpe is None else sharpe * bench_risk + risk_free


def metric_suite(
    series,
    bench: BenchmarkSeries,
    risk_free: float = 0.0,
    corr: CorrelationMatrix | None = None,
    weights: PortfolioWeights | None = None,
    compounding: bool = True,
) -> PerformanceReport:
    series = np.asarray(series, dtype=float)
    if len(series) == 0:
        raise ValueError("empty return series")
    if len(series) != len(bench.returns):
        raise ValueError("portfolio and benchmark series differ in length")
    r_p = total_return(series, compounding)
    risk = _std(series)
    sharpe = UNDEFINED if _is_zero(risk, series) else (r_p - risk_free) / risk
    excess = series - bench.returns
    te = _std(excess)
    ir = UNDEFINED if _is_zero(te, excess) else (r_p - bench.total_return) / te
    m2 = m2_ratio(sharpe, bench.risk, risk_free)
    avg_corr = None
    if corr is not None and weights is not None:
        avg_corr = average_pairwise_correlation(corr, weights.assets)
    return PerformanceReport(avg_corr, r_p, risk, sharpe, ir, m2)


def jaccard(a: Iterable, b: Iterable) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        raise ValueError("jaccard similarity of two empty sets is undefined")
    return len(a & b) / len(a | b)


def _sets(run) -> list[frozenset]:
    if isinstance(run, SelectionResult):
        return run.sets()
    return [frozenset(s) for s in run]


def stability_matrix(run1, run2) -> np.ndarray:
    """``SM[i, j] = jaccard(run1[i], run2[j])``; runs are SelectionResults
    or plain lists of asset collections."""
    s1, s2 = _sets(run1), _sets(run2)
    if not s1 or not s2:
        raise ValueError("both runs need at least one subset")
    return np.array([[jaccard(a, b) for b in s2] for a in s1])


def stability_score(sm: np.ndarray) -> float:
    """Mean over the k1 row maxima and the k2 column maxima together."""
    sm = np.asarray(sm, dtype=float)
    if sm.size == 0:
        raise ValueError("empty stability matrix")
    maxima = np.concatenate([sm.max(axis=1), sm.max(axis=0)])
    return float(maxima.mean())


Runner = Callable[[CorrelationMatrix, int], SelectionResult]


def noise_stability(runner: Runner, corr: CorrelationMatrix, sigma: float, seed: int = 0, noise_seed: int = 0) -> float:
    """Selection on ``corr`` versus on a noisy copy, same strategy seed."""
    first = runner(corr, seed)
    second = runner(perturb_correlation(corr, sigma, noise_seed), seed)
    return stability_score(stability_matrix(first, second))


def train_correlation(prices: PriceMatrix, train_range: tuple[int, int]) -> CorrelationMatrix:
    a, b = train_range
    return pearson_correlation(compute_returns(prices.rows(a, b)))


def time_stability(runner: Runner, prices: PriceMatrix, split: DataSplit, offset: int, seed: int = 0) -> float:
    """Selection on the train range versus the range shifted by ``offset``."""
    shifted = shift_split(split, offset, prices.n_periods)
    first = runner(train_correlation(prices, split.train_range), seed)
    second = runner(train_correlation(prices, shifted.train_range), seed)
    return stability_score(stability_matrix(first, second))


def mean_abs_intra_correlation(corr: CorrelationMatrix, subsets) -> float:
    """Average over subsets of each subset's mean pairwise ``|rho|``."""
    idx = {a: i for i, a in enumerate(corr.assets)}
    vals = []
    for s in _sets(subsets):
        pairs = list(combinations(sorted(s, key=idx.__getitem__), 2))
        vals.append(np.mean([abs(corr.values[idx[a], idx[b]]) for a, b in pairs]))
    return float(np.mean(vals))


def market_mean_abs_correlation(corr: CorrelationMatrix) -> float:
    iu = np.triu_indices(corr.n_assets, 1)
    return float(np.abs(corr.values[iu]).mean())
