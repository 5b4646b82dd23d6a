"""Price panels, returns, correlations and the perturbed inputs used by the
stability tests."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

_MISSING = {"", "na", "nan", "null", "none", "n/a"}


class DataError(ValueError):
    """Raised when an input panel cannot be turned into a valid market."""


@dataclass(frozen=True)
class PriceMatrix:
    assets: list[str]
    timestamps: list
    values: np.ndarray
    dropped: tuple[str, ...] = field(default=())

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape != (len(self.timestamps), len(self.assets)):
            raise DataError(
                f"price values have shape {values.shape}, expected "
                f"({len(self.timestamps)}, {len(self.assets)})"
            )
        if len(set(self.assets)) != len(self.assets):
            raise DataError("asset identifiers must be unique")
        if values.shape[0] < 3:
            raise DataError("a price panel needs at least 3 timestamps")
        if not np.all(np.isfinite(values)):
            raise DataError("price panel contains missing or non-finite cells")
        if np.any(values <= 0):
            raise DataError("non-positive price encountered")

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def n_periods(self) -> int:
        return len(self.timestamps)

    def rows(self, start: int, stop: int) -> "PriceMatrix":
        """Sub-panel over the half-open timestamp interval [start, stop)."""
        return PriceMatrix(self.assets, self.timestamps[start:stop], self.values[start:stop])


@dataclass(frozen=True)
class ReturnMatrix:
    assets: list[str]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[1] != len(self.assets):
            raise DataError(f"return values have shape {values.shape} for {len(self.assets)} assets")

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    def columns(self, assets: Sequence[str]) -> np.ndarray:
        index = {a: i for i, a in enumerate(self.assets)}
        missing = [a for a in assets if a not in index]
        if missing:
            raise KeyError(f"assets not in return matrix: {missing}")
        return self.values[:, [index[a] for a in assets]]


@dataclass(frozen=True)
class CorrelationMatrix:
    assets: list[str]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        n = len(self.assets)
        if values.shape != (n, n):
            raise DataError(f"correlation matrix has shape {values.shape} for {n} assets")
        if not np.allclose(values, values.T, atol=1e-12, rtol=0.0):
            raise DataError("correlation matrix is not symmetric")
        if np.any(np.diag(values) != 1.0):
            raise DataError("correlation matrix diagonal must be exactly 1")
        if np.any(values < -1.0) or np.any(values > 1.0):
            raise DataError("correlation entries must lie in [-1, 1]")

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    def restrict(self, assets: Sequence[str]) -> "CorrelationMatrix":
        index = {a: i for i, a in enumerate(self.assets)}
        idx = [index[a] for a in assets]
        return CorrelationMatrix(list(assets), self.values[np.ix_(idx, idx)])


@dataclass(frozen=True)
class DataSplit:
    train_range: tuple[int, int]
    test_range: tuple[int, int]
    # shifted splits (time stability) only use the train range
    allow_overlap: bool = False

    def __post_init__(self):
        (a, b), (c, d) = self.train_range, self.test_range
        if not (a < b and c < d):
            raise DataError(f"empty range in split {self.train_range}/{self.test_range}")
        if b > c and not self.allow_overlap:
            raise DataError("train range must end at or before the test range starts")


def _parse_cell(text: str) -> float:
    if text.strip().lower() in _MISSING:
        return math.nan
    return float(text)


def load_prices(
    path: str | Path,
    delimiter: str = ",",
    time_column: int = 0,
    integer_index: bool = False,
) -> PriceMatrix:
    """Read a delimited price panel with a header row of asset identifiers.

    One column holds the timestamps (dates as strings, or integers when
    ``integer_index`` is set); every other column is an asset. Assets with
    any missing cell are dropped and listed in ``PriceMatrix.dropped``.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh, delimiter=delimiter) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise DataError(f"{path} has no data rows")

    header = [h.strip() for h in rows[0]]
    asset_cols = [j for j in range(len(header)) if j != time_column]
    timestamps, cells = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        stamp = row[time_column].strip()
        timestamps.append(int(stamp) if integer_index else stamp)
        try:
            cells.append([_parse_cell(row[j]) for j in asset_cols])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc

    values = np.array(cells, dtype=float)
    assets = [header[j] for j in asset_cols]
    complete = ~np.isnan(values).any(axis=0)
    dropped = tuple(a for a, ok in zip(assets, complete) if not ok)
    for a in dropped:
        log.warning("dropping asset %s: missing values", a)
    if complete.sum() < 2:
        raise DataError(f"{path}: fewer than 2 complete assets")
    values = values[:, complete]
    if np.any(values <= 0):
        raise DataError("non-positive price encountered")
    return PriceMatrix([a for a, ok in zip(assets, complete) if ok], timestamps, values, dropped)


def save_prices(prices: PriceMatrix, path: str | Path, delimiter: str = ",") -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["time", *prices.assets])
        for stamp, row in zip(prices.timestamps, prices.values):
            w.writerow([stamp, *(repr(float(v)) for v in row)])


def compute_returns(prices: PriceMatrix) -> ReturnMatrix:
    """Simple per-period returns ``p[t+1] / p[t] - 1``."""
    v = prices.values
    return ReturnMatrix(list(prices.assets), v[1:] / v[:-1] - 1.0)


def pearson_correlation(returns: ReturnMatrix) -> CorrelationMatrix:
    x = returns.values
    if x.shape[0] < 2:
        raise DataError("need at least 2 return rows for a correlation")
    centered = x - x.mean(axis=0)
    ss = np.sqrt((centered**2).sum(axis=0))
    flat = [a for a, s, r in zip(returns.assets, ss, np.ptp(x, axis=0)) if s == 0.0 or r == 0.0]
    if flat:
        raise DataError(f"zero return variance for asset(s): {', '.join(flat)}")
    z = centered / ss
    corr = z.T @ z
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(list(returns.assets), corr)


def perturb_correlation(corr: CorrelationMatrix, sigma: float, seed: int) -> CorrelationMatrix:
    """Add symmetric N(0, sigma) noise to the off-diagonal, clamp to [-1, 1]."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return CorrelationMatrix(list(corr.assets), corr.values.copy())
    n = corr.n_assets
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    noise = np.zeros((n, n))
    noise[iu] = rng.normal(0.0, sigma, size=len(iu[0]))
    noise = noise + noise.T
    out = np.clip(corr.values + noise, -1.0, 1.0)
    np.fill_diagonal(out, 1.0)
    return CorrelationMatrix(list(corr.assets), out)


def shift_split(split: DataSplit, offset: int, horizon: int) -> DataSplit:
    a, b = split.train_range
    a, b = a + offset, b + offset
    if a < 0 or b > horizon:
        raise DataError(f"shifted train range [{a}, {b}) leaves [0, {horizon})")
    return DataSplit((a, b), split.test_range, allow_overlap=True)


def synthetic_block_market(
    n_blocks: int = 2,
    block_size: int = 10,
    n_periods: int = 300,
    intra_rho: float = 0.8,
    inter_rho: float = 0.0,
    vol: float = 0.01,
    drift: float = 5e-4,
    drift_dispersion: float = 5e-4,
    seed: int = 0,
) -> PriceMatrix:
    """Gaussian factor market with equicorrelated blocks.

    Assets are named ``B{block}_{i}``; ``n_periods`` is the number of prices
    (one more than the number of returns). Each asset gets a persistent drift
    drawn around ``drift``.
    """
    n = n_blocks * block_size
    target = np.full((n, n), inter_rho)
    for b in range(n_blocks):
        s = slice(b * block_size, (b + 1) * block_size)
        target[s, s] = intra_rho
    np.fill_diagonal(target, 1.0)
    chol = np.linalg.cholesky(target)

    rng = np.random.default_rng(seed)
    mu = drift + drift_dispersion * rng.standard_normal(n)
    shocks = rng.standard_normal((n_periods - 1, n)) @ chol.T
    rets = np.clip(mu + vol * shocks, -0.9, None)
    prices = 100.0 * np.vstack([np.ones(n), np.cumprod(1.0 + rets, axis=0)])
    assets = [f"B{b}_{i}" for b in range(n_blocks) for i in range(block_size)]
    return PriceMatrix(assets, list(range(n_periods)), prices)
