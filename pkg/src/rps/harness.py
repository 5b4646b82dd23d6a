"""End-to-end experiments: select, weight, rank on train, evaluate on test,
stability, and report files.

A config is a JSON or YAML mapping::

    data:
      path: prices.csv            # or  synthetic: {n_blocks: 2, block_size: 10, seed: 0}
      delimiter: ","
      time_column: 0
      integer_index: false
    split: {train: [0, 200], test: [200, 300]}
    strategies:
      rps: {k: [10], cluster_method: kmeans, walk: {walk_length: 20}}
      mantegna: {}
      random: {subset_size: 10, count: 100}
      sa: {subset_size: 10, repetitions: 10, iters: 20000}
    weighters: [mvo, hrp, cla]
    top_k: 10
    risk_free: 0.0
    seeds: [0]
    stability: {sigma: 0.01, offset: 20}
    output_dir: out

Relative data paths resolve against the config file's directory.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .embedding import WalkConfig
from .evaluation import (
    PerformanceReport,
    equal_weight_benchmark,
    metric_suite,
    noise_stability,
    portfolio_returns,
    time_stability,
)
from .graph import DEFAULT_CAP
from .market_data import (
    CorrelationMatrix,
    DataError,
    DataSplit,
    PriceMatrix,
    ReturnMatrix,
    compute_returns,
    load_prices,
    pearson_correlation,
    synthetic_block_market,
)
from .selection import (
    AnnealingSchedule,
    AssetSubset,
    SelectionResult,
    mantegna_select,
    random_select,
    rps_select,
    sa_select,
)
from .weighting import (
    PortfolioWeights,
    cla_frontier,
    estimate_moments,
    hrp_optimize,
    mvo_optimize,
    pick_max_sharpe,
    validate_weights,
)

log = logging.getLogger(__name__)

STRATEGIES = ("rps", "mantegna", "random", "sa")
WEIGHTERS = ("mvo", "hrp", "cla")
NO_STABILITY = ("random", "sa")
LABELS = {"rps": "RPS", "mantegna": "MTN", "random": "RND"}
PERFORMANCE_COLUMNS = ["Method", "Correlation", "Return", "Risk", "Sharpe Ratio", "Information Ratio", "M2"]
UNDEFINED_TEXT = "undefined"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StrategySpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict
    strategies: tuple[StrategySpec, ...]
    weighters: tuple[str, ...]
    split: DataSplit | None = None
    top_k: int = 10
    risk_free: float = 0.0
    seeds: tuple[int, ...] = (0,)
    stability: dict = field(default_factory=lambda: {"sigma": 0.01, "offset": 20})
    output_dir: str = "out"
    mvo_objective: str = "max_sharpe"
    compounding: bool = True
    vanilla: bool = True
    base_dir: str = "."

    def __post_init__(self):
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        if not self.weighters:
            raise ConfigError("at least one weighter is required")
        for s in self.strategies:
            if s.name not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s.name!r}; expected one of {STRATEGIES}")
        for w in self.weighters:
            if w not in WEIGHTERS:
                raise ConfigError(f"unknown weighter {w!r}; expected one of {WEIGHTERS}")
        if not isinstance(self.top_k, int) or self.top_k < 1:
            raise ConfigError("top_k must be a positive integer")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.mvo_objective not in ("max_sharpe", "min_variance"):
            raise ConfigError(f"unknown mvo_objective {self.mvo_objective!r}")
        if "path" not in self.data and "synthetic" not in self.data:
            raise ConfigError("data needs either 'path' or 'synthetic'")

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "data" not in raw or "strategies" not in raw or "weighters" not in raw:
            raise ConfigError("config needs 'data', 'strategies' and 'weighters'")
        kw = dict(raw)
        strategies = raw["strategies"]
        if isinstance(strategies, list):
            strategies = {name: {} for name in strategies}
        if not isinstance(strategies, dict):
            raise ConfigError("strategies must be a mapping of name -> parameters")
        kw["strategies"] = tuple(StrategySpec(name, dict(p or {})) for name, p in strategies.items())
        kw["weighters"] = tuple(raw["weighters"])
        kw["seeds"] = tuple(int(s) for s in raw.get("seeds", (0,)))
        if "split" in raw and raw["split"] is not None:
            sp = raw["split"]
            try:
                kw["split"] = DataSplit(tuple(sp["train"]), tuple(sp["test"]))
            except (KeyError, TypeError, DataError) as exc:
                raise ConfigError(f"bad split: {exc}") from exc
        stab = {"sigma": 0.01, "offset": 20}
        stab.update(raw.get("stability") or {})
        kw["stability"] = stab
        return cls(**kw, base_dir=str(base_dir))

    def with_overrides(self, seed: int | None = None, out: str | None = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seeds=(int(seed),))
        if out is not None:
            cfg = replace(cfg, output_dir=str(out))
        return cfg

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d.pop("output_dir")
        d["strategies"] = {s.name: s.params for s in self.strategies}
        d["split"] = None if self.split is None else {"train": list(self.split.train_range), "test": list(self.split.test_range)}
        d["seeds"] = list(self.seeds)
        d["weighters"] = list(self.weighters)
        return d


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw, base_dir=path.parent)


# ----------------------------------------------------------------- market


@dataclass(frozen=True)
class Market:
    prices: PriceMatrix
    split: DataSplit
    train_returns: ReturnMatrix
    test_returns: ReturnMatrix
    train_corr: CorrelationMatrix
    test_corr: CorrelationMatrix | None

    @property
    def universe(self) -> list[str]:
        return list(self.prices.assets)


def load_market(config: ExperimentConfig) -> Market:
    data = config.data
    if "synthetic" in data:
        try:
            prices = synthetic_block_market(**(data["synthetic"] or {}))
        except TypeError as exc:
            raise ConfigError(f"bad synthetic market parameters: {exc}") from exc
    else:
        path = Path(data["path"])
        if not path.is_absolute():
            path = Path(config.base_dir) / path
        opts = {k: data[k] for k in ("delimiter", "time_column", "integer_index") if k in data}
        prices = load_prices(path, **opts)
    split = config.split
    t = prices.n_periods
    if split is None:
        cut = (2 * t) // 3
        split = DataSplit((0, cut), (cut, t))
    if split.test_range[1] > t or split.train_range[0] < 0:
        raise DataError(f"split {split.train_range}/{split.test_range} exceeds {t} price rows")
    if split.train_range[1] - split.train_range[0] < 3 or split.test_range[1] - split.test_range[0] < 3:
        raise DataError("train and test ranges need at least 3 price rows each")
    train = compute_returns(prices.rows(*split.train_range))
    test = compute_returns(prices.rows(*split.test_range))
    try:
        test_corr = pearson_correlation(test)
    except DataError as exc:
        log.warning("test-range correlation unavailable: %s", exc)
        test_corr = None
    return Market(prices, split, train, test, pearson_correlation(train), test_corr)


# ---------------------------------------------------------------- strategies


def _default_size(n: int) -> int:
    return max(2, min(n, round(math.sqrt(n))))


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _rps_options(params: dict, n: int) -> dict:
    walk = WalkConfig(**(params.get("walk") or {}))
    ks = [int(k) for k in _as_list(params.get("k", _default_size(n)))]
    return {
        "walk_cfg": walk,
        "ks": ks,
        "cluster_method": params.get("cluster_method", "kmeans"),
        "cluster_params": dict(params.get("cluster_params") or {}),
        "cap": float(params.get("cap", DEFAULT_CAP)),
    }


def strategy_runner(spec: StrategySpec, n_assets: int):
    """``(corr, seed) -> SelectionResult`` for the correlation-based
    strategies; RPS uses the first configured k."""
    if spec.name == "rps":
        o = _rps_options(spec.params, n_assets)

        def run(corr, seed):
            return rps_select(corr, o["walk_cfg"], o["cluster_method"], o["ks"][0], o["cluster_params"], seed, o["cap"])

        return run
    if spec.name == "mantegna":
        return lambda corr, seed: mantegna_select(corr, seed)
    raise ValueError(f"stability is not defined for strategy {spec.name!r}")


@dataclass(frozen=True)
class Candidate:
    subset: AssetSubset
    weights: PortfolioWeights | None = None


def _merge(results: list[SelectionResult]) -> list[Candidate]:
    out, seen = [], set()
    for r in results:
        for s in r.subsets:
            if s.as_set() not in seen:
                seen.add(s.as_set())
                out.append(Candidate(s))
    return out


def _sa_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, rep]).generate_state(1)[0])


def select_candidates(spec: StrategySpec, config: ExperimentConfig, market: Market) -> list[Candidate]:
    n = len(market.universe)
    p = spec.params
    if spec.name == "rps":
        o = _rps_options(p, n)
        return _merge([
            rps_select(market.train_corr, o["walk_cfg"], o["cluster_method"], k, o["cluster_params"], seed, o["cap"])
            for seed in config.seeds
            for k in o["ks"]
        ])
    if spec.name == "mantegna":
        return _merge([mantegna_select(market.train_corr, seed) for seed in config.seeds])
    if spec.name == "random":
        size = int(p.get("subset_size", _default_size(n)))
        count = int(p.get("count", 100))
        return _merge([random_select(market.universe, size, count, seed) for seed in config.seeds])
    if spec.name == "sa":
        size = int(p.get("subset_size", _default_size(n)))
        reps = int(p.get("repetitions", 10))
        sched = AnnealingSchedule(**{k: p[k] for k in ("t0", "cooling", "iters", "concentration") if k in p})
        out = []
        for seed in config.seeds:
            for rep in range(reps):
                sel, w = sa_select(market.train_returns, size, sched, _sa_seed(seed, rep), config.risk_free)
                out.append(Candidate(sel.subsets[0], w))
        return out
    raise ValueError(f"unknown strategy {spec.name!r}")


# ---------------------------------------------------------------- weighting


def weigh(weighter: str, assets: list[str], config: ExperimentConfig, market: Market) -> PortfolioWeights:
    moments = estimate_moments(market.train_returns, assets)
    if weighter == "mvo":
        return mvo_optimize(moments, config.mvo_objective, config.risk_free)
    if weighter == "hrp":
        return hrp_optimize(moments, market.train_corr)
    if weighter == "cla":
        return pick_max_sharpe(cla_frontier(moments), config.risk_free)
    raise ValueError(f"unknown weighter {weighter!r}")


# ------------------------------------------------------------- artifacts


@dataclass(frozen=True)
class RankedPortfolio:
    rank: int
    weights: PortfolioWeights
    provenance: dict
    train: PerformanceReport
    test: PerformanceReport


@dataclass
class CellResult:
    strategy: str
    weighter: str
    method: str
    status: str = "ok"
    error: str | None = None
    portfolios: list[RankedPortfolio] = field(default_factory=list)
    n_candidates: int = 0
    n_skipped: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class StabilityRecord:
    method: str
    test: str
    seed: int
    score: float


@dataclass
class RunArtifacts:
    config_echo: dict
    cells: list[CellResult]
    stability: list[StabilityRecord]
    failures: list[str]
    log: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures

    def cell(self, method: str) -> CellResult:
        for c in self.cells:
            if c.method == method:
                return c
        raise KeyError(method)

    def frontier(self, method: str) -> list[tuple[float, float]]:
        """(test total return, test risk) of each ranked portfolio."""
        return [(p.test.total_return, p.test.risk) for p in self.cell(method).portfolios]


def method_label(strategy: str, weighter: str) -> str:
    if strategy == "sa":
        return "SA"
    if strategy == "vanilla":
        return f"Vanilla {weighter.upper()}"
    return f"{LABELS[strategy]}+{weighter.upper()}"


def _rank_key(item):
    idx, report = item[0], item[2]
    if report.sharpe is None:
        return (1, 0.0, report.risk, idx)
    return (0, -report.sharpe, report.risk, idx)


def rank_and_evaluate(
    cell: CellResult,
    weighted: list[tuple[PortfolioWeights, dict]],
    config: ExperimentConfig,
    market: Market,
) -> CellResult:
    """Rank weighted portfolios by train Sharpe (lower risk wins ties,
    undefined last), keep ``top_k`` and evaluate those on the test range."""
    bench_train = equal_weight_benchmark(market.train_returns, config.compounding)
    bench_test = equal_weight_benchmark(market.test_returns, config.compounding)
    scored = []
    for idx, (w, prov) in enumerate(weighted):
        series = portfolio_returns(w, market.train_returns)
        rep = metric_suite(series, bench_train, config.risk_free, market.train_corr, w, config.compounding)
        scored.append((idx, w, rep, prov))
    scored.sort(key=_rank_key)
    for rank, (_, w, train_rep, prov) in enumerate(scored[: config.top_k], start=1):
        series = portfolio_returns(w, market.test_returns)
        test_rep = metric_suite(series, bench_test, config.risk_free, market.test_corr, w, config.compounding)
        if market.test_corr is None:
            test_rep = replace(test_rep, avg_pairwise_correlation=None)
        cell.portfolios.append(RankedPortfolio(rank, w, prov, train_rep, test_rep))
    return cell


def _weigh_cell(strategy, weighter, candidates, config, market) -> CellResult:
    cell = CellResult(strategy, weighter, method_label(strategy, weighter), n_candidates=len(candidates))
    weighted = []
    for cand in candidates:
        assets = list(cand.subset.assets)
        try:
            w = cand.weights if cand.weights is not None else weigh(weighter, assets, config, market)
        except Exception as exc:  # noqa: BLE001 - one subset's failure only drops that subset
            cell.n_skipped += 1
            log.warning("%s: skipping subset %s: %s", cell.method, ";".join(assets), exc)
            continue
        weighted.append((w, dict(cand.subset.provenance)))
    if not weighted:
        raise RuntimeError("no subset could be weighted")
    return rank_and_evaluate(cell, weighted, config, market)


def failed_cell(strategy, weighter, exc) -> CellResult:
    cell = CellResult(strategy, weighter, method_label(strategy, weighter), status="failed", error=f"{type(exc).__name__}: {exc}")
    log.error("%s failed: %s", cell.method, cell.error)
    return cell


class _Capture(logging.Handler):
    def __init__(self):
        super().__init__(logging.INFO)
        self.lines: list[str] = []
        self.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))

    def emit(self, record):
        self.lines.append(self.format(record))


def run_experiment(config: ExperimentConfig, market: Market | None = None) -> RunArtifacts:
    """Every (strategy, weighter) cell, the vanilla rows, and stability.

    A failing cell is logged and recorded; the rest of the run continues.
    Config and data errors propagate.
    """
    root = logging.getLogger("rps")
    capture = _Capture()
    old_level = root.level
    root.addHandler(capture)
    root.setLevel(logging.INFO)
    try:
        market = market or load_market(config)
        log.info("universe: %d assets, train %s, test %s", len(market.universe), market.split.train_range, market.split.test_range)
        cells = []
        for spec in config.strategies:
            weighters = ("sa",) if spec.name == "sa" else config.weighters
            try:
                candidates = select_candidates(spec, config, market)
                log.info("%s: %d candidate subsets", spec.name, len(candidates))
            except Exception as exc:  # noqa: BLE001 - selection failure voids only this strategy's cells
                cells.extend(failed_cell(spec.name, w, exc) for w in weighters)
                continue
            for w in weighters:
                try:
                    cells.append(_weigh_cell(spec.name, w, candidates, config, market))
                except Exception as exc:  # noqa: BLE001
                    cells.append(failed_cell(spec.name, w, exc))
        if config.vanilla:
            full = [Candidate(AssetSubset(tuple(market.universe), {"strategy": "vanilla"}))]
            for w in config.weighters:
                try:
                    cells.append(_weigh_cell("vanilla", w, full, config, market))
                except Exception as exc:  # noqa: BLE001
                    cells.append(failed_cell("vanilla", w, exc))
        stability, stab_failures = run_stability(config, market)
        failures = [c.method for c in cells if not c.ok] + stab_failures
        return RunArtifacts(config.echo(), cells, stability, failures, capture.lines)
    finally:
        root.removeHandler(capture)
        root.setLevel(old_level)


def run_stability(config: ExperimentConfig, market: Market) -> tuple[list[StabilityRecord], list[str]]:
    records, failures = [], []
    sigma = float(config.stability.get("sigma", 0.01))
    offset = int(config.stability.get("offset", 20))
    noise_seed = config.stability.get("noise_seed")
    n = len(market.universe)
    for spec in config.strategies:
        if spec.name in NO_STABILITY:
            log.info("stability skipped for %s: selection has no stable structure to compare across runs", spec.name)
            continue
        runner = strategy_runner(spec, n)
        label = LABELS[spec.name]
        for seed in config.seeds:
            ns = seed if noise_seed is None else int(noise_seed)
            for test, fn in (
                ("noise", lambda: noise_stability(runner, market.train_corr, sigma, seed, ns)),
                ("time", lambda: time_stability(runner, market.prices, market.split, offset, seed)),
            ):
                try:
                    records.append(StabilityRecord(label, test, seed, fn()))
                except Exception as exc:  # noqa: BLE001
                    log.error("%s %s stability (seed %d) failed: %s: %s", label, test, seed, type(exc).__name__, exc)
                    failures.append(f"{label} {test} stability")
    return records, failures


# ------------------------------------------------------------- emission


def _num(x) -> str:
    return UNDEFINED_TEXT if x is None else repr(float(x))


def _json_num(x):
    return UNDEFINED_TEXT if x is None else float(x)


def _report_row(method: str, rep: PerformanceReport) -> list[str]:
    return [method] + [_num(v) for v in (rep.avg_pairwise_correlation, rep.total_return, rep.risk, rep.sharpe, rep.information_ratio, rep.m2)]


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _slug(method: str) -> str:
    return method.lower().replace("+", "_").replace(" ", "_")


def _report_dict(rep: PerformanceReport) -> dict:
    return {k: _json_num(v) for k, v in rep.as_dict().items()}


def artifacts_document(art: RunArtifacts) -> dict:
    cells = []
    for c in art.cells:
        cells.append({
            "method": c.method,
            "strategy": c.strategy,
            "weighter": c.weighter,
            "status": c.status,
            "error": c.error,
            "n_candidates": c.n_candidates,
            "n_skipped": c.n_skipped,
            "portfolios": [
                {
                    "rank": p.rank,
                    "weights": [[a, float(x)] for a, x in zip(p.weights.assets, p.weights.weights)],
                    "provenance": p.provenance,
                    "train": _report_dict(p.train),
                    "test": _report_dict(p.test),
                }
                for p in c.portfolios
            ],
        })
    return {
        "config": art.config_echo,
        "cells": cells,
        "stability": [asdict(s) for s in art.stability],
        "failures": art.failures,
    }


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, (tuple, frozenset, set)):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def emit_reports(art: RunArtifacts, out_dir: str | Path) -> list[Path]:
    """Write every report file into ``out_dir``; each file is replaced
    atomically. Returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for c in art.cells:
        for p in c.portfolios:
            validate_weights(p.weights.weights)
    files: dict[str, str] = {}

    ok = [c for c in art.cells if c.ok and c.portfolios]
    files["performance.csv"] = csv_text(PERFORMANCE_COLUMNS, [_report_row(c.method, c.portfolios[0].test) for c in ok])
    files["performance_topk.csv"] = csv_text(
        ["Rank"] + PERFORMANCE_COLUMNS,
        [[p.rank] + _report_row(c.method, p.test) for c in ok for p in c.portfolios],
    )
    for test in ("noise", "time"):
        rows = [[s.method, s.seed, repr(s.score)] for s in art.stability if s.test == test]
        files[f"stability_{test}.csv"] = csv_text(["Method", "Seed", "Score"], rows)
    for c in ok:
        files[f"frontier_{_slug(c.method)}.csv"] = csv_text(
            ["expected_return", "risk"], [[repr(r), repr(s)] for r, s in art.frontier(c.method)]
        )
    files["weights.csv"] = weights_text(
        [(c.strategy, c.weighter, p.rank, p.weights) for c in ok for p in c.portfolios]
    )
    files["report.json"] = json.dumps(artifacts_document(art), sort_keys=True, indent=2, default=_json_default) + "\n"
    files["run.log"] = "".join(line + "\n" for line in art.log)

    written = []
    for name, text in files.items():
        path = out / name
        atomic_write(path, text)
        written.append(path)
    return written


# ------------------------------------------------------ stage-wise files


def subsets_text(rows: list[tuple[str, int, tuple[str, ...]]]) -> str:
    return csv_text(["strategy", "seed", "assets"], [[s, seed, ";".join(a)] for s, seed, a in rows])


def read_subsets(path: str | Path) -> list[tuple[str, int, tuple[str, ...]]]:
    with open(path, newline="") as fh:
        return [(r["strategy"], int(r["seed"]), tuple(r["assets"].split(";"))) for r in csv.DictReader(fh)]


def weights_text(rows: list[tuple[str, str, int, PortfolioWeights]]) -> str:
    out = []
    for strategy, weighter, pid, w in rows:
        out.extend([strategy, weighter, a, repr(float(x)), pid] for a, x in zip(w.assets, w.weights))
    return csv_text(["strategy", "weighter", "asset", "weight", "portfolio"], out)


def read_weights(path: str | Path) -> dict[tuple[str, str], list[PortfolioWeights]]:
    groups: dict[tuple[str, str, str], list[tuple[str, float]]] = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            groups.setdefault((r["strategy"], r["weighter"], r["portfolio"]), []).append((r["asset"], float(r["weight"])))
    out: dict[tuple[str, str], list[PortfolioWeights]] = {}
    for (s, w, _), items in groups.items():
        out.setdefault((s, w), []).append(PortfolioWeights([a for a, _ in items], np.array([x for _, x in items])))
    return out


def write_text(out_dir: str | Path, name: str, text: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    atomic_write(path, text)
    return path

