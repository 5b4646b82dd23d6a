"""Candidate subsets from each selection strategy.

* ``rps``      anti-correlation graph -> walks -> embeddings -> clusters
* ``mantegna`` Kruskal MST on ``sqrt(2(1 - rho))`` -> Louvain communities
* ``random``   uniform random subsets of fixed size
* ``sa``       simulated annealing over (subset, weights), returns weights too
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .clustering import fuzzy_cmeans, kmeans, memberships_to_subsets
from .embedding import WalkConfig, generate_walks, train_embeddings
from .graph import DEFAULT_CAP, build_rps_graph, kruskal_mst, louvain_communities
from .market_data import CorrelationMatrix, ReturnMatrix
from .weighting import PortfolioWeights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AssetSubset:
    assets: tuple[str, ...]
    provenance: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if len(self.assets) < 2:
            raise ValueError("a subset needs at least 2 assets")
        if len(set(self.assets)) != len(self.assets):
            raise ValueError("duplicate asset in subset")

    def as_set(self) -> frozenset[str]:
        return frozenset(self.assets)


@dataclass(frozen=True)
class SelectionResult:
    subsets: list[AssetSubset]
    strategy: str
    config_echo: dict = field(default_factory=dict)

    def __post_init__(self):
        seen = [s.as_set() for s in self.subsets]
        if len(set(seen)) != len(seen):
            raise ValueError("duplicate subsets in selection result")

    def sets(self) -> list[frozenset[str]]:
        return [s.as_set() for s in self.subsets]


def _collect(groups, universe, strategy, seed, params) -> SelectionResult:
    """Order members by universe position, drop groups smaller than 2 and
    repeated groups."""
    rank = {a: i for i, a in enumerate(universe)}
    out, seen = [], set()
    for g in groups:
        members = tuple(sorted(set(g), key=rank.__getitem__))
        if len(members) < 2:
            log.info("%s: dropping subset of size %d", strategy, len(members))
            continue
        key = frozenset(members)
        if key in seen:
            continue
        seen.add(key)
        out.append(AssetSubset(members, {"strategy": strategy, "seed": seed, **params}))
    return SelectionResult(out, strategy, {"seed": seed, **params})


def rps_select(
    corr: CorrelationMatrix,
    walk_cfg: WalkConfig | None = None,
    cluster_method: str = "kmeans",
    k: int = 2,
    cluster_params: dict | None = None,
    seed: int = 0,
    cap: float = DEFAULT_CAP,
) -> SelectionResult:
    """Full RPS pipeline. ``seed`` drives walks, training and clustering.

    ``cluster_params`` may hold ``max_iter``, ``tol``, ``n_init`` (k-means) or
    ``m`` and ``threshold`` (fuzzy c-means).
    """
    cfg = replace(walk_cfg or WalkConfig(), seed=seed)
    params = dict(cluster_params or {})
    graph = build_rps_graph(corr, cap)
    emb = train_embeddings(generate_walks(graph, cfg), cfg)
    if cluster_method == "kmeans":
        kw = {key: params[key] for key in ("max_iter", "tol", "n_init") if key in params}
        groups = kmeans(emb, k, seed=seed, **kw).subsets(emb.assets)
    elif cluster_method == "fcm":
        kw = {key: params[key] for key in ("m", "max_iter", "tol") if key in params}
        fm = fuzzy_cmeans(emb, k, seed=seed, **kw)
        groups = memberships_to_subsets(fm, params.get("threshold"))
    else:
        raise ValueError(f"unknown cluster method {cluster_method!r}")
    echo = {"k": k, "cluster_method": cluster_method, "cap": cap, "walk": asdict(cfg), **params}
    return _collect(groups, corr.assets, "rps", seed, echo)


def mantegna_select(corr: CorrelationMatrix, seed: int = 0) -> SelectionResult:
    tree = kruskal_mst(corr)
    parts = louvain_communities(tree, seed=seed)
    return _collect(parts.communities, corr.assets, "mantegna", seed, {})


def random_subsets(universe: Sequence[str], subset_size: int, count: int, rng: np.random.Generator):
    """``count`` independent uniform draws (duplicates possible)."""
    n = len(universe)
    return [[universe[i] for i in sorted(rng.choice(n, size=subset_size, replace=False))] for _ in range(count)]


def random_select(universe: Sequence[str], subset_size: int, count: int, seed: int = 0) -> SelectionResult:
    """Uniform random subsets; repeated draws collapse into one subset."""
    universe = list(universe)
    if not 2 <= subset_size <= len(universe):
        raise ValueError(f"subset_size must lie in [2, {len(universe)}], got {subset_size}")
    if count < 1:
        raise ValueError("count must be >= 1")
    groups = random_subsets(universe, subset_size, count, np.random.default_rng(seed))
    return _collect(groups, universe, "random", seed, {"subset_size": subset_size, "count": count})


@dataclass(frozen=True)
class AnnealingSchedule:
    t0: float = 1.0
    cooling: float = 0.995
    iters: int = 20_000
    concentration: float = 200.0

    def __post_init__(self):
        if self.t0 <= 0:
            raise ValueError("t0 must be positive")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")
        if self.iters < 1 or self.concentration <= 0:
            raise ValueError("iters and concentration must be positive")


def _sharpe(mu, cov, idx, w, risk_free):
    var = w @ cov[idx][:, idx] @ w
    if var <= 0:
        return -math.inf
    return (mu[idx] @ w - risk_free) / math.sqrt(var)


def sa_select(
    returns: ReturnMatrix,
    subset_size: int,
    schedule: AnnealingSchedule | None = None,
    seed: int = 0,
    risk_free: float = 0.0,
    trace: list | None = None,
) -> tuple[SelectionResult, PortfolioWeights]:
    """Simulated annealing on the per-period train Sharpe ratio.

    A move either swaps one held asset for an outside one (keeping its
    weight) or redraws the weights from a Dirichlet centred on the current
    ones, with equal probability. Returns the best state seen. If ``trace``
    is a list, the objective of every accepted state is appended to it.
    """
    schedule = schedule or AnnealingSchedule()
    assets = list(returns.assets)
    n = len(assets)
    if not 2 <= subset_size <= n:
        raise ValueError(f"subset_size must lie in [2, {n}], got {subset_size}")
    x = returns.values
    mu, cov = x.mean(axis=0), np.cov(x, rowvar=False, ddof=1)
    rng = np.random.default_rng(seed)

    idx = np.sort(rng.choice(n, size=subset_size, replace=False))
    w = rng.dirichlet(np.ones(subset_size))
    f = _sharpe(mu, cov, idx, w, risk_free)
    best = (f, idx.copy(), w.copy())
    temp = schedule.t0
    if trace is not None:
        trace.append(f)

    for _ in range(schedule.iters):
        if subset_size < n and rng.random() < 0.5:
            pos = rng.integers(subset_size)
            mask = np.ones(n, dtype=bool)
            mask[idx] = False
            outside = np.flatnonzero(mask)
            cand_idx = idx.copy()
            cand_idx[pos] = outside[rng.integers(len(outside))]
            order = np.argsort(cand_idx)
            cand_idx, cand_w = cand_idx[order], w[order]
        else:
            cand_idx = idx
            cand_w = rng.dirichlet(schedule.concentration * w + 1e-3)
        cand_f = _sharpe(mu, cov, cand_idx, cand_w, risk_free)
        delta = cand_f - f
        if delta >= 0 or (temp > 0 and rng.random() < math.exp(max(delta / temp, -745.0))):
            idx, w, f = cand_idx, cand_w, cand_f
            if trace is not None:
                trace.append(f)
            if f > best[0]:
                best = (f, idx.copy(), w.copy())
        temp *= schedule.cooling

    f, idx, w = best
    params = {"subset_size": subset_size, **asdict(schedule), "train_sharpe": float(f)}
    result = _collect([[assets[i] for i in idx]], assets, "sa", seed, params)
    return result, PortfolioWeights([assets[i] for i in idx], w / w.sum())
