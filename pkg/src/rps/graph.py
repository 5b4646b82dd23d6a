"""Asset graphs: the anti-correlation graph walked by RPS, and the Mantegna
distance tree with Louvain communities used as a benchmark selector.

The edge transform is ``|coth(rho)| - coth(1)``. It is even in ``rho``, so a
strongly *negatively* correlated pair gets a light edge just like a strongly
positively correlated one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np

from .market_data import CorrelationMatrix

COTH_ONE = 1.0 / math.tanh(1.0)
DEFAULT_CAP = 1e6
LOUVAIN_EPS = 1e-9


@dataclass(frozen=True)
class WeightedGraph:
    nodes: list[str]
    edge_weights: np.ndarray

    def __post_init__(self):
        w = self.edge_weights
        if w.shape != (len(self.nodes), len(self.nodes)):
            raise ValueError("edge weight matrix does not match node count")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("edge weights must be finite and non-negative")
        if not np.array_equal(w, w.T) or np.any(np.diag(w) != 0):
            raise ValueError("edge weights must be symmetric with a zero diagonal")

    def dump(self, path: str | Path) -> None:
        """Write the upper-triangle edge list as ``i,j,weight`` lines."""
        n = len(self.nodes)
        with Path(path).open("w") as fh:
            fh.write("i,j,weight\n")
            for i in range(n):
                for j in range(i + 1, n):
                    fh.write(f"{self.nodes[i]},{self.nodes[j]},{self.edge_weights[i, j]!r}\n")


@dataclass(frozen=True)
class SpanningTree:
    nodes: list[str]
    edges: list[tuple[int, int, float]]  # (i, j, distance) with i < j

    @property
    def total_distance(self) -> float:
        return sum(d for _, _, d in self.edges)

    def named_edges(self) -> list[tuple[str, str, float]]:
        return [(self.nodes[i], self.nodes[j], d) for i, j, d in self.edges]


@dataclass(frozen=True)
class CommunityPartition:
    communities: list[frozenset[str]]


def _check_rho(rho):
    if np.any(np.abs(rho) > 1.0) or np.any(np.isnan(rho)):
        raise ValueError(f"correlation outside [-1, 1]: {rho}")


def coth_weight(rho: float, cap: float = DEFAULT_CAP) -> float:
    """Edge weight for a pair with correlation ``rho``, capped at ``cap``."""
    _check_rho(rho)
    if cap <= 0:
        raise ValueError("cap must be positive")
    if rho == 0.0:
        return float(cap)
    return min(float(cap), max(0.0, abs(1.0 / math.tanh(rho)) - COTH_ONE))


def coth_weights(rho: np.ndarray, cap: float = DEFAULT_CAP) -> np.ndarray:
    """Vectorised :func:`coth_weight`."""
    rho = np.asarray(rho, dtype=float)
    _check_rho(rho)
    if cap <= 0:
        raise ValueError("cap must be positive")
    out = np.full(rho.shape, float(cap))
    nz = rho != 0.0
    with np.errstate(over="ignore"):
        out[nz] = np.minimum(cap, np.maximum(0.0, np.abs(1.0 / np.tanh(rho[nz])) - COTH_ONE))
    return out


def build_rps_graph(corr: CorrelationMatrix, cap: float = DEFAULT_CAP) -> WeightedGraph:
    w = coth_weights(corr.values, cap)
    w = np.triu(w, 1)
    return WeightedGraph(list(corr.assets), w + w.T)


def mantegna_distance(rho):
    """``sqrt(2 (1 - rho))``; accepts scalars or arrays."""
    _check_rho(rho)
    d = np.sqrt(np.maximum(0.0, 2.0 * (1.0 - np.asarray(rho, dtype=float))))
    return float(d) if np.ndim(d) == 0 else d


def kruskal_mst(corr: CorrelationMatrix) -> SpanningTree:
    n = corr.n_assets
    if n < 2:
        raise ValueError("a spanning tree needs at least 2 assets")
    dist = mantegna_distance(corr.values)
    # sort key (d, i, j) gives lexicographic tie-breaking
    edges = sorted((dist[i, j], i, j) for i in range(n) for j in range(i + 1, n))
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = []
    for d, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree.append((i, j, float(d)))
            if len(tree) == n - 1:
                break
    return SpanningTree(list(corr.assets), tree)


def louvain_communities(tree: SpanningTree, seed: int = 0) -> CommunityPartition:
    """Louvain modularity communities of the tree, using ``1 / (d + eps)`` as
    edge similarity."""
    g = nx.Graph()
    g.add_nodes_from(range(len(tree.nodes)))
    for i, j, d in tree.edges:
        g.add_edge(i, j, weight=1.0 / (d + LOUVAIN_EPS))
    parts = nx.community.louvain_communities(g, weight="weight", seed=seed)
    parts = sorted((sorted(p) for p in parts), key=lambda p: p[0])
    return CommunityPartition([frozenset(tree.nodes[i] for i in p) for p in parts])
