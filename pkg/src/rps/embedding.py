"""Weighted random walks over the asset graph and skip-gram embeddings.

Walks are first-order by default: from node ``i`` the next node ``j`` is drawn
with probability ``w_ij / sum_k w_ik``. Setting ``p``/``q`` away from 1 turns
on the node2vec return/in-out bias.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ._backend import get_kernels
from .graph import WeightedGraph


@dataclass(frozen=True)
class WalkConfig:
    walk_length: int = 20
    walks_per_node: int = 10
    embedding_dim: int = 32
    window: int = 2
    negative_samples: int = 5
    epochs: int = 20
    learning_rate: float = 0.025
    seed: int = 0
    p: float = 1.0
    q: float = 1.0
    # one vector per node for both the center and context roles
    tied: bool = True

    def __post_init__(self):
        for name in ("walk_length", "walks_per_node", "embedding_dim", "window", "negative_samples"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.window > self.walk_length:
            raise ValueError("window must not exceed walk_length")
        if self.learning_rate <= 0 or self.p <= 0 or self.q <= 0:
            raise ValueError("learning_rate, p and q must be positive")


@dataclass(frozen=True)
class WalkCorpus:
    nodes: list[str]
    walks: np.ndarray  # (n_walks, walk_length + 1) node indices

    def dump(self, path: str | Path) -> None:
        with Path(path).open("w") as fh:
            for walk in self.walks:
                fh.write(" ".join(self.nodes[i] for i in walk) + "\n")


@dataclass(frozen=True)
class EmbeddingMatrix:
    assets: list[str]
    vectors: np.ndarray

    def dump(self, path: str | Path) -> None:
        with Path(path).open("w") as fh:
            for a, v in zip(self.assets, self.vectors):
                fh.write(a + " " + " ".join(repr(float(x)) for x in v) + "\n")


def transition_tables(weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise cumulative weights and the last positive-weight neighbour of
    each node. Raises if a node has no positive edge."""
    totals = weights.sum(axis=1)
    isolated = np.flatnonzero(totals <= 0)
    if len(isolated):
        raise ValueError(f"isolated node(s) with no positive edge: {isolated.tolist()}")
    cum = np.ascontiguousarray(np.cumsum(weights, axis=1))
    n = weights.shape[1]
    last = (n - 1 - np.argmax(weights[:, ::-1] > 0, axis=1)).astype(np.int64)
    return cum, last


def generate_walks(graph: WeightedGraph, config: WalkConfig, backend: str | None = None) -> WalkCorpus:
    """Run ``walks_per_node`` walks from every node, ordered round by round.

    Each start node draws its uniforms from its own child of the config seed.
    """
    kern = get_kernels(backend)
    w = np.ascontiguousarray(graph.edge_weights, dtype=float)
    n = w.shape[0]
    cum, last = transition_tables(w)
    rounds, steps = config.walks_per_node, config.walk_length

    children = np.random.SeedSequence(config.seed).spawn(n)
    per_node = np.stack([np.random.default_rng(c).random((rounds, steps)) for c in children])
    uniforms = np.ascontiguousarray(per_node.transpose(1, 0, 2).reshape(rounds * n, steps))
    starts = np.tile(np.arange(n, dtype=np.int64), rounds)
    out = np.empty((rounds * n, steps + 1), dtype=np.int64)

    if config.p == 1.0 and config.q == 1.0:
        kern.walks_first_order(cum, last, starts, uniforms, out)
    else:
        kern.walks_second_order(w, cum, last, starts, uniforms, 1.0 / config.p, 1.0 / config.q, out)
    return WalkCorpus(list(graph.nodes), out)


def _pairs_per_walk(length: int, window: int) -> int:
    return sum(min(length - 1, i + window) - max(0, i - window) for i in range(length))


def train_embeddings(corpus: WalkCorpus, config: WalkConfig, backend: str | None = None) -> EmbeddingMatrix:
    """Skip-gram with negative sampling over every (center, context) pair
    within ``window`` positions, with linearly decaying learning rate.

    With ``config.tied`` (the default) centers and contexts share one vector
    table, so the score of a pair is the dot product of the two asset vectors
    and assets that co-occur on walks end up close together. With separate
    tables, the input vectors instead group assets that share contexts.

    Negatives follow the unigram distribution raised to 0.75; a draw equal to
    the context is skipped. A draw equal to the center is kept, which with
    tied tables acts as a pull on the vector norm. Updates are applied
    strictly in corpus order.
    """
    walks = np.ascontiguousarray(corpus.walks, dtype=np.int64)
    if walks.size == 0:
        raise ValueError("empty walk corpus")
    kern = get_kernels(backend)
    n, d = len(corpus.nodes), config.embedding_dim
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    w_in = rng.uniform(-0.5 / d, 0.5 / d, size=(n, d))
    w_out = w_in if config.tied else np.zeros((n, d))

    counts = np.bincount(walks.ravel(), minlength=n).astype(float)
    noise = counts**0.75
    noise /= noise.sum()
    per_epoch = walks.shape[0] * _pairs_per_walk(walks.shape[1], config.window)
    total = max(1, per_epoch * config.epochs)
    k = config.negative_samples

    done = 0
    for _ in range(config.epochs):
        negatives = rng.choice(n, size=per_epoch * k, p=noise).astype(np.int64)
        done += kern.sgns_epoch(walks, w_in, w_out, negatives, config.window, k,
                                config.learning_rate, done, total)
    return EmbeddingMatrix(list(corpus.nodes), w_in)


def embedding_distances(emb: EmbeddingMatrix) -> np.ndarray:
    return squareform(pdist(emb.vectors))
