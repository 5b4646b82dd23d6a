"""Hard and fuzzy clustering of asset embeddings into candidate portfolios."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .embedding import EmbeddingMatrix


@dataclass(frozen=True)
class ClusterAssignment:
    k: int
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: list[float] = field(default_factory=list)

    def subsets(self, assets: list[str]) -> list[list[str]]:
        return [[a for a, lab in zip(assets, self.labels) if lab == j] for j in range(self.k)]


@dataclass(frozen=True)
class FuzzyMembership:
    k: int
    memberships: np.ndarray
    m: float
    centroids: np.ndarray
    assets: list[str] = field(default_factory=list)
    n_iter: int = 0


def _check_k(k: int, n: int):
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of assets ({n})")


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = [int(rng.integers(n))]
    d2 = ((x - x[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with chosen centers
            nxt = int(next(i for i in range(n) if i not in centers))
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        centers.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[centers].astype(float)


def _assign(x, centroids):
    d2 = _sq_dists(x, centroids)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(len(x)), labels]


def kmeans(
    emb: EmbeddingMatrix | np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-8,
    n_init: int = 10,
) -> ClusterAssignment:
    """Lloyd's algorithm from k-means++ seeds, best of ``n_init`` restarts.

    Empty clusters are re-seeded with the point farthest from its current
    centroid. Stops once no centroid moves by ``tol`` or more.
    """
    x = np.asarray(getattr(emb, "vectors", emb), dtype=float)
    _check_k(k, len(x))
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    runs = [
        _lloyd(x, k, np.random.default_rng(s), max_iter, tol)
        for s in np.random.SeedSequence(seed).spawn(n_init)
    ]
    return min(runs, key=lambda r: r.inertia)


def _fill_empty(x, labels, d2, centroids):
    """Move the point farthest from its centroid (taken from a cluster with
    at least two members) into each empty cluster. Done on the labels
    directly, since with duplicate points a fresh argmin could hand it back."""
    k = len(centroids)
    for j in range(k):
        if (labels == j).any():
            continue
        sizes = np.bincount(labels, minlength=k)
        movable = np.flatnonzero(sizes[labels] > 1)
        far = int(movable[np.argmax(d2[movable])])
        labels[far] = j
        centroids[j] = x[far]
        d2[far] = 0.0


def _lloyd(x, k, rng, max_iter, tol) -> ClusterAssignment:
    centroids = kmeans_pp_init(x, k, rng)
    labels, d2 = _assign(x, centroids)
    _fill_empty(x, labels, d2, centroids)
    history = [float(d2.sum())]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new = centroids.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new[j] = x[members].mean(axis=0)
        labels, d2 = _assign(x, new)
        _fill_empty(x, labels, d2, new)
        shift = np.sqrt(((new - centroids) ** 2).sum(axis=1)).max()
        centroids = new
        history.append(float(d2.sum()))
        if shift < tol:
            break
    return ClusterAssignment(k, labels, centroids, float(d2.sum()), n_iter, history)


def fcm_memberships(x: np.ndarray, centroids: np.ndarray, m: float) -> np.ndarray:
    """Membership update ``u_ij = 1 / sum_l (d_ij / d_il) ** (2 / (m - 1))``.

    A point lying exactly on one or more centroids splits membership 1 evenly
    between them.
    """
    d = np.sqrt(_sq_dists(x, centroids))
    u = np.empty_like(d)
    zero = d == 0.0
    hit = zero.any(axis=1)
    u[hit] = zero[hit] / zero[hit].sum(axis=1, keepdims=True)
    rest = ~hit
    if rest.any():
        dr = d[rest]
        # ratios to the nearest centroid stay in (0, 1]; avoids overflow near m = 1
        ratio = dr.min(axis=1, keepdims=True) / dr
        p = ratio ** (2.0 / (m - 1.0))
        u[rest] = p / p.sum(axis=1, keepdims=True)
    return u


def fcm_centroids(x: np.ndarray, u: np.ndarray, m: float) -> np.ndarray:
    um = u**m
    return (um.T @ x) / um.sum(axis=0)[:, None]


def fuzzy_cmeans(
    emb: EmbeddingMatrix | np.ndarray,
    k: int,
    m: float = 2.0,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-8,
    callback: Callable[[np.ndarray], None] | None = None,
) -> FuzzyMembership:
    """Fuzzy c-means from k-means++ centroid seeds.

    ``callback`` receives the membership matrix after every update.
    """
    x = np.asarray(getattr(emb, "vectors", emb), dtype=float)
    assets = list(getattr(emb, "assets", []))
    _check_k(k, len(x))
    if m <= 1.0:
        raise ValueError(f"fuzzifier m must be > 1, got {m}")
    rng = np.random.default_rng(seed)
    centroids = kmeans_pp_init(x, k, rng)
    u = fcm_memberships(x, centroids, m)
    if callback:
        callback(u)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        centroids = fcm_centroids(x, u, m)
        new = fcm_memberships(x, centroids, m)
        if callback:
            callback(new)
        change = np.abs(new - u).max()
        u = new
        if change < tol:
            break
    return FuzzyMembership(k, u, m, centroids, assets, n_iter)


def memberships_to_subsets(fm: FuzzyMembership, threshold: float | None = None) -> list[list[str]]:
    """Asset ``i`` joins subset ``j`` when its membership is at least
    ``threshold`` (default ``1 / k``). Empty subsets are dropped."""
    if threshold is None:
        threshold = 1.0 / fm.k
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    assets = fm.assets or [str(i) for i in range(len(fm.memberships))]
    out = []
    for j in range(fm.k):
        members = [a for a, row in zip(assets, fm.memberships) if row[j] >= threshold]
        if members:
            out.append(members)
    return out
