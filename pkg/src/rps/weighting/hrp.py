"""Hierarchical risk parity: single-linkage tree on Mantegna distances,
quasi-diagonal leaf order, then recursive bisection by inverse-variance
cluster risk."""

from __future__ import annotations

import numpy as np
from scipy.cluster.hierarchy import leaves_list, linkage
from scipy.spatial.distance import squareform

from ..graph import mantegna_distance
from ..market_data import CorrelationMatrix
from ._common import MomentEstimates, PortfolioWeights, regularize_covariance


def inverse_variance_weights(cov: np.ndarray) -> np.ndarray:
    ivp = 1.0 / np.diag(cov)
    return ivp / ivp.sum()


def cluster_variance(cov: np.ndarray, items) -> float:
    sub = cov[np.ix_(items, items)]
    w = inverse_variance_weights(sub)
    return float(w @ sub @ w)


def quasi_diagonal_order(corr: np.ndarray) -> list[int]:
    dist = mantegna_distance(corr)
    dist = (dist + dist.T) / 2.0
    np.fill_diagonal(dist, 0.0)
    link = linkage(squareform(dist, checks=False), method="single")
    return [int(i) for i in leaves_list(link)]


def recursive_bisection(cov: np.ndarray, order: list[int]) -> np.ndarray:
    w = np.ones(len(order))
    clusters = [order]
    while clusters:
        nxt = []
        for items in clusters:
            if len(items) < 2:
                continue
            half = len(items) // 2
            left, right = items[:half], items[half:]
            v_left, v_right = cluster_variance(cov, left), cluster_variance(cov, right)
            # both shares as plain ratios; 1 - a/(a+b) loses an ulp for no reason
            total = v_left + v_right
            w[left] *= v_right / total
            w[right] *= v_left / total
            nxt += [left, right]
        clusters = nxt
    return w


def hrp_optimize(moments: MomentEstimates, corr: CorrelationMatrix) -> PortfolioWeights:
    n = len(moments.assets)
    if n < 2:
        raise ValueError("HRP needs at least 2 assets")
    if list(corr.assets) != list(moments.assets):
        corr = corr.restrict(moments.assets)
    cov = moments.covariance
    if np.any(np.diag(cov) <= 0):
        cov = regularize_covariance(cov)
    order = quasi_diagonal_order(corr.values)
    w = recursive_bisection(cov, order)
    return PortfolioWeights(list(moments.assets), w / w.sum())
