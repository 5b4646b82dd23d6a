"""Critical line algorithm for the long-only, fully-invested frontier.

The path solves ``min 1/2 w'Cw - lam * mu'w`` with ``sum(w) = 1``, ``w >= 0``
for ``lam`` falling from infinity to 0. On a fixed free set the solution is
affine in ``lam``; a turning point is where a free weight reaches zero or a
zero weight's multiplier changes sign. Weights never exceed one here, so the
only bound that matters is the lower one.
"""

from __future__ import annotations

import logging

import numpy as np

from ._common import FrontierPoint, MomentEstimates, PortfolioWeights, clean_weights, regularize_covariance

log = logging.getLogger(__name__)

_TINY = 1e-12


def _affine_solution(cov, mu, free):
    """Coefficients with ``w_F(lam) = alpha + lam * beta`` and
    ``gamma(lam) = g0 + lam * g1`` on free set ``free``."""
    sub = cov[np.ix_(free, free)]
    s1 = np.linalg.solve(sub, np.ones(len(free)))
    smu = np.linalg.solve(sub, mu[free])
    a, bm = s1.sum(), smu.sum()
    alpha = s1 / a
    beta = smu - s1 * bm / a
    return alpha, beta, 1.0 / a, -bm / a


def _min_variance_on(cov, items) -> np.ndarray:
    """Long-only minimum-variance weights over ``items`` (indices into cov)."""
    items = list(items)
    sub = cov[np.ix_(items, items)]
    n = len(items)
    free = list(range(n))
    for _ in range(4 * n + 4):
        s1 = np.linalg.solve(sub[np.ix_(free, free)], np.ones(len(free)))
        wf = s1 / s1.sum()
        if wf.min() < 0:
            free.pop(int(np.argmin(wf)))
            continue
        w = np.zeros(n)
        w[free] = wf
        grad = sub @ w - 1.0 / s1.sum()
        bound = [i for i in range(n) if i not in free]
        if not bound or grad[bound].min() >= -_TINY * max(1.0, abs(grad).max()):
            out = np.zeros(len(cov))
            out[items] = w
            return out
        free.append(bound[int(np.argmin(grad[bound]))])
        free.sort()
    raise RuntimeError("minimum-variance active set did not settle")


def _point(assets, w, mu, cov) -> FrontierPoint:
    w = clean_weights(w)
    return FrontierPoint(PortfolioWeights(list(assets), w), float(mu @ w), float(np.sqrt(max(w @ cov @ w, 0.0))))


def _append(points, p):
    # an asset entering the free set leaves the weights unchanged at that lam
    if not np.allclose(p.weights.weights, points[-1].weights.weights, atol=1e-12, rtol=0):
        points.append(p)


def cla_frontier(moments: MomentEstimates) -> list[FrontierPoint]:
    """Turning points from the maximum-return corner down to the global
    minimum-variance portfolio, in decreasing expected return."""
    assets = moments.assets
    n = len(assets)
    if n < 2:
        raise ValueError("CLA needs at least 2 assets")
    mu = np.asarray(moments.mean_returns, dtype=float)
    raw = moments.covariance
    cov = regularize_covariance(raw)
    if cov is not raw:
        log.warning("CLA: covariance was singular and has been regularised")

    if np.all(mu == mu[0]):
        return [_point(assets, _min_variance_on(cov, range(n)), mu, cov)]

    top = np.flatnonzero(mu == mu.max())
    w = _min_variance_on(cov, top) if len(top) > 1 else np.eye(n)[top[0]]
    free = np.flatnonzero(w > 0)
    points = [_point(assets, w, mu, cov)]
    lam = np.inf
    last_changed = -1

    for _ in range(10 * n + 10):
        alpha, beta, g0, g1 = _affine_solution(cov, mu, free)
        bound = np.setdiff1d(np.arange(n), free)
        best_lam, best_idx, leaving = 0.0, -1, False
        limit = lam if np.isinf(lam) else lam * (1.0 + 1e-9) + _TINY

        # a free weight falls to zero as lam decreases
        for pos, j in enumerate(free):
            if beta[pos] > _TINY and j != last_changed:
                cand = -alpha[pos] / beta[pos]
                if best_lam < cand < limit:
                    best_lam, best_idx, leaving = cand, j, True
        # a zero weight's multiplier C_iF w_F - lam mu_i - gamma turns negative
        if len(bound):
            cbf = cov[np.ix_(bound, free)]
            c0 = cbf @ alpha - g0
            c1 = cbf @ beta - mu[bound] - g1
            for pos, i in enumerate(bound):
                if c1[pos] > _TINY and i != last_changed:
                    cand = -c0[pos] / c1[pos]
                    if best_lam < cand < limit:
                        best_lam, best_idx, leaving = cand, i, False

        if best_idx < 0:
            w = np.zeros(n)
            w[free] = alpha
            _append(points, _point(assets, w, mu, cov))
            return points

        w = np.zeros(n)
        w[free] = alpha + best_lam * beta
        if leaving:
            w[best_idx] = 0.0
            free = free[free != best_idx]
        else:
            free = np.sort(np.append(free, best_idx))
        _append(points, _point(assets, w, mu, cov))
        lam, last_changed = best_lam, best_idx

    raise RuntimeError("critical line search exceeded its iteration budget")


def pick_max_sharpe(points: list[FrontierPoint], risk_free: float = 0.0) -> PortfolioWeights:
    """Frontier point with the best ``(return - rf) / risk``; lower risk wins ties."""
    if not points:
        raise ValueError("no frontier points")
    candidates = [p for p in points if p.risk > 0]
    if not candidates:
        raise ValueError("every frontier point has zero risk")
    best = max(candidates, key=lambda p: ((p.expected_return - risk_free) / p.risk, -p.risk))
    return best.weights
