"""Long-only, fully-invested mean-variance optimisation."""

from __future__ import annotations

import logging

import numpy as np

from ._common import MomentEstimates, PortfolioWeights, clean_weights, regularize_covariance

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """The active-set iteration hit its budget; ``best`` holds the last iterate."""

    def __init__(self, message: str, best: np.ndarray, residual: float):
        super().__init__(message)
        self.best = best
        self.residual = residual


def kkt_residual(Q, c, a, b, x, nu) -> float:
    g = Q @ x + c + nu * a
    free = x > 0
    stat = np.abs(g[free]).max() if free.any() else 0.0
    dual = max(0.0, -g[~free].min()) if (~free).any() else 0.0
    return float(max(stat, dual, abs(a @ x - b), max(0.0, -x.min())))


def solve_qp(Q, c, a, b, x0, tol: float = 1e-8, max_iter: int = 500) -> np.ndarray:
    """Primal active-set method for ``min 1/2 x'Qx + c'x`` subject to
    ``a'x = b`` and ``x >= 0``. ``x0`` must be feasible; ``Q`` positive definite."""
    n = len(c)
    x = np.asarray(x0, dtype=float).copy()
    free = x > 0
    nu = 0.0
    for _ in range(max_iter):
        F = np.flatnonzero(free)
        m = len(F)
        K = np.zeros((m + 1, m + 1))
        K[:m, :m] = Q[np.ix_(F, F)]
        K[:m, m] = K[m, :m] = a[F]
        rhs = np.concatenate([-c[F], [b]])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        target = np.zeros(n)
        target[F] = sol[:m]
        if np.all(sol[:m] >= 0):
            x, nu = target, sol[m]
            g = Q @ x + c + nu * a
            bound = np.flatnonzero(~free)
            if len(bound) == 0 or g[bound].min() >= -tol:
                return x
            free[bound[np.argmin(g[bound])]] = True
            continue
        # move toward the equality-constrained optimum until a weight hits zero
        d = target - x
        shrinking = F[d[F] < 0]
        ratios = -x[shrinking] / d[shrinking]
        k = int(np.argmin(ratios))
        x = x + min(1.0, ratios[k]) * d
        x[shrinking[k]] = 0.0
        free[shrinking[k]] = False
        x[~free] = 0.0
    res = kkt_residual(Q, c, a, b, x, nu)
    raise ConvergenceError(f"active set did not converge in {max_iter} iterations", x, res)


def _min_variance(cov: np.ndarray) -> np.ndarray:
    n = len(cov)
    return solve_qp(cov, np.zeros(n), np.ones(n), 1.0, np.full(n, 1.0 / n))


def _max_sharpe(mu: np.ndarray, cov: np.ndarray, risk_free: float) -> np.ndarray | None:
    # max (mu - rf)'w / sqrt(w'Cw) on the simplex  <=>  min y'Cy, (mu - rf)'y = 1, y >= 0
    excess = mu - risk_free
    pos = excess > 0
    if not pos.any():
        return None
    y0 = np.zeros(len(mu))
    y0[pos] = 1.0 / (pos.sum() * excess[pos])
    y = solve_qp(cov, np.zeros(len(mu)), excess, 1.0, y0)
    return y / y.sum()


def mvo_optimize(
    moments: MomentEstimates,
    objective: str = "max_sharpe",
    risk_free: float = 0.0,
) -> PortfolioWeights:
    """Weights for ``objective`` in {"min_variance", "max_sharpe"}.

    When no asset beats ``risk_free`` the Sharpe objective has no positive
    optimum and the minimum-variance portfolio is returned instead.
    """
    n = len(moments.assets)
    if n < 2:
        raise ValueError("MVO needs at least 2 assets")
    cov = regularize_covariance(moments.covariance)
    if objective == "min_variance":
        w = _min_variance(cov)
    elif objective == "max_sharpe":
        w = _max_sharpe(moments.mean_returns, cov, risk_free)
        if w is None:
            log.info("no asset has positive excess return; using minimum variance")
            w = _min_variance(cov)
    else:
        raise ValueError(f"unknown MVO objective {objective!r}")
    return PortfolioWeights(list(moments.assets), clean_weights(w))
