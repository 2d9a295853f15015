"""Solvers for the M-matrix constrained log-determinant problem.

Minimizes ``-logdet(theta) + <theta, S - Lam>`` over symmetric positive
definite ``theta`` with non-positive off-diagonals. The same routine is used
for one cluster of a decomposition and for a whole (monolithic) problem.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import nnls

from .exceptions import MaxIterationsExceeded, NotPositiveDefinite
from .matrix_core import factorize, inner, invert, logdet

ZERO_CUTOFF = 1e-12
_F_ROUNDING = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule and step control for :func:`solve_subproblem`.

    ``tolerance`` is a bound on :func:`kkt_residual`. ``on_max_iter`` is
    ``"raise"`` (raise :class:`MaxIterationsExceeded` carrying the best
    iterate) or ``"return"`` (return it with ``converged=False``).
    """

    tolerance: float = 1e-8
    max_iterations: int = 100_000
    method: str = "pgd"
    shrink: float = 0.5
    initial_step: float = 1.0
    armijo: float = 1e-4
    on_max_iter: str = "raise"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.method not in ("pgd", "bcd"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.on_max_iter not in ("raise", "return"):
            raise ValueError("on_max_iter must be 'raise' or 'return'")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class SubSolution:
    theta_hat: np.ndarray
    r_hat: np.ndarray
    iterations: int
    residual: float
    objective: float
    converged: bool = True


def gradient(theta, S, Lam):
    """Gradient ``-inv(theta) + S - Lam`` of the smooth objective."""
    R = invert(factorize(theta))
    return -R + np.asarray(S) - np.asarray(Lam)


def kkt_residual(theta, R, S, Lam, zero_cutoff=ZERO_CUTOFF):
    """Largest violation of the simplified optimality conditions.

    With ``G = -R + S - Lam`` the conditions are ``G_ii = 0`` for every
    diagonal entry, ``G_ij = 0`` where ``theta_ij != 0`` and ``G_ij <= 0``
    where ``theta_ij == 0`` (``|theta_ij| <= zero_cutoff``). ``R`` must be
    the inverse of ``theta``; it is not recomputed here.
    """
    theta = np.asarray(theta, dtype=float)
    G = -np.asarray(R) + np.asarray(S) - np.asarray(Lam)
    viol = np.where(np.abs(theta) > zero_cutoff, np.abs(G), np.maximum(G, 0.0))
    np.fill_diagonal(viol, np.abs(np.diag(G)))
    return float(viol.max())


def _project(theta):
    d = np.diag(theta).copy()
    out = np.minimum(theta, 0.0)
    np.fill_diagonal(out, d)
    return out


def _validate(S, Lam):
    S = np.asarray(S, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    if S.shape != Lam.shape or S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S and Lam must be square matrices of equal shape")
    if np.any(np.diag(S) <= 0):
        raise ValueError("S must have a positive diagonal")
    return S, Lam


def solve_subproblem(S, Lam, cfg=None, theta0=None, callback=None):
    """Minimize the constrained log-determinant objective to ``cfg.tolerance``.

    Parameters
    ----------
    S, Lam : ndarray, shape (m, m)
        Covariance block and regularization block (zero diagonal).
    cfg : SolverConfig, optional
    theta0 : ndarray, optional
        Feasible starting point; defaults to ``diag(1 / diag(S))``.
    callback : callable, optional
        ``callback(iteration, theta, objective)`` after every accepted
        iterate (iteration 0 is the starting point). Returning ``True``
        stops the solver early.

    Returns
    -------
    SubSolution
    """
    cfg = cfg or SolverConfig()
    S, Lam = _validate(S, Lam)
    m = S.shape[0]
    if m == 1:
        theta = np.array([[1.0 / S[0, 0]]])
        f = np.log(S[0, 0]) + 1.0
        if callback is not None:
            callback(0, theta, f)
        return SubSolution(theta, S.copy(), 0, 0.0, f)
    if cfg.method == "bcd":
        return _solve_bcd(S, Lam, cfg, theta0, callback)
    return _solve_pgd(S, Lam, cfg, theta0, callback)


def _finish(cfg, sol):
    if not sol.converged and cfg.on_max_iter == "raise":
        raise MaxIterationsExceeded(sol, sol.iterations, sol.residual)
    return sol


def _start(S, theta0):
    if theta0 is None:
        return np.diag(1.0 / np.diag(S))
    theta = _project(np.asarray(theta0, dtype=float))
    return theta


def _solve_pgd(S, Lam, cfg, theta0, callback):
    C = S - Lam
    theta = _start(S, theta0)
    F = factorize(theta)
    f = -logdet(F) + inner(theta, C)
    R = invert(F)
    G = C - R
    res = kkt_residual(theta, R, S, Lam)
    step = cfg.initial_step
    it = 0
    if callback is not None and callback(0, theta, f):
        return SubSolution(theta, R, 0, res, f, res <= cfg.tolerance)
    while res > cfg.tolerance and it < cfg.max_iterations:
        t = step
        R_new = None
        while True:
            trial = _project(theta - t * G)
            d = trial - theta
            decrease = inner(G, d)
            try:
                F_new = factorize(trial)
            except NotPositiveDefinite:
                t *= cfg.shrink
                continue
            f_new = -logdet(F_new) + inner(trial, C)
            if f_new <= f + cfg.armijo * decrease:
                break
            if abs(f_new - f) <= _F_ROUNDING * max(1.0, abs(f)):
                # f cannot resolve the change; judge the step by the
                # trapezoidal estimate, exact for quadratics
                R_new = invert(F_new)
                G_new = C - R_new
                if 0.5 * inner(G + G_new, d) <= cfg.armijo * decrease:
                    break
                R_new = None
            t *= cfg.shrink
            if t < 1e-30:
                break
        if t < 1e-30:
            break
        if R_new is None:
            R_new = invert(F_new)
            G_new = C - R_new
        y = G_new - G
        sy = inner(d, y)
        # Barzilai-Borwein (long) step for the next iteration
        step = inner(d, d) / sy if sy > 0 else min(2.0 * t, 1e6)
        theta, F, f, R, G = trial, F_new, f_new, R_new, G_new
        it += 1
        res = kkt_residual(theta, R, S, Lam)
        if callback is not None and callback(it, theta, f):
            break
    sol = SubSolution(theta, R, it, res, f, res <= cfg.tolerance)
    return _finish(cfg, sol)


def _solve_bcd(S, Lam, cfg, theta0, callback):
    """Cyclic row/column updates, each a non-negative least-squares problem."""
    C = S - Lam
    m = S.shape[0]
    theta = _start(S, theta0)
    W = invert(factorize(theta))
    res = kkt_residual(theta, W, S, Lam)
    f = -logdet(factorize(theta)) + inner(theta, C)
    if callback is not None and callback(0, theta, f):
        return SubSolution(theta, W, 0, res, f, res <= cfg.tolerance)
    sweeps = 0
    idx = np.arange(m)
    while res > cfg.tolerance and sweeps < cfg.max_iterations:
        for u in range(m):
            rest = idx != u
            w12 = W[rest, u]
            w22 = W[u, u]
            # inverse of theta with row/column u removed
            Q = W[np.ix_(rest, rest)] - np.outer(w12, w12) / w22
            c12 = C[rest, u]
            c22 = C[u, u]
            # minimize c22 * b'Qb - 2 b'c12 over b >= 0, theta_12 = -b
            L = np.linalg.cholesky(c22 * Q)
            rhs = np.linalg.solve(L, c12)
            beta, _ = nnls(L.T, rhs)
            theta12 = -beta
            gamma = 1.0 / c22
            theta[rest, u] = theta12
            theta[u, rest] = theta12
            Qt = Q @ theta12
            theta[u, u] = gamma + theta12 @ Qt
            W[np.ix_(rest, rest)] = Q + np.outer(Qt, Qt) / gamma
            W[rest, u] = -Qt / gamma
            W[u, rest] = -Qt / gamma
            W[u, u] = 1.0 / gamma
        sweeps += 1
        F = factorize(theta)
        W = invert(F)
        f = -logdet(F) + inner(theta, C)
        res = kkt_residual(theta, W, S, Lam)
        if callback is not None and callback(sweeps, theta, f):
            break
    sol = SubSolution(theta, W, sweeps, res, f, res <= cfg.tolerance)
    return _finish(cfg, sol)
