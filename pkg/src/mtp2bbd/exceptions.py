"""Exceptions raised across the package."""


class NotPositiveDefinite(ValueError):
    """Cholesky factorization failed at ``pivot`` (0-based)."""

    def __init__(self, pivot):
        self.pivot = pivot
        super().__init__(f"matrix is not positive definite (pivot {pivot})")


class AssumptionViolated(ValueError):
    """``S_ij >= sqrt(S_ii S_jj)`` for some off-diagonal pair, or a bad regularizer."""

    def __init__(self, i, j, message=None):
        self.i, self.j = i, j
        super().__init__(
            message or f"S[{i},{j}] >= sqrt(S[{i},{i}] * S[{j},{j}]); "
            "the minimizer is not guaranteed to exist"
        )


class MaxIterationsExceeded(RuntimeError):
    """Solver hit its iteration cap; ``result`` carries the best iterate.

    ``result`` is a ``SubSolution`` for a single solve, or an
    ``(AssembledSolution, EstimationReport)`` pair from ``estimate``.
    """

    def __init__(self, result, iterations, residual):
        self.result = result
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(KKT residual {residual:.3e})"
        )


class SameCluster(ValueError):
    pass


class PartitionMismatch(ValueError):
    pass


class DegenerateDenominator(ValueError):
    pass


class NotAcyclic(ValueError):
    pass


class OracleTimeout(RuntimeError):
    """Monolithic reference run exceeded its time budget."""

    def __init__(self, elapsed, lower_bound):
        self.elapsed = elapsed
        self.lower_bound = lower_bound
        super().__init__(
            f"monolithic run exceeded budget after {elapsed:.2f}s; "
            f"ratio >= {lower_bound:.2f}"
        )
