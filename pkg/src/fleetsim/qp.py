"""Dense strictly convex quadratic programming.

Solves ``min 0.5 x'Hx + g'x  s.t.  Ax >= b`` with a Goldfarb-Idnani dual
active-set method. The solver starts from the unconstrained optimum and adds
violated constraints one at a time, so it needs no feasible starting point and
detects inconsistent constraint sets cleanly. H must be symmetric positive
definite; problem sizes here are tiny (a few dozen rows), so every step
re-solves small dense systems instead of updating factorizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class QPResult:
    x: np.ndarray
    status: str
    active: tuple[int, ...]
    multipliers: dict[int, float]
    iterations: int
    objective: float


def _objective(H: np.ndarray, g: np.ndarray, x: np.ndarray) -> float:
    return float(0.5 * x @ H @ x + g @ x)


def solve_qp(
    H: np.ndarray,
    g: np.ndarray,
    A: np.ndarray | None = None,
    b: np.ndarray | None = None,
    max_iter: int = 200,
    tol: float = 1e-9,
) -> QPResult:
    """Solve ``min 0.5 x'Hx + g'x`` subject to ``Ax >= b``.

    Returns the optimum with its active set and multipliers, or a result
    flagged ``infeasible`` (no x satisfies the constraints) or
    ``iteration_limit``. Raises ValueError for non-SPD H or malformed shapes.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    d = g.shape[0]
    if H.shape != (d, d):
        raise ValueError("H and g have incompatible shapes")
    if not np.allclose(H, H.T, atol=1e-12):
        raise ValueError("H must be symmetric")
    if A is None or len(A) == 0:
        A = np.zeros((0, d))
        b = np.zeros(0)
    else:
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.shape != (b.shape[0], d):
            raise ValueError("A and b have incompatible shapes")
    if not np.all(np.isfinite(H)) or not np.all(np.isfinite(g)):
        raise ValueError("non-finite objective")
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
        raise ValueError("non-finite constraints")
    try:
        chol = cho_factor(H)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"H is not positive definite: {exc}") from None

    x = cho_solve(chol, -g)
    active: list[int] = []
    lam: list[float] = []
    iterations = 0

    def result(status: str) -> QPResult:
        mult = {k: v for k, v in zip(active, lam)}
        return QPResult(x, status, tuple(active), mult, iterations, _objective(H, g, x))

    while iterations < max_iter:
        slack = A @ x - b
        for k, idx in enumerate(active):
            slack[idx] = 0.0  # active rows are satisfied by construction
        p = -1
        worst = -tol
        for i in range(A.shape[0]):
            if slack[i] < worst:
                worst, p = slack[i], i
        if p < 0:
            return result(OPTIMAL)
        n_p = A[p]
        lam_p = 0.0

        while iterations < max_iter:
            iterations += 1
            hinv_np = cho_solve(chol, n_p)
            if active:
                N = A[active].T
                hinv_N = cho_solve(chol, N)
                M = N.T @ hinv_N
                try:
                    r = np.linalg.solve(M, N.T @ hinv_np)
                except np.linalg.LinAlgError:
                    return result(INFEASIBLE)
                z = hinv_np - hinv_N @ r
            else:
                r = np.zeros(0)
                z = hinv_np
            nz = float(n_p @ z)

            s_p = float(n_p @ x - b[p])
            t2 = -s_p / nz if nz > tol else math.inf
            t1, blocking = math.inf, -1
            for k in range(len(active)):
                if r[k] > tol:
                    ratio = lam[k] / r[k]
                    if ratio < t1:
                        t1, blocking = ratio, k
            t = min(t1, t2)
            if not math.isfinite(t):
                # cannot move and nothing to drop: constraints inconsistent
                return result(INFEASIBLE)

            if math.isfinite(t2):
                x = x + t * z
            for k in range(len(active)):
                lam[k] -= t * r[k]
            lam_p += t

            if t == t2:
                active.append(p)
                lam.append(lam_p)
                break
            del active[blocking], lam[blocking]
    return result(ITERATION_LIMIT)
