"""Entropic-regularized optimal transport between discrete histograms.

The solver returns the coupling that minimizes

    <plan, cost> + lam * sum_ij plan_ij * ln(plan_ij)

over nonnegative matrices with prescribed row and column sums. Iterations
run in the log domain by default (dual potentials updated through
log-sum-exp), which stays finite for small ``lam`` where the naive kernel
scaling underflows. A plain scaling variant is kept for cross-checking on
well-scaled instances.

``exact_ot_oracle`` solves tiny unregularized instances exactly by
enumeration and exists so that the iterative solver can be tested against
an independent ground truth.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import root
from scipy.special import logsumexp, xlogy

# Instances the enumeration oracle accepts: square uniform problems up to
# this size go through permutation search, anything else must have at most
# MAX_ORACLE_CELLS cells for the vertex enumeration to stay tractable.
MAX_ORACLE_PERM = 7
MAX_ORACLE_CELLS = 16

# The alternating sweeps contract at a rate like 1 - exp(-osc(cost)/lam),
# which for small lam stalls far above any tight tolerance. Once sweeps
# have burned in, a Newton solve on the dual potentials (analytic
# Jacobian, quadratic local convergence) finishes the job. The dense
# Jacobian is (m+n-1)^2, so the polish only runs on small instances.
_POLISH_FIRST = 200
_POLISH_MAX_SIZE = 600


@dataclass(frozen=True)
class SinkhornConfig:
    """Solver settings.

    Attributes
    ----------
    lam : float
        Entropic regularization weight, > 0. The kernel is exp(-cost/lam).
    max_iter : int
        Iteration cap.
    tol : float
        Stop once max(L1 row-marginal error, L1 column-marginal error)
        falls below this threshold.
    """

    lam: float
    max_iter: int = 10000
    tol: float = 1e-9

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class TransportPlan:
    """Solver output: the coupling plus convergence diagnostics.

    Attributes
    ----------
    matrix : ndarray of shape (m, n)
        Nonnegative coupling with row sums ~ p and column sums ~ q.
    iterations : int
        Sinkhorn sweeps performed.
    marginal_error : float
        max(L1 row error, L1 column error) at exit.
    converged : bool
        False when the iteration cap was hit above tolerance.
    """

    matrix: np.ndarray
    iterations: int
    marginal_error: float
    converged: bool


def validate_histogram(weights: np.ndarray, name: str = "histogram") -> np.ndarray:
    """Check that ``weights`` lies on the probability simplex."""
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0:
        raise ValueError(f"{name} is empty")
    if np.any(w < 0):
        raise ValueError(f"{name} has negative entries")
    total = float(w.sum())
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"{name} sums to {total!r}, expected 1")
    return w


def _check_inputs(cost, p, q):
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError(f"cost must be a matrix, got ndim={cost.ndim}")
    p = validate_histogram(p, "p")
    q = validate_histogram(q, "q")
    if cost.shape != (p.size, q.size):
        raise ValueError(
            f"cost shape {cost.shape} does not match histogram sizes "
            f"({p.size}, {q.size})"
        )
    return cost, p, q


def solve(
    cost: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    cfg: SinkhornConfig,
    method: str = "log",
) -> TransportPlan:
    """Solve entropic OT for a fixed cost matrix.

    Parameters
    ----------
    cost : ndarray of shape (m, n)
        Nonnegative ground costs.
    p, q : ndarray of shape (m,), (n,)
        Source and target histograms on the simplex.
    cfg : SinkhornConfig
        Regularization weight and stopping rule.
    method : {"log", "scaling"}
        "log" (default) iterates dual potentials with log-sum-exp;
        "scaling" is the textbook kernel scaling, kept for cross-checks
        and unreliable for small ``cfg.lam``.

    Returns
    -------
    TransportPlan
        Rows or columns with zero histogram mass are excluded from the
        iteration and receive zero plan mass.
    """
    cost, p, q = _check_inputs(cost, p, q)
    rows = p > 0
    cols = q > 0
    sub_cost = cost[np.ix_(rows, cols)]
    pp = p[rows]
    qq = q[cols]

    if method == "log":
        sub_plan, iters, err = _solve_log(sub_cost, pp, qq, cfg)
    elif method == "scaling":
        sub_plan, iters, err = _solve_scaling(sub_cost, pp, qq, cfg)
    else:
        raise ValueError(f"unknown method {method!r}")

    plan = np.zeros_like(cost)
    plan[np.ix_(rows, cols)] = sub_plan
    return TransportPlan(
        matrix=plan,
        iterations=iters,
        marginal_error=err,
        converged=err < cfg.tol,
    )


def _solve_log(cost, p, q, cfg):
    lam = cfg.lam
    log_p = np.log(p)
    log_q = np.log(q)
    f = np.zeros(p.size)
    g = np.zeros(q.size)
    scaled = cost / lam
    err = np.inf
    it = 0
    polish_at = _POLISH_FIRST
    small = p.size + q.size <= _POLISH_MAX_SIZE
    for it in range(1, cfg.max_iter + 1):
        f = lam * (log_p - logsumexp(g[None, :] / lam - scaled, axis=1))
        g = lam * (log_q - logsumexp(f[:, None] / lam - scaled, axis=0))
        plan = np.exp((f[:, None] + g[None, :]) / lam - scaled)
        err = _l1_error(plan, p, q)
        if err < cfg.tol:
            break
        if small and it >= polish_at:
            polish_at *= 5
            out = _newton_polish(scaled, p, q, f, g, lam)
            if out is not None and out[3] < err:
                f, g, plan, err = out
                if err < cfg.tol:
                    break
    return plan, it, err


def _newton_polish(scaled, p, q, f, g, lam):
    """Root-solve the marginal residuals in the dual potentials.

    The residual map is smooth with Jacobian (1/lam) * [[diag(r), plan],
    [plan^T, diag(c)]]; the shift invariance of the potentials is removed
    by pinning the last column potential at its current value. When the
    plan concentrates onto disjoint support (small lam), one invariance
    per connected component survives and the Jacobian turns singular;
    "hybr" gives up there, so Levenberg-Marquardt is tried next - any
    point of the resulting root manifold yields the same plan. Returns
    the improved (f, g, plan, error) or None when no attempt went
    anywhere useful.
    """
    m, n = scaled.shape
    g_last = g[-1]

    def fun_jac(theta):
        fv = theta[:m]
        gv = np.append(theta[m:], g_last)
        expo = (fv[:, None] + gv[None, :]) / lam - scaled
        pi = np.exp(np.minimum(expo, 700.0))
        r = pi.sum(axis=1)
        c = pi.sum(axis=0)
        res = np.concatenate([r - p, (c - q)[:-1]])
        top = np.concatenate([np.diag(r), pi[:, :-1]], axis=1)
        bot = np.concatenate([pi[:, :-1].T, np.diag(c[:-1])], axis=1)
        return res, np.concatenate([top, bot], axis=0) / lam

    x0 = np.concatenate([f, g[:-1]])
    best = None
    for method in ("hybr", "lm"):
        try:
            sol = root(fun_jac, x0, jac=True, method=method)
        except Exception:
            continue
        fv = sol.x[:m]
        gv = np.append(sol.x[m:], g_last)
        expo = (fv[:, None] + gv[None, :]) / lam - scaled
        if expo.max() > 700.0:
            continue
        plan = np.exp(expo)
        if not np.all(np.isfinite(plan)):
            continue
        err = _l1_error(plan, p, q)
        if best is None or err < best[3]:
            best = (fv, gv, plan, err)
        if best[3] < 1e-12:
            break
    return best


def _solve_scaling(cost, p, q, cfg):
    kernel = np.exp(-cost / cfg.lam)
    v = np.ones(q.size)
    err = np.inf
    it = 0
    for it in range(1, cfg.max_iter + 1):
        u = p / (kernel @ v)
        v = q / (kernel.T @ u)
        plan = u[:, None] * kernel * v[None, :]
        err = _l1_error(plan, p, q)
        if err < cfg.tol:
            break
    return plan, it, err


def _l1_error(plan, p, q):
    row_err = float(np.abs(plan.sum(axis=1) - p).sum())
    col_err = float(np.abs(plan.sum(axis=0) - q).sum())
    return max(row_err, col_err)


def entropy(plan: np.ndarray) -> float:
    """Negative-entropy value sum_ij plan_ij * ln(plan_ij), with 0 ln 0 = 0."""
    plan = np.asarray(plan, dtype=float)
    if np.any(plan < 0):
        raise ValueError("plan has negative entries")
    return float(xlogy(plan, plan).sum())


def transport_cost(plan: np.ndarray, cost: np.ndarray) -> float:
    """Linear transport cost sum_ij plan_ij * cost_ij."""
    return float(np.sum(np.asarray(plan) * np.asarray(cost)))


def marginal_error(plan: np.ndarray, p: np.ndarray, q: np.ndarray) -> tuple[float, float]:
    """L1 deviations of the plan's marginals from (p, q).

    Returns
    -------
    (float, float)
        ``(||plan @ 1 - p||_1, ||plan.T @ 1 - q||_1)``.
    """
    plan = np.asarray(plan, dtype=float)
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if plan.shape != (p.size, q.size):
        raise ValueError(
            f"plan shape {plan.shape} does not match histogram sizes "
            f"({p.size}, {q.size})"
        )
    row_err = float(np.abs(plan.sum(axis=1) - p).sum())
    col_err = float(np.abs(plan.sum(axis=0) - q).sum())
    return row_err, col_err


def exact_ot_oracle(cost: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Exact unregularized OT optimizer for tiny instances, by enumeration.

    Square problems with uniform marginals are solved by scanning all
    permutation couplings. Otherwise every extreme point of the coupling
    polytope is generated by the greedy rule (pick any remaining cell,
    move min(row mass, column mass), recurse), which reaches every vertex
    under some cell ordering, and the cheapest one is returned.

    Parameters
    ----------
    cost : ndarray of shape (m, n)
    p, q : histograms

    Returns
    -------
    ndarray of shape (m, n)
        An exact minimizer of the linear transport cost.

    Raises
    ------
    ValueError
        If the instance is too large to enumerate.
    """
    cost, p, q = _check_inputs(cost, p, q)
    m, n = cost.shape

    uniform = (
        m == n
        and np.allclose(p, 1.0 / m, rtol=0, atol=1e-12)
        and np.allclose(q, 1.0 / n, rtol=0, atol=1e-12)
    )
    if uniform and m <= MAX_ORACLE_PERM:
        return _best_permutation_plan(cost)
    if m * n <= MAX_ORACLE_CELLS:
        return _best_vertex_plan(cost, p, q)
    raise ValueError(
        f"instance {m}x{n} too large for exact enumeration "
        f"(need uniform square with n <= {MAX_ORACLE_PERM}, or at most "
        f"{MAX_ORACLE_CELLS} cells)"
    )


def _best_permutation_plan(cost):
    n = cost.shape[0]
    idx = np.arange(n)
    best_perm = None
    best_cost = np.inf
    for perm in itertools.permutations(range(n)):
        c = cost[idx, perm].sum()
        if c < best_cost:
            best_cost = c
            best_perm = perm
    plan = np.zeros_like(cost)
    plan[idx, best_perm] = 1.0 / n
    return plan


def _best_vertex_plan(cost, p, q):
    memo = {}

    def key(pr, qr):
        return (tuple(np.round(pr, 12)), tuple(np.round(qr, 12)))

    def search(pr, qr):
        k = key(pr, qr)
        if k in memo:
            return memo[k]
        rows = np.nonzero(pr > 0)[0]
        cols = np.nonzero(qr > 0)[0]
        if rows.size == 0:
            memo[k] = (0.0, ())
            return memo[k]
        best = (np.inf, ())
        for i in rows:
            for j in cols:
                t = min(pr[i], qr[j])
                pr2 = pr.copy()
                qr2 = qr.copy()
                pr2[i] -= t
                qr2[j] -= t
                # kill subtraction dust so near-tied lines close properly
                pr2[pr2 < 1e-15] = 0.0
                qr2[qr2 < 1e-15] = 0.0
                sub_cost, sub_moves = search(pr2, qr2)
                total = cost[i, j] * t + sub_cost
                if total < best[0]:
                    best = (total, ((i, j, t),) + sub_moves)
        memo[k] = best
        return best

    _, moves = search(p.copy(), q.copy())
    plan = np.zeros_like(cost)
    for i, j, t in moves:
        plan[i, j] += t
    return plan
