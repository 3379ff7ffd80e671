"""Independent v-GNE reference solver and brute-force checkers.

Everything here exists to cross-examine the operator-splitting solvers, so
it deliberately shares none of their machinery: the equilibrium is found by
an extragradient iteration on the variational inequality over the *shared*
feasible set.  Projections onto box ∩ {Ax <= b} go through the dual of the
projection QP — a smooth concave problem in the m coupling multipliers,
solved by accelerated projected gradient with adaptive restart (m is small,
the box clip absorbs the bounds, and the multipliers warm-start from one
extragradient step to the next).  Equilibrium multipliers are recovered
afterwards from the active rows by non-negative least squares.
"""

import numpy as np
from scipy.optimize import linprog, nnls

from .game import NonConvergence, monotonicity_constants, pseudo_gradient
from .splitting import kkt_residual


class Infeasible(Exception):
    """The shared feasible set is empty (or a projection failed to settle)."""


class OracleSolution:
    """Reference equilibrium with its recovered multiplier and residual."""

    def __init__(self, x, lam, residual, iterations):
        self.x = np.asarray(x, dtype=float)
        self.lam = np.asarray(lam, dtype=float)
        self.residual = residual
        self.iterations = int(iterations)

    def __repr__(self):
        return ("OracleSolution(x=%s, lam=%s, max_residual=%.3e, iters=%d)"
                % (np.array2string(self.x, precision=6),
                   np.array2string(self.lam, precision=6),
                   self.residual.max(), self.iterations))


def slater_margin(game):
    """Largest t with  A x + t <= b  for some x in the box (LP, HiGHS).

    Positive means strictly feasible; +inf cannot occur for m >= 1 rows
    since each row bounds t.  Returns -inf when even the relaxed problem is
    infeasible.
    """
    A = game.coupling.full_matrix
    b = game.coupling.total
    m, n = A.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, np.ones((m, 1))])
    bounds = [(lo, hi) for lo, hi in zip(game.lower, game.upper)]
    bounds.append((None, None))
    res = linprog(c, A_ub=A_ub, b_ub=b, bounds=bounds, method="highs")
    if res.status == 3:
        return np.inf
    if not res.success:
        return -np.inf
    return float(-res.fun)


def _coupling_lipschitz(A):
    """Gradient Lipschitz constant of the projection dual: lmax(A A^T)."""
    if A.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(A @ A.T)[-1])


def _dual_project(A, b, lower, upper, v, tol=1e-12, max_iter=100_000,
                  theta0=None, lip=None):
    """Projection onto box ∩ {Ax <= b}; returns (x, theta).

    Works on the dual of the projection QP: for multipliers theta >= 0 of
    the coupling rows, the inner box-constrained problem has the closed form
    x(theta) = clip(v - A^T theta) and the dual gradient is A x(theta) - b,
    Lipschitz with lmax(A A^T).  Accelerated projected gradient with a
    gradient-based restart; terminates on the dual fixed-point residual,
    which bounds feasibility and complementarity together.
    """
    v = np.asarray(v, dtype=float)
    x = np.clip(v, lower, upper)
    if np.all(A @ x <= b + 1e-15):
        return x, np.zeros(b.size)
    if lip is None:
        lip = _coupling_lipschitz(A)
    if lip <= 0.0:
        raise Infeasible("coupling rows are all zero yet violated")
    step = 1.0 / lip
    eps = tol * (1.0 + np.max(np.abs(b)))
    theta = np.zeros(b.size) if theta0 is None else np.array(theta0,
                                                             dtype=float)
    theta_prev = theta.copy()
    t_k = 1.0
    for _ in range(max_iter):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        mom = theta + ((t_k - 1.0) / t_next) * (theta - theta_prev)
        mom = np.maximum(mom, 0.0)
        x = np.clip(v - A.T @ mom, lower, upper)
        grad = A @ x - b
        theta_new = np.maximum(mom + step * grad, 0.0)
        if np.dot(mom - theta_new, theta_new - theta) > 0.0:
            t_next = 1.0                      # adaptive restart
        if np.max(np.abs(theta_new - theta)) <= eps * step:
            x = np.clip(v - A.T @ theta_new, lower, upper)
            resid = np.maximum(theta_new + step * (A @ x - b), 0.0) - theta_new
            if np.max(np.abs(resid)) <= eps * step:
                return x, theta_new
        theta_prev, theta, t_k = theta, theta_new, t_next
    raise Infeasible("dual projection did not settle within %d iterations"
                     % max_iter)


def project_feasible(game, v, tol=1e-12, max_iter=100_000):
    """Euclidean projection of v onto  box  intersected with  {Ax <= b}.

    A clipped point already satisfying the coupling is returned immediately;
    otherwise the projection is computed through its dual (see
    _dual_project).
    """
    x, _ = _dual_project(game.coupling.full_matrix, game.coupling.total,
                         game.lower, game.upper, v, tol=tol,
                         max_iter=max_iter)
    return x


def recover_multiplier(game, x, act_tol=None, int_tol=None):
    """Least-squares multiplier of the active coupling rows at x.

    On strategy coordinates strictly inside their box the stationarity
    F(x) + A' lam = 0 must hold exactly, so lam solves a non-negative
    least-squares problem restricted to those coordinates and to rows with
    (near) zero slack.
    """
    A = game.coupling.full_matrix
    b = game.coupling.total
    F = pseudo_gradient(game, x)
    if act_tol is None:
        act_tol = 1e-5 * (1.0 + np.max(np.abs(b)))
    if int_tol is None:
        int_tol = 1e-6 * (1.0 + np.max(game.upper - game.lower))
    slack = b - A @ x
    active = np.flatnonzero(slack <= act_tol)
    lam = np.zeros(game.m)
    if active.size == 0:
        return lam
    interior = np.flatnonzero((x - game.lower > int_tol)
                              & (game.upper - x > int_tol))
    if interior.size == 0:
        interior = np.arange(x.size)
    B = A[np.ix_(active, interior)].T
    d = -F[interior]
    sol, _ = nnls(B, d)
    lam[active] = sol
    return lam


def vgne_oracle(game, tol=1e-8, max_iter=500_000, gamma=None, x0=None,
                proj_tol=1e-13, check_every=25):
    """Reference v-GNE by extragradient on VI(F, box ∩ {Ax <= b}).

    Parameters
    ----------
    game : GameInstance
    tol : float
        Threshold on the natural-map residual ||x - P(x - F(x))||.
    gamma : float, optional
        Step size; defaults to alpha / ell**2 and is halved whenever the
        residual record degrades by an order of magnitude.
    x0 : array, optional
        Start point (projected feasible midpoint when omitted).

    Returns
    -------
    OracleSolution

    Raises
    ------
    NonConvergence
        When max_iter extragradient steps do not reach tol.
    """
    alpha, ell = monotonicity_constants(game.cost)
    if gamma is None:
        gamma = alpha / ell ** 2
    A = game.coupling.full_matrix
    b = game.coupling.total
    lo, up = game.lower, game.upper
    lip = _coupling_lipschitz(A)
    th_y = th_x = th_r = None     # warm-started projection multipliers
    if x0 is None:
        x0, _ = _dual_project(A, b, lo, up, 0.5 * (lo + up), tol=proj_tol,
                              lip=lip)
    x = np.asarray(x0, dtype=float)
    best = np.inf
    best_x = x.copy()
    for it in range(1, max_iter + 1):
        y, th_y = _dual_project(A, b, lo, up,
                                x - gamma * pseudo_gradient(game, x),
                                tol=proj_tol, theta0=th_y, lip=lip)
        x, th_x = _dual_project(A, b, lo, up,
                                x - gamma * pseudo_gradient(game, y),
                                tol=proj_tol, theta0=th_x, lip=lip)
        if it % check_every == 0 or it == max_iter:
            p, th_r = _dual_project(A, b, lo, up,
                                    x - pseudo_gradient(game, x),
                                    tol=proj_tol, theta0=th_r, lip=lip)
            r = np.linalg.norm(x - p)
            if not np.isfinite(r) or r > 10.0 * best + 1e-12:
                gamma *= 0.5          # divergence guard
                x = best_x.copy()
                continue
            if r < best:
                best, best_x = r, x.copy()
            if r <= tol:
                lam = recover_multiplier(game, x)
                res = kkt_residual(game, x, lam)
                return OracleSolution(x, lam, res, it)
    raise NonConvergence("extragradient stalled at residual %.3e after %d "
                         "iterations" % (best, max_iter))


def brute_force_equilibrium(game, grid=101):
    """Grid search for the point minimizing the VI natural-map residual.

    Only sensible for tiny instances (scalar strategies, a few agents): the
    feasible lattice of the full box is enumerated and the point with the
    smallest ||x - P(x - F(x))|| wins.  Accuracy is limited by the lattice
    spacing.
    """
    if game.dim > 3:
        raise ValueError("brute force is reserved for games with <= 3 "
                         "strategy coordinates in total")
    A = game.coupling.full_matrix
    b = game.coupling.total
    axes = [np.linspace(game.lower[i], game.upper[i], grid)
            for i in range(game.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    feas = pts[np.all(pts @ A.T <= b + 1e-12, axis=1)]
    if game.cost.is_affine:
        F = feas @ game.cost.M.T + game.cost.u
    else:
        F = np.array([pseudo_gradient(game, x) for x in feas])
    proj = _batch_project(game, feas - F)
    resid = np.linalg.norm(feas - proj, axis=1)
    return feas[int(np.argmin(resid))]


def _batch_project(game, V, tol=1e-10, max_iter=20000):
    """Dual projection of every row of V at once (brute-force helper)."""
    A = game.coupling.full_matrix
    b = game.coupling.total
    lip = _coupling_lipschitz(A)
    X = np.clip(V, game.lower, game.upper)
    if lip <= 0.0 or np.all(X @ A.T <= b + 1e-15):
        return X
    step = 1.0 / lip
    eps = tol * (1.0 + np.max(np.abs(b)))
    theta = np.zeros((V.shape[0], b.size))
    theta_prev = theta.copy()
    t_k = 1.0
    for _ in range(max_iter):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
        mom = np.maximum(theta + ((t_k - 1.0) / t_next)
                         * (theta - theta_prev), 0.0)
        X = np.clip(V - mom @ A, game.lower, game.upper)
        theta_new = np.maximum(mom + step * (X @ A.T - b), 0.0)
        if np.max(np.abs(theta_new - theta)) <= eps * step:
            X = np.clip(V - theta_new @ A, game.lower, game.upper)
            resid = (np.maximum(theta_new + step * (X @ A.T - b), 0.0)
                     - theta_new)
            if np.max(np.abs(resid)) <= eps * step:
                return X
        theta_prev, theta, t_k = theta, theta_new, t_next
    raise Infeasible("batched dual projection did not settle")
