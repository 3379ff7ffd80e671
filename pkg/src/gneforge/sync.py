"""SD-GENO: the synchronous distributed GNE-seeking iteration.

Every agent holds its strategy x_i, a local multiplier lambda_i and a node
auxiliary variable z_i.  One iteration gathers each neighbor's multiplier
once (a single communication round), then updates

    x~      = proj_box(x - tau (F(x) + Lambda' lam))
    z~      = z + rho delta d           with d = (L kron I_m) lam
    lam~    = proj_+(lam + eps (Lambda (2 x~ - x) - b - rho z - (2 delta rho^2 + 1) d))

and relaxes all three blocks by eta.  With z(0) = 0 the auxiliaries stay in
the range of the Laplacian, so (1' kron I_m) z = 0 along the whole run.
"""

import numpy as np

from .game import laplacian, pseudo_gradient
from .metrics import MetricsTrace, relative_distance
from .splitting import derive_steps, eta_bound_sync, kkt_residual


class SyncState:
    """Value-semantic iterate (x, lam, z); lam and z are (N, m) arrays."""

    def __init__(self, x, lam, z):
        self.x = np.asarray(x, dtype=float).copy()
        self.lam = np.asarray(lam, dtype=float).copy()
        self.z = np.asarray(z, dtype=float).copy()

    @classmethod
    def cold(cls, game):
        return cls(np.zeros(game.dim),
                   np.zeros((game.n_agents, game.m)),
                   np.zeros((game.n_agents, game.m)))


class SolveResult:
    """Outcome of a solver run; `converged` is a flag, never an exception."""

    def __init__(self, x, lam_mean, trace, converged, iterations, lam_stack=None):
        self.x = x
        self.lam_mean = lam_mean
        self.trace = trace
        self.converged = converged
        self.iterations = iterations
        self.lam_stack = lam_stack


def gather_disagreement(lam, graph):
    """One communication round: d_i = sum_{j in N_i} (lam_i - lam_j), stacked.

    Equals (L kron I_m) lam.  Kept as a separate function so tests can count
    how many gather rounds a step performs.
    """
    return laplacian(graph) @ lam


def sdgeno_step(state, game, cfg):
    """One synchronous iteration; returns a new SyncState."""
    if cfg.eta is None:
        raise ValueError("cfg.eta must be set for stepping")
    x, lam, z = state.x, state.lam, state.z
    d = gather_disagreement(lam, game.graph)
    F = pseudo_gradient(game, x)
    tau_full = np.repeat(cfg.tau, game.block_sizes)
    lam_pull = np.concatenate(
        [game.coupling.blocks[i].T @ lam[i] for i in range(game.n_agents)])
    x_t = np.clip(x - tau_full * (F + lam_pull), game.lower, game.upper)
    z_t = z + cfg.rho * cfg.delta * d
    coef = 2.0 * cfg.delta * cfg.rho ** 2 + 1.0
    drive = np.empty_like(lam)
    for i in range(game.n_agents):
        sl = slice(game.offsets[i], game.offsets[i + 1])
        drive[i] = (game.coupling.blocks[i] @ (2.0 * x_t[sl] - x[sl])
                    - game.coupling.shares[i] - cfg.rho * z[i] - coef * d[i])
    lam_t = np.maximum(lam + cfg.eps[:, None] * drive, 0.0)
    eta = cfg.eta
    return SyncState(x + eta * (x_t - x), lam + eta * (lam_t - lam),
                     z + eta * (z_t - z))


def sdgeno_solve(game, cfg=None, tol=1e-6, max_iter=100_000, state0=None,
                 x_star=None, record_trace=True, check_every=1):
    """Iterate SD-GENO until every KKT component and the disagreement <= tol.

    Parameters
    ----------
    game : GameInstance
    cfg : StepConfig, optional
        Derived from the game when omitted; a missing eta defaults to
        0.9 * eta_bound_sync.
    tol : float
        Threshold applied to primal/dual residuals, constraint violation and
        dual disagreement simultaneously.
    max_iter : int
    state0 : SyncState, optional
        Cold start (zeros) when omitted.
    x_star : (n,) array, optional
        Reference equilibrium for the rel_dist_to_opt trace column.
    check_every : int
        Iterations between residual evaluations (and trace rows); the run
        may overshoot the crossing by at most check_every - 1 iterations.

    Returns
    -------
    SolveResult
        With lam_mean the average of the per-agent multiplier copies (they
        agree at convergence) and converged=False when max_iter was reached.
    """
    if cfg is None:
        cfg = derive_steps(game)
    if cfg.eta is None:
        cfg.eta = 0.9 * eta_bound_sync(cfg.chi, cfg.theta)
    state = state0 if state0 is not None else SyncState.cold(game)
    trace = MetricsTrace(index_name="iter") if record_trace else None
    N, m = game.n_agents, game.m
    # hoisted constants for the hot loop (same math as sdgeno_step)
    L = laplacian(game.graph)
    Lam = np.zeros((N * m, game.dim))
    for i in range(N):
        Lam[i * m:(i + 1) * m, game.offsets[i]:game.offsets[i + 1]] = \
            game.coupling.blocks[i]
    bsh = np.vstack(game.coupling.shares)
    tau_full = np.repeat(cfg.tau, game.block_sizes)
    eps_col = np.asarray(cfg.eps)[:, None]
    coef = 2.0 * cfg.delta * cfg.rho ** 2 + 1.0
    eta = cfg.eta
    x, lam, z = state.x.copy(), state.lam.copy(), state.z.copy()
    converged = False
    it = 0
    while it < max_iter and not converged:
        burst = min(check_every, max_iter - it)
        for _ in range(burst):
            d = L @ lam
            F = pseudo_gradient(game, x)
            lam_pull = Lam.T @ lam.ravel()
            x_t = np.clip(x - tau_full * (F + lam_pull),
                          game.lower, game.upper)
            z_t = z + cfg.rho * cfg.delta * d
            drive = ((Lam @ (2.0 * x_t - x)).reshape(N, m)
                     - bsh - cfg.rho * z - coef * d)
            lam_t = np.maximum(lam + eps_col * drive, 0.0)
            x = x + eta * (x_t - x)
            lam = lam + eta * (lam_t - lam)
            z = z + eta * (z_t - z)
        it += burst
        lam_mean = lam.mean(axis=0)
        res = kkt_residual(game, x, lam_mean, lam_stack=lam)
        if record_trace:
            trace.append(it, relative_distance(x, x_star), res)
        converged = res.max() <= tol
    lam_mean = lam.mean(axis=0)
    return SolveResult(x, lam_mean, trace, converged, it,
                       lam_stack=lam.copy())
