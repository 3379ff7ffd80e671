"""Operator-splitting parameter theory and the KKT stopping metric.

This module owns the constants that make the forward-backward iteration
converge: the cocoercivity constant chi, the per-agent step sizes (tau_i,
delta, eps_i) with their Gershgorin-style validity bounds, the relaxation
bounds for the synchronous and asynchronous regimes, and the preconditioning
matrix used to certify a parameter set.  It also provides the natural-map KKT
residual that every solver uses as its stopping criterion.
"""

import numpy as np

from .game import incidence_matrix, laplacian, monotonicity_constants, pseudo_gradient


class ThetaTooSmall(Exception):
    """theta must exceed 1/(2 chi) for the forward-backward step to contract."""


class StepConfig:
    """Full parameter set of the splitting iteration.

    Parameters
    ----------
    rho : float in (0, 1]
        Consensus gain on the dual disagreement.
    delta : float
        Auxiliary-variable step.
    tau, eps : (N,) arrays
        Per-agent primal and dual steps.
    theta : float
        Preconditioner diagonal margin; must exceed 1/(2 chi).
    chi, alpha, ell : floats
        Cocoercivity, strong-monotonicity and Lipschitz constants.
    eta : float or None
        Relaxation step; None means "not chosen yet" (the bound depends on
        the execution mode, so solvers fill in their own default).
    """

    def __init__(self, rho, delta, tau, eps, theta, chi, alpha, ell, eta=None):
        if not 0.0 < rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {rho}")
        self.rho = float(rho)
        self.delta = float(delta)
        self.tau = np.atleast_1d(np.asarray(tau, dtype=float))
        self.eps = np.atleast_1d(np.asarray(eps, dtype=float))
        self.theta = float(theta)
        self.chi = float(chi)
        self.alpha = float(alpha)
        self.ell = float(ell)
        self.eta = None if eta is None else float(eta)
        if np.any(self.tau <= 0) or np.any(self.eps <= 0) or self.delta <= 0:
            raise ValueError("step sizes must be positive")

    def bound_violations(self, game):
        """Re-check the step-size inequalities; returns a list of messages."""
        norms = game.block_norms()
        degrees = game.graph.degrees
        out = []
        if self.theta <= 1.0 / (2.0 * self.chi):
            out.append(f"theta {self.theta:.6g} <= 1/(2 chi) = {1/(2*self.chi):.6g}")
        bad = self.tau > 1.0 / (norms + self.theta)
        for i in np.nonzero(bad)[0]:
            out.append(f"tau[{i}] {self.tau[i]:.6g} above bound "
                       f"{1/(norms[i]+self.theta):.6g}")
        if self.delta > 1.0 / (2.0 * self.rho + self.theta):
            out.append(f"delta {self.delta:.6g} above bound "
                       f"{1/(2*self.rho+self.theta):.6g}")
        bad = self.eps > 1.0 / (self.rho * degrees + norms + self.theta)
        for i in np.nonzero(bad)[0]:
            out.append(f"eps[{i}] {self.eps[i]:.6g} above bound "
                       f"{1/(self.rho*degrees[i]+norms[i]+self.theta):.6g}")
        return out

    def to_dict(self):
        d = {"rho": self.rho, "delta": self.delta, "tau": self.tau.tolist(),
             "eps": self.eps.tolist(), "theta": self.theta, "chi": self.chi,
             "alpha": self.alpha, "ell": self.ell}
        if self.eta is not None:
            d["eta"] = self.eta
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d["rho"], d["delta"], d["tau"], d["eps"], d["theta"],
                   d["chi"], d["alpha"], d["ell"], eta=d.get("eta"))


class KktResidual:
    """Natural-map residuals of the shared-multiplier KKT system.

    All components are nonnegative and vanish exactly at a v-GNE (with the
    disagreement measuring how far the per-agent multiplier copies are from
    consensus, when copies are supplied).
    """

    def __init__(self, primal, dual, disagreement, violation):
        self.primal = float(primal)
        self.dual = float(dual)
        self.disagreement = float(disagreement)
        self.violation = float(violation)

    def max(self):
        return max(self.primal, self.dual, self.disagreement, self.violation)

    def __repr__(self):
        return (f"KktResidual(primal={self.primal:.3e}, dual={self.dual:.3e}, "
                f"disagreement={self.disagreement:.3e}, "
                f"violation={self.violation:.3e})")


def cocoercivity_constant(alpha, ell, L):
    """chi = min{alpha / ell^2, 1 / lambda_max(L)}.

    Parameters
    ----------
    alpha, ell : floats
        Strong-monotonicity and Lipschitz constants of the pseudo-gradient.
    L : (N, N) array
        Node Laplacian of the communication graph.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if ell < alpha:
        raise ValueError("ell must be at least alpha")
    lam_max = float(np.linalg.eigvalsh(np.asarray(L, dtype=float))[-1])
    if lam_max <= 0:
        # single node, no edges: only the Lipschitz part binds
        return alpha / ell ** 2
    return min(alpha / ell ** 2, 1.0 / lam_max)


def derive_steps(game, rho=1.0, theta="auto", safety=0.99, alpha=None, ell=None):
    """Step sizes from the validity bounds, shrunk by a safety factor.

        tau_i = safety / (||A_i|| + theta)
        delta = safety / (2 rho + theta)
        eps_i = safety / (rho |N_i| + ||A_i|| + theta)

    theta="auto" picks theta = 1/chi.  alpha and ell are read from the
    affine cost representation unless supplied explicitly.  The relaxation
    eta is left unset; it depends on the execution mode.

    Raises
    ------
    ThetaTooSmall
        When an explicit theta does not exceed 1/(2 chi).
    """
    if not 0.0 < safety <= 1.0:
        raise ValueError("safety factor must lie in (0, 1]")
    if alpha is None or ell is None:
        alpha, ell = monotonicity_constants(game.cost)
    chi = cocoercivity_constant(alpha, ell, laplacian(game.graph))
    if theta == "auto":
        theta = 1.0 / chi
    theta = float(theta)
    if theta <= 1.0 / (2.0 * chi):
        raise ThetaTooSmall(f"theta must exceed 1/(2 chi) = {1/(2*chi):.6g}, "
                            f"got {theta:.6g}")
    norms = game.block_norms()
    degrees = game.graph.degrees
    tau = safety / (norms + theta)
    delta = safety / (2.0 * rho + theta)
    eps = safety / (rho * degrees + norms + theta)
    return StepConfig(rho, delta, tau, eps, theta, chi, alpha, ell)


def eta_bound_sync(chi, theta):
    """Supremum of admissible relaxation for the synchronous iteration.

    Returns (4 chi theta - 1) / (2 chi theta); admissible eta lie strictly
    below this value.
    """
    ct = chi * theta
    if ct <= 0.5:
        raise ValueError(f"chi*theta must exceed 1/2, got {ct:.6g}")
    return (4.0 * ct - 1.0) / (2.0 * ct)


def eta_bound_async(chi, theta, n_agents, p_min, phi_max, c=0.9):
    """Inclusive upper bound on the relaxation for asynchronous execution.

        c N p_min / (2 phi_max sqrt(p_min) + 1) * (2 - 1/(2 chi theta))

    The bound shrinks with the worst-case delay phi_max and grows with the
    smallest activation probability p_min.
    """
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    if not 0.0 < p_min <= 1.0 / n_agents + 1e-12:
        raise ValueError(f"p_min must lie in (0, 1/N], got {p_min}")
    if phi_max < 0:
        raise ValueError("phi_max must be nonnegative")
    ct = chi * theta
    if ct <= 0.5:
        raise ValueError(f"chi*theta must exceed 1/2, got {ct:.6g}")
    return (c * n_agents * p_min / (2.0 * phi_max * np.sqrt(p_min) + 1.0)
            * (2.0 - 1.0 / (2.0 * ct)))


def phi_matrix(cfg, game):
    """Materialize the preconditioning matrix (for certification only).

    Block order col(x, sigma, lambda) with sizes (n, mE, mN):

        [ diag(tau)^-1      0          -Lambda^T   ]
        [ 0             I/delta         rho Vbar   ]
        [ -Lambda       rho Vbar^T    diag(eps)^-1 ]

    where Lambda = blkdiag(A_i) and Vbar = V kron I_m.  The solvers never
    touch this matrix; it exists so tests can verify positive definiteness
    of Phi - theta I for derived parameters.
    """
    n, m = game.dim, game.m
    N, E = game.n_agents, game.n_edges
    size = n + m * E + m * N
    Phi = np.zeros((size, size))
    # primal block
    tau_full = np.repeat(cfg.tau, game.block_sizes)
    Phi[:n, :n] = np.diag(1.0 / tau_full)
    # sigma block
    sl_s = slice(n, n + m * E)
    Phi[sl_s, sl_s] = np.eye(m * E) / cfg.delta
    # lambda block
    sl_l = slice(n + m * E, size)
    eps_full = np.repeat(cfg.eps, m)
    Phi[sl_l, sl_l] = np.diag(1.0 / eps_full)
    # off-diagonal couplings
    Lam = np.zeros((m * N, n))
    for i in range(N):
        Lam[i * m:(i + 1) * m, game.offsets[i]:game.offsets[i + 1]] = \
            game.coupling.blocks[i]
    Phi[:n, sl_l] = -Lam.T
    Phi[sl_l, :n] = -Lam
    Vbar = np.kron(incidence_matrix(game.graph), np.eye(m))
    Phi[sl_s, sl_l] = cfg.rho * Vbar
    Phi[sl_l, sl_s] = cfg.rho * Vbar.T
    return Phi


def kkt_residual(game, x, lam, lam_stack=None):
    """Natural-map KKT residual at (x, lambda) with a shared multiplier.

    Parameters
    ----------
    game : GameInstance
    x : (n,) array
    lam : (m,) array
        Shared multiplier; for per-agent copies pass their mean here and the
        stacked copies as lam_stack to get the disagreement component.
    lam_stack : (N, m) array, optional

    Returns
    -------
    KktResidual
        primal = ||x - proj_box(x - (F(x) + A' lam))||
        dual = ||lam - proj_+(lam - (b - A x))||
        violation = ||max(0, A x - b)||_inf
        disagreement = ||(L kron I_m) stack(lam_i)|| (0 when no copies given)
    """
    x = np.asarray(x, dtype=float)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (game.m,):
        raise ValueError(f"expected multiplier of shape ({game.m},), got {lam.shape}")
    A = game.coupling.full_matrix
    b = game.coupling.total
    F = pseudo_gradient(game, x)
    x_nat = np.clip(x - (F + A.T @ lam), game.lower, game.upper)
    primal = float(np.linalg.norm(x - x_nat))
    slack = b - A @ x
    dual = float(np.linalg.norm(lam - np.maximum(lam - slack, 0.0)))
    violation = float(np.max(np.maximum(A @ x - b, 0.0), initial=0.0))
    disagreement = 0.0
    if lam_stack is not None:
        L = laplacian(game.graph)
        disagreement = float(np.linalg.norm(L @ np.asarray(lam_stack, dtype=float)))
    return KktResidual(primal, dual, disagreement, violation)
