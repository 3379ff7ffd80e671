"""Seeded network Cournot benchmark instances and graph-density sweeps.

Firms sell into a subset of markets; the per-market price is linear in the
aggregate supply, P(x) = P_bar - D A x, and each market imposes a shared
capacity A x <= b.  Two firms communicate when they compete in at least one
common market, so the inter-firm graph follows from the participation
pattern.  All draws come from one numpy Generator seeded by the spec, which
makes generation a pure function of (spec, seed).
"""

import numpy as np

from .asynchronous import ActivationModel, DelayModel
from .game import (AffineCoupling, BoxSet, CommGraph, DisconnectedGraph,
                   monotonicity_constants, quadratic_game)
from ._rng import derive_seed


class CournotSpec:
    """Parameter ranges for instance generation (defaults: the benchmark's).

    pattern, when given, is an (N, m) boolean participation matrix; left to
    None a random pattern is drawn with the stated join probability, firms
    guaranteed at least one market each.
    """

    def __init__(self, n_firms=8, n_markets=3, seed=0, pattern=None,
                 join_prob=0.55, x_max_range=(10.0, 45.0),
                 a_range=(0.6, 1.0), b_range=(20.0, 100.0),
                 pbar_range=(250.0, 500.0), d_range=(1.0, 5.0),
                 q_quad_range=(1.0, 8.0), q_lin_range=(1.0, 4.0)):
        self.n_firms = int(n_firms)
        self.n_markets = int(n_markets)
        self.seed = int(seed)
        self.pattern = None if pattern is None else np.asarray(pattern, bool)
        self.join_prob = float(join_prob)
        self.x_max_range = x_max_range
        self.a_range = a_range
        self.b_range = b_range
        self.pbar_range = pbar_range
        self.d_range = d_range
        self.q_quad_range = q_quad_range
        self.q_lin_range = q_lin_range
        if self.pattern is not None and self.pattern.shape != (
                self.n_firms, self.n_markets):
            raise ValueError("pattern must be (n_firms, n_markets)")


def _participation_graph(pattern):
    """Edges between firms sharing at least one market."""
    N = pattern.shape[0]
    edges = []
    for i in range(N):
        for j in range(i + 1, N):
            if np.any(pattern[i] & pattern[j]):
                edges.append((i, j))
    return CommGraph(N, edges)


def _draw_pattern(rng, n_firms, n_markets, join_prob):
    pattern = rng.random((n_firms, n_markets)) < join_prob
    for i in range(n_firms):
        if not pattern[i].any():
            pattern[i, rng.integers(n_markets)] = True
    return pattern


def generate_instance(spec, graph=None):
    """Build a validated Cournot GameInstance from the spec.

    A random participation pattern is redrawn until the firm graph is
    connected; an explicitly given pattern that is disconnected raises
    DisconnectedGraph instead.  Instances with a non-positive strong
    monotonicity constant are rejected and redrawn (the count is kept on
    game.generation).  An explicit `graph` overrides the participation
    graph — used by the density sweeps, where the communication topology is
    the variable under study.

    Returns
    -------
    GameInstance
        With a .generation dict recording seed, rejection counts and the
        participation pattern.
    """
    rng = np.random.default_rng(spec.seed)
    N, m = spec.n_firms, spec.n_markets
    conn_resamples = 0
    alpha_rejections = 0
    for _ in range(1000):
        if spec.pattern is not None:
            pattern = spec.pattern.copy()
        else:
            pattern = _draw_pattern(rng, N, m, spec.join_prob)
        if graph is not None:
            comm = graph
        else:
            comm = _participation_graph(pattern)
            if not comm.is_connected():
                if spec.pattern is not None:
                    raise DisconnectedGraph("participation pattern yields a "
                                            "disconnected firm graph")
                conn_resamples += 1
                continue

        boxes, A_blocks, shares, Q_blocks, q_blocks = [], [], [], [], []
        b = rng.uniform(*spec.b_range, size=m)
        P_bar = rng.uniform(*spec.pbar_range, size=m)
        D = rng.uniform(*spec.d_range, size=m)
        for i in range(N):
            served = np.flatnonzero(pattern[i])
            n_i = served.size
            x_max = rng.uniform(*spec.x_max_range, size=n_i)
            boxes.append(BoxSet(np.zeros(n_i), x_max))
            A_i = np.zeros((m, n_i))
            A_i[served, np.arange(n_i)] = rng.uniform(*spec.a_range,
                                                      size=n_i)
            A_blocks.append(A_i)
            shares.append(b / N)
            Q_blocks.append(np.diag(rng.uniform(*spec.q_quad_range,
                                                size=n_i)))
            q_blocks.append(rng.uniform(*spec.q_lin_range, size=n_i))
        coupling = AffineCoupling(A_blocks, shares)
        game = quadratic_game(boxes, coupling, comm, Q_blocks, q_blocks,
                              price=(P_bar, D))
        alpha, _ = monotonicity_constants(game.cost)
        if alpha <= 0.0:
            alpha_rejections += 1
            continue
        game.generation = {"seed": spec.seed, "pattern": pattern,
                           "connectivity_resamples": conn_resamples,
                           "alpha_rejections": alpha_rejections}
        return game
    raise RuntimeError("could not draw a valid instance in 1000 attempts")


def random_connected_graph(n_nodes, avg_degree, seed=0):
    """Connected graph with mean degree within 0.5 of the target.

    A random spanning tree guarantees connectivity; extra edges are then
    sampled uniformly among the absent pairs until the edge budget
    round(avg_degree * N / 2) is met.  avg_degree = N-1 gives the complete
    graph.
    """
    N = int(n_nodes)
    if not 2.0 <= avg_degree <= N - 1:
        raise ValueError("infeasible degree: need 2 <= avg_degree <= N-1")
    rng = np.random.default_rng(seed)
    target_edges = int(round(avg_degree * N / 2.0))
    order = rng.permutation(N)
    edges = set()
    for idx in range(1, N):
        parent = order[rng.integers(idx)]
        a, bnode = int(order[idx]), int(parent)
        edges.add((min(a, bnode), max(a, bnode)))
    all_pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
    missing = [e for e in all_pairs if e not in edges]
    extra = target_edges - len(edges)
    if extra > 0:
        pick = rng.choice(len(missing), size=min(extra, len(missing)),
                          replace=False)
        for p in pick:
            edges.add(missing[p])
    graph = CommGraph(N, sorted(edges))
    mean_deg = 2.0 * graph.n_edges / N
    if abs(mean_deg - avg_degree) > 0.5:
        raise ValueError("could not hit the degree target: got %.2f for %s"
                         % (mean_deg, avg_degree))
    return graph


def sweep_instance(n_firms, avg_degree, seed=0, n_markets=3):
    """Cournot instance whose communication graph has the given density.

    Firms serve one or two markets (drawn uniformly), and the communication
    topology is replaced by a random connected graph of the requested mean
    degree — the market structure stays fixed while the graph density is
    the swept variable.
    """
    rng_seed = derive_seed(seed, "sweep-pattern") % (2 ** 31)
    rng = np.random.default_rng(rng_seed)
    pattern = np.zeros((n_firms, n_markets), dtype=bool)
    for i in range(n_firms):
        served = rng.choice(n_markets, size=int(rng.integers(1, 3)),
                            replace=False)
        pattern[i, served] = True
    graph = random_connected_graph(n_firms, avg_degree,
                                   seed=derive_seed(seed, "sweep-graph")
                                   % (2 ** 31))
    spec = CournotSpec(n_firms=n_firms, n_markets=n_markets, seed=seed,
                       pattern=pattern)
    return generate_instance(spec, graph=graph)


def scenario_config(which, n_agents=8, seed=0):
    """Activation/delay models of the benchmark's three operating regimes.

    A: uniform activation, fresh communication.  B: uniform activation,
    delays uniform on {0..3}.  C: skewed activation (first half of the
    agents wake twice as often as the rest), fresh communication.
    """
    which = which.upper()
    act_seed = derive_seed(seed, "activation")
    delay_seed = derive_seed(seed, "delays")
    if which == "A":
        return (ActivationModel.uniform(n_agents, seed=act_seed),
                DelayModel.zero())
    if which == "B":
        return (ActivationModel.uniform(n_agents, seed=act_seed),
                DelayModel.uniform(3, seed=delay_seed))
    if which == "C":
        n_hi = (n_agents + 1) // 2
        p = np.empty(n_agents)
        p[:n_hi] = 4.0 / (3.0 * n_agents)
        p[n_hi:] = 2.0 / (3.0 * n_agents)
        p /= p.sum()
        return (ActivationModel.iid(p, seed=act_seed), DelayModel.zero())
    raise ValueError("scenario must be A, B or C")
