"""Game data model: strategy boxes, affine coupling, communication graph, costs.

The central object is the :class:`GameInstance`, which bundles everything the
solvers consume: per-agent box constraint sets, the affine coupling
``A x <= b`` split into per-agent blocks, an undirected communication graph,
and a cost model exposing the partial gradients (the pseudo-gradient of the
game).  All objects are treated as immutable after construction and are safe
to share between threads.
"""

import json

import numpy as np


class NotStronglyMonotone(Exception):
    """The pseudo-gradient's symmetrized Jacobian has a nonpositive eigenvalue."""


class DisconnectedGraph(Exception):
    """A construction rule produced a disconnected communication graph."""


class NonConvergence(RuntimeError):
    """An iterative method exhausted its budget before reaching tolerance."""


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------

class BoxSet:
    """Axis-aligned box {v : lower <= v <= upper}, the local strategy set.

    Both bounds must be finite (the set is compact) and ordered.
    """

    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise ValueError("box bounds must share a shape")
        if not (np.isfinite(self.lower).all() and np.isfinite(self.upper).all()):
            raise ValueError("box bounds must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("box requires lower <= upper element-wise")
        self.dim = self.lower.size


class AffineCoupling:
    """Shared affine constraint A x <= b in per-agent blocks.

    Parameters
    ----------
    blocks : list of (m, n_i) arrays
        Per-agent column blocks of A = [A_1, ..., A_N].
    shares : list of (m,) arrays
        Per-agent splits b_i with sum_i b_i = b.
    """

    def __init__(self, blocks, shares):
        self.blocks = [np.atleast_2d(np.asarray(B, dtype=float)) for B in blocks]
        self.shares = [np.atleast_1d(np.asarray(s, dtype=float)) for s in shares]
        if len(self.blocks) != len(self.shares):
            raise ValueError("need one share vector per block")
        rows = {B.shape[0] for B in self.blocks} | {s.size for s in self.shares}
        if len(rows) != 1:
            raise ValueError("all blocks and shares must share the row dimension m")
        self.m = self.blocks[0].shape[0]
        self._full = None
        self._total = None

    @property
    def full_matrix(self):
        """The global A = [A_1, ..., A_N], shape (m, n)."""
        if self._full is None:
            self._full = np.hstack(self.blocks)
        return self._full

    @property
    def total(self):
        """The global right-hand side b = sum_i b_i."""
        if self._total is None:
            self._total = np.sum(self.shares, axis=0)
        return self._total


class CommGraph:
    """Undirected communication graph with a fixed edge orientation.

    Edges are stored as oriented pairs (source, sink) with source < sink
    (the orientation is arbitrary for the algorithms, so we fix it for
    determinism).  Self-loops are rejected; connectivity is checked by
    :func:`validate_game` rather than at construction so that deliberately
    broken graphs can be inspected.

    Parameters
    ----------
    n_nodes : int
        Number of agents N.
    edges : iterable of (i, j)
        Undirected edges, 0-indexed, i != j.  Duplicates are rejected.
    """

    def __init__(self, n_nodes, edges):
        if n_nodes < 1:
            raise ValueError("graph needs at least one node")
        self.n_nodes = int(n_nodes)
        seen = set()
        oriented = []
        for (i, j) in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise ValueError(f"edge ({i},{j}) out of range")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            oriented.append(key)  # source = lower index
        self.edges = oriented
        self.n_edges = len(oriented)
        # derived adjacency structure
        self.neighbors = [[] for _ in range(n_nodes)]
        self.out_edges = [[] for _ in range(n_nodes)]
        self.in_edges = [[] for _ in range(n_nodes)]
        for l, (s, t) in enumerate(oriented):
            self.neighbors[s].append(t)
            self.neighbors[t].append(s)
            self.out_edges[s].append(l)
            self.in_edges[t].append(l)
        for lst in self.neighbors:
            lst.sort()
        self.degrees = np.array([len(v) for v in self.neighbors])

    def is_connected(self):
        """True when the graph has one connected component (ignoring orientation)."""
        if self.n_nodes == 1:
            return True
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in self.neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n_nodes


class CostModel:
    """Evaluable cost gradients, optionally with an affine representation.

    Parameters
    ----------
    grad : callable(i, x) -> (n_i,) array
        Partial gradient of agent i's cost with respect to its own block,
        evaluated at the full stacked strategy profile x.
    cost : callable(i, x) -> float, optional
        Cost values, used by finite-difference checks only.
    M, u : array, optional
        Affine representation F(x) = M x + u of the stacked pseudo-gradient;
        required for deriving the monotonicity constants, optional for
        plain solving.
    """

    def __init__(self, grad, cost=None, M=None, u=None):
        self.grad = grad
        self.cost = cost
        self.M = None if M is None else np.asarray(M, dtype=float)
        self.u = None if u is None else np.asarray(u, dtype=float)

    @property
    def is_affine(self):
        return self.M is not None and self.u is not None


class GameInstance:
    """A complete game: boxes, coupling, communication graph and costs.

    Dimension bookkeeping (N, n_i, offsets, n, m, E) is derived once here and
    reused everywhere.
    """

    def __init__(self, boxes, coupling, graph, cost):
        self.boxes = list(boxes)
        self.coupling = coupling
        self.graph = graph
        self.cost = cost
        self.n_agents = len(self.boxes)
        if len(coupling.blocks) != self.n_agents:
            raise ValueError("coupling needs one block per agent")
        if graph.n_nodes != self.n_agents:
            raise ValueError("graph node count must equal the number of agents")
        self.block_sizes = [b.dim for b in self.boxes]
        for box, A in zip(self.boxes, coupling.blocks):
            if A.shape[1] != box.dim:
                raise ValueError("coupling block width must match the box dimension")
        self.offsets = np.concatenate([[0], np.cumsum(self.block_sizes)]).astype(int)
        self.dim = int(self.offsets[-1])
        self.m = coupling.m
        self.n_edges = graph.n_edges
        # stacked box bounds, used by the solvers
        self.lower = np.concatenate([b.lower for b in self.boxes])
        self.upper = np.concatenate([b.upper for b in self.boxes])

    def block(self, x, i):
        """Agent i's slice of a stacked primal vector."""
        return x[self.offsets[i]:self.offsets[i + 1]]

    def block_norms(self):
        """Spectral norms ||A_i|| of the coupling blocks."""
        return np.array([np.linalg.norm(B, 2) for B in self.coupling.blocks])


# ---------------------------------------------------------------------------
# Graph operations
# ---------------------------------------------------------------------------

def incidence_matrix(graph):
    """Oriented incidence matrix V, shape (E, N).

    [V]_{li} = +1 when edge l leaves node i, -1 when it enters, 0 otherwise;
    every row sums to zero by construction.
    """
    cached = getattr(graph, "_incidence", None)
    if cached is not None:
        return cached
    V = np.zeros((graph.n_edges, graph.n_nodes))
    for l, (s, t) in enumerate(graph.edges):
        V[l, s] = 1.0
        V[l, t] = -1.0
    graph._incidence = V
    return V


def laplacian(graph):
    """Node Laplacian L = V^T V, shape (N, N); symmetric PSD with L 1 = 0."""
    cached = getattr(graph, "_laplacian", None)
    if cached is not None:
        return cached
    V = incidence_matrix(graph)
    L = V.T @ V
    graph._laplacian = L
    return L


# ---------------------------------------------------------------------------
# Core evaluations
# ---------------------------------------------------------------------------

def pseudo_gradient(game, x):
    """Stacked partial gradients F(x) = col(grad_i f_i(x)), shape (n,).

    Parameters
    ----------
    game : GameInstance
    x : (n,) array
        Full strategy profile (feasibility not required).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (game.dim,):
        raise ValueError(f"expected x of shape ({game.dim},), got {x.shape}")
    if game.cost.is_affine:
        return game.cost.M @ x + game.cost.u
    out = np.empty(game.dim)
    for i in range(game.n_agents):
        g = np.asarray(game.cost.grad(i, x), dtype=float)
        if g.shape != (game.block_sizes[i],):
            raise ValueError(f"gradient block {i} has shape {g.shape}, "
                             f"expected ({game.block_sizes[i]},)")
        out[game.offsets[i]:game.offsets[i + 1]] = g
    return out


def monotonicity_constants(model):
    """Strong-monotonicity and Lipschitz constants of an affine F(x) = Mx + u.

    Returns
    -------
    alpha : float
        Smallest eigenvalue of the symmetric part (M + M^T)/2.
    ell : float
        Spectral norm of M.

    Raises
    ------
    NotStronglyMonotone
        When alpha <= 0: the game violates the strong-monotonicity assumption.
    """
    if model.M is None:
        raise ValueError("monotonicity constants require the affine representation")
    M = model.M
    alpha = float(np.linalg.eigvalsh((M + M.T) / 2.0)[0])
    ell = float(np.linalg.norm(M, 2))
    if alpha <= 0:
        raise NotStronglyMonotone(f"symmetrized pseudo-gradient has lambda_min = {alpha:.6g}")
    return alpha, ell


def project_box(box, v):
    """Euclidean projection of v onto the box: a component-wise clamp."""
    v = np.asarray(v, dtype=float)
    if v.shape != box.lower.shape:
        raise ValueError(f"expected shape {box.lower.shape}, got {v.shape}")
    return np.clip(v, box.lower, box.upper)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

class ValidationReport:
    """Outcome of :func:`validate_game`: failures listed, never raised."""

    def __init__(self):
        self.failures = []
        self.alpha = None
        self.ell = None
        self.slater_margin = None

    @property
    def passed(self):
        return not self.failures

    def fail(self, message):
        self.failures.append(message)

    def __repr__(self):
        status = "ok" if self.passed else "; ".join(self.failures)
        return f"ValidationReport({status})"


def validate_game(game, slater_tol=1e-9):
    """Check the standing assumptions; collect failures into a report.

    Checks box compactness, dimension consistency, graph connectivity,
    strong monotonicity (when the affine representation is present) and the
    existence of a strictly feasible point for the coupled set (Slater).
    """
    report = ValidationReport()
    for i, box in enumerate(game.boxes):
        if not (np.isfinite(box.lower).all() and np.isfinite(box.upper).all()):
            report.fail(f"box {i} is not compact")
        if np.any(box.lower > box.upper):
            report.fail(f"box {i} has crossing bounds")
    if not game.graph.is_connected():
        report.fail("communication graph is not connected")
    if game.cost.is_affine:
        try:
            report.alpha, report.ell = monotonicity_constants(game.cost)
        except NotStronglyMonotone as exc:
            report.fail(f"not strongly monotone: {exc}")
    from .oracle import slater_margin  # deferred: oracle imports this module
    margin = slater_margin(game)
    report.slater_margin = margin
    if margin is None or margin <= slater_tol:
        report.fail("no strictly feasible point for the coupling constraints (Slater)")
    return report


# ---------------------------------------------------------------------------
# Quadratic cost family and JSON serialization
# ---------------------------------------------------------------------------

def quadratic_cost_model(game_dims, Q_blocks, q_blocks, coupling, price=None):
    """Cost model for f_i(x) = x_i' Q_i x_i + q_i' x_i - P(x)' A_i x_i.

    The optional linear price P(x) = P_bar - D A x couples the agents; without
    it the costs are decoupled quadratics.  The closed-form partial gradient is

        grad_i f_i = 2 Q_i x_i + q_i - A_i' P_bar + A_i' D A x + A_i' D A_i x_i

    and the affine representation M, u is assembled alongside.

    Parameters
    ----------
    game_dims : (offsets, n) tuple
        Block offsets and the total primal dimension.
    Q_blocks, q_blocks : lists of per-agent arrays
    coupling : AffineCoupling
    price : (P_bar, D_diag) tuple, optional
    """
    offsets, n = game_dims
    N = len(Q_blocks)
    Q_blocks = [np.atleast_2d(np.asarray(Q, dtype=float)) for Q in Q_blocks]
    q_blocks = [np.atleast_1d(np.asarray(q, dtype=float)) for q in q_blocks]
    A_full = coupling.full_matrix
    M = np.zeros((n, n))
    u = np.zeros(n)
    for i in range(N):
        sl = slice(offsets[i], offsets[i + 1])
        M[sl, sl] += 2.0 * Q_blocks[i]
        u[sl] += q_blocks[i]
    if price is not None:
        P_bar = np.atleast_1d(np.asarray(price[0], dtype=float))
        D_diag = np.atleast_1d(np.asarray(price[1], dtype=float))
        DA = D_diag[:, None] * A_full
        M += A_full.T @ DA
        for i in range(N):
            sl = slice(offsets[i], offsets[i + 1])
            A_i = coupling.blocks[i]
            M[sl, sl] += A_i.T @ (D_diag[:, None] * A_i)
            u[sl] -= A_i.T @ P_bar

    def grad(i, x):
        sl = slice(offsets[i], offsets[i + 1])
        return M[sl] @ x + u[sl]

    def cost(i, x):
        sl = slice(offsets[i], offsets[i + 1])
        x_i = x[sl]
        val = x_i @ Q_blocks[i] @ x_i + q_blocks[i] @ x_i
        if price is not None:
            P = P_bar - DA @ x
            val -= P @ (coupling.blocks[i] @ x_i)
        return float(val)

    return CostModel(grad, cost=cost, M=M, u=u)


def quadratic_game(boxes, coupling, graph, Q_blocks, q_blocks, price=None):
    """Assemble a GameInstance for the quadratic cost family."""
    dims = [b.dim for b in boxes]
    offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    cost = quadratic_cost_model((offsets, int(offsets[-1])),
                                Q_blocks, q_blocks, coupling, price)
    game = GameInstance(boxes, coupling, graph, cost)
    game.Q_blocks = [np.atleast_2d(np.asarray(Q, dtype=float)) for Q in Q_blocks]
    game.q_blocks = [np.atleast_1d(np.asarray(q, dtype=float)) for q in q_blocks]
    game.price = None if price is None else (
        np.atleast_1d(np.asarray(price[0], dtype=float)),
        np.atleast_1d(np.asarray(price[1], dtype=float)))
    return game


def game_to_dict(game):
    """JSON-ready dictionary for a quadratic-family game.

    Only games built by :func:`quadratic_game` (directly or via the benchmark
    generators) carry the Q/q/price data this schema needs.
    """
    if not hasattr(game, "Q_blocks"):
        raise ValueError("only quadratic-family games serialize to JSON")
    agents = []
    for i in range(game.n_agents):
        agents.append({
            "n": int(game.block_sizes[i]),
            "lower": game.boxes[i].lower.tolist(),
            "upper": game.boxes[i].upper.tolist(),
            "A": game.coupling.blocks[i].tolist(),
            "b": game.coupling.shares[i].tolist(),
            "Q": game.Q_blocks[i].tolist(),
            "q": game.q_blocks[i].tolist(),
        })
    doc = {"agents": agents, "edges": [list(e) for e in game.graph.edges]}
    if game.price is not None:
        doc["price"] = {"P_bar": game.price[0].tolist(),
                        "D": game.price[1].tolist()}
    return doc


def game_from_dict(doc):
    """Rebuild a GameInstance from the JSON document schema."""
    agents = doc["agents"]
    boxes = [BoxSet(a["lower"], a["upper"]) for a in agents]
    coupling = AffineCoupling([a["A"] for a in agents], [a["b"] for a in agents])
    graph = CommGraph(len(agents), [tuple(e) for e in doc["edges"]])
    price = None
    if "price" in doc:
        price = (doc["price"]["P_bar"], doc["price"]["D"])
    return quadratic_game(boxes, coupling, graph,
                          [a["Q"] for a in agents], [a["q"] for a in agents],
                          price=price)


def save_game(game, path):
    """Write the instance JSON (sorted keys, so identical games give identical bytes)."""
    with open(path, "w") as fh:
        json.dump(game_to_dict(game), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_game(path):
    with open(path) as fh:
        return game_from_dict(json.load(fh))
