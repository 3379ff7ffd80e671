"""AD-GEED and AD-GENO: asynchronous, delay-tolerant GNE seeking.

One agent wakes per event-loop tick, reads its neighbors' public memory
through bounded, possibly stale snapshots, updates the coordinates it owns
and publishes the result.  The edge-variable iteration (AD-GEED) carries one
auxiliary per directed edge; the node-variable one (AD-GENO) compresses them
into a single z_i per agent plus mailbox increments mu deposited by
neighbors.  With matched seeds the two produce the same (x, lambda) path, a
property trace_equivalence() checks directly.

Activation and delay draws use the package's counter-based generator keyed
by (step, reader, writer), so a schedule can be enumerated, dumped and
replayed without running the dynamics.
"""

import io

import numpy as np

from .backend import active_backend, make_sim
from .game import NonConvergence  # noqa: F401  (part of this module's API)
from ._rng import delay_draw, uniform01
from .metrics import MetricsTrace, relative_distance
from .splitting import derive_steps, eta_bound_async, kkt_residual

ALG_GEED = 0
ALG_GENO = 1
_ACT_CODES = {"iid": 0, "round_robin": 1, "scripted": 2}
_DELAY_CODES = {"zero": 0, "fixed": 1, "uniform": 2, "scripted": 3}


class ActivationModel:
    """Which single agent wakes at step k.

    Modes: "iid" draws from a probability vector with the seeded
    counter-based generator; "round_robin" cycles a fixed order;
    "scripted" replays an explicit sequence (used for hand traces and
    schedule replay).
    """

    def __init__(self, kind, probs=None, order=None, sequence=None, seed=0):
        if kind not in _ACT_CODES:
            raise ValueError("unknown activation kind %r" % (kind,))
        self.kind = kind
        self.seed = int(seed)
        self.probs = None
        self.order = None
        self.sequence = None
        if kind == "iid":
            p = np.asarray(probs, dtype=float)
            if p.ndim != 1 or np.any(p <= 0.0):
                raise ValueError("iid probabilities must be positive")
            if abs(p.sum() - 1.0) > 1e-9:
                raise ValueError("iid probabilities must sum to 1")
            self.probs = p / p.sum()
        elif kind == "round_robin":
            o = np.asarray(order, dtype=np.int64)
            if sorted(o.tolist()) != list(range(len(o))):
                raise ValueError("round-robin order must be a permutation")
            self.order = o
        else:
            s = np.asarray(sequence, dtype=np.int64)
            if s.ndim != 1 or s.size == 0:
                raise ValueError("scripted sequence must be non-empty 1-d")
            self.sequence = s

    @classmethod
    def iid(cls, probs, seed=0):
        return cls("iid", probs=probs, seed=seed)

    @classmethod
    def uniform(cls, n_agents, seed=0):
        return cls("iid", probs=np.full(n_agents, 1.0 / n_agents), seed=seed)

    @classmethod
    def round_robin(cls, order):
        return cls("round_robin", order=order)

    @classmethod
    def scripted(cls, sequence):
        return cls("scripted", sequence=sequence)

    def p_min(self, n_agents):
        """Smallest activation probability (1/N for the deterministic modes)."""
        if self.kind == "iid":
            return float(self.probs.min())
        return 1.0 / n_agents

    def n_scripted(self):
        return None if self.sequence is None else int(self.sequence.size)


def next_activation(model, k):
    """Agent activated at step k under the given model."""
    if model.kind == "iid":
        cum = np.cumsum(model.probs)
        cum[-1] = 1.0
        u = uniform01(model.seed, k)
        for i, c in enumerate(cum):
            if u < c:
                return i
        return len(cum) - 1
    if model.kind == "round_robin":
        return int(model.order[k % len(model.order)])
    return int(model.sequence[k])


class DelayModel:
    """Staleness of the snapshots a reader sees, bounded by phi_bound.

    Modes: "zero" (always fresh), "fixed" (constant phi), "uniform"
    (seeded draw on {0..phi_bound} per (step, reader, writer)), and
    "scripted" (explicit table, row k giving the delay toward each writer).
    An agent's own variables are always read fresh.
    """

    def __init__(self, kind, phi=0, table=None, seed=0):
        if kind not in _DELAY_CODES:
            raise ValueError("unknown delay kind %r" % (kind,))
        self.kind = kind
        self.seed = int(seed)
        self.phi = int(phi)
        self.table = None
        if self.phi < 0:
            raise ValueError("delay bound must be >= 0")
        if kind == "scripted":
            t = np.asarray(table, dtype=np.int64)
            if t.ndim != 2 or np.any(t < 0):
                raise ValueError("scripted delays must be a (steps, N) table "
                                 "of non-negative integers")
            self.table = t
            self.phi = int(t.max()) if t.size else 0

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def fixed(cls, phi):
        return cls("fixed", phi=phi)

    @classmethod
    def uniform(cls, phi_max, seed=0):
        return cls("uniform", phi=phi_max, seed=seed)

    @classmethod
    def scripted(cls, table):
        return cls("scripted", table=table)

    @property
    def phi_bound(self):
        return self.phi

    def sample_n(self, k, reader, writer, n_agents):
        """Delay of reader's view of writer at step k (0 for self)."""
        if writer == reader or self.kind == "zero":
            return 0
        if self.kind == "fixed":
            return self.phi
        if self.kind == "uniform":
            return int(delay_draw(self.seed, k, reader, writer,
                                  n_agents, self.phi))
        return int(self.table[k, writer])

    def n_scripted(self):
        return None if self.table is None else int(self.table.shape[0])


class MaskSet:
    """Per-agent index sets over the stacked col(x, sigma, lambda) vector."""

    def __init__(self, supports, dim):
        self.supports = [np.asarray(s, dtype=np.int64) for s in supports]
        self.dim = int(dim)

    def __len__(self):
        return len(self.supports)


def build_masks(game):
    """Coordinate ownership masks: x_i, sigma on out-edges of i, lambda_i.

    The stacked vector is col(x, sigma, lambda) with sigma ordered by edge
    id and lambda by agent; agent i owns its strategy block, the auxiliaries
    of edges it is the source of, and its own multiplier.
    """
    n, m = game.dim, game.m
    E, N = game.n_edges, game.n_agents
    dim = n + E * m + N * m
    supports = []
    for i in range(N):
        idx = list(range(game.offsets[i], game.offsets[i + 1]))
        for l in game.graph.out_edges[i]:
            idx.extend(range(n + l * m, n + (l + 1) * m))
        idx.extend(range(n + E * m + i * m, n + E * m + (i + 1) * m))
        supports.append(sorted(idx))
    return MaskSet(supports, dim)


# ---------------------------------------------------------------------------
# problem assembly: one dict consumed identically by both engine backends
# ---------------------------------------------------------------------------

def build_problem(game, cfg, algorithm, activation, delays,
                  x0=None, lam0=None, rho_in_z=True):
    """Precompute every array the event-loop engines need.

    rho_in_z=False removes the rho factor from the node-variable mailbox
    consumption (a deliberately wrong variant kept as a negative control for
    the equivalence test).
    """
    if algorithm not in ("geed", "geno"):
        raise ValueError("algorithm must be 'geed' or 'geno'")
    if cfg.eta is None:
        raise ValueError("cfg.eta must be set (see eta_bound_async)")
    if not game.cost.is_affine:
        raise ValueError("the event-loop engines need an affine "
                         "pseudo-gradient (M, u)")
    N, m, E = game.n_agents, game.m, game.n_edges
    graph = game.graph

    nbr_indptr = np.zeros(N + 1, dtype=np.int64)
    nbr_list = []
    for i in range(N):
        nbr_list.extend(graph.neighbors[i])
        nbr_indptr[i + 1] = len(nbr_list)
    nbr_list = np.asarray(nbr_list, dtype=np.int64)
    rev_pos = np.zeros(len(nbr_list), dtype=np.int64)
    for i in range(N):
        for pos in range(nbr_indptr[i], nbr_indptr[i + 1]):
            j = nbr_list[pos]
            js = list(nbr_list[nbr_indptr[j]:nbr_indptr[j + 1]])
            rev_pos[pos] = js.index(i)

    out_indptr = np.zeros(N + 1, dtype=np.int64)
    in_indptr = np.zeros(N + 1, dtype=np.int64)
    out_list, in_list = [], []
    for i in range(N):
        out_list.extend(graph.out_edges[i])
        in_list.extend(graph.in_edges[i])
        out_indptr[i + 1] = len(out_list)
        in_indptr[i + 1] = len(in_list)
    out_list = np.asarray(out_list, dtype=np.int64)
    in_list = np.asarray(in_list, dtype=np.int64)
    edge_src = np.asarray([e[0] for e in graph.edges], dtype=np.int64)
    edge_snk = np.asarray([e[1] for e in graph.edges], dtype=np.int64)
    in_src_pos = np.zeros(E, dtype=np.int64)
    edge_pair = np.zeros(E, dtype=np.int64)
    for l in range(E):
        src = edge_src[l]
        own = list(out_list[out_indptr[src]:out_indptr[src + 1]])
        in_src_pos[l] = own.index(l)
        # mailbox slot of this edge's source inside the sink's bank
        snk = edge_snk[l]
        sn = list(nbr_list[nbr_indptr[snk]:nbr_indptr[snk + 1]])
        edge_pair[l] = nbr_indptr[snk] + sn.index(src)

    act_mode = _ACT_CODES[activation.kind]
    cum_p = np.zeros(N)
    if activation.kind == "iid":
        if activation.probs.size != N:
            raise ValueError("activation probabilities have wrong length")
        cum_p = np.cumsum(activation.probs)
        cum_p[-1] = 1.0
    order = (activation.order if activation.kind == "round_robin"
             else np.arange(N, dtype=np.int64))
    if activation.kind == "round_robin" and order.size != N:
        raise ValueError("round-robin order has wrong length")
    act_seq = (activation.sequence if activation.kind == "scripted"
               else np.zeros(0, dtype=np.int64))

    delay_mode = _DELAY_CODES[delays.kind]
    delay_table = (delays.table if delays.kind == "scripted"
                   else np.zeros((0, 0), dtype=np.int64))
    if delays.kind == "scripted" and delays.table.shape[1] != N:
        raise ValueError("scripted delay table has wrong width")

    eta, delta, rho = cfg.eta, cfg.delta, cfg.rho
    problem = {
        "algorithm": ALG_GEED if algorithm == "geed" else ALG_GENO,
        "n": game.dim, "N": N, "m": m, "E": E,
        "M": np.ascontiguousarray(game.cost.M, dtype=float),
        "u": np.ascontiguousarray(game.cost.u, dtype=float),
        "lower": np.ascontiguousarray(game.lower, dtype=float),
        "upper": np.ascontiguousarray(game.upper, dtype=float),
        "offsets": np.asarray(game.offsets, dtype=np.int64),
        "A": np.ascontiguousarray(game.coupling.full_matrix, dtype=float),
        "b_shares": np.ascontiguousarray(np.vstack(game.coupling.shares),
                                         dtype=float),
        "tau": np.ascontiguousarray(cfg.tau, dtype=float),
        "eps": np.ascontiguousarray(cfg.eps, dtype=float),
        "delta": float(delta), "rho": float(rho), "eta": float(eta),
        "coef": 2.0 * delta * rho ** 2 + 1.0,
        "scale_zt": eta * delta * (rho if rho_in_z else 1.0),
        "scale_zp": eta * delta * rho,
        "nbr_indptr": nbr_indptr, "nbr_list": nbr_list, "rev_pos": rev_pos,
        "out_indptr": out_indptr, "out_list": out_list,
        "in_indptr": in_indptr, "in_list": in_list,
        "edge_src": edge_src, "edge_snk": edge_snk,
        "in_src_pos": in_src_pos, "edge_pair": edge_pair,
        "act_mode": act_mode, "cum_p": cum_p, "order": order,
        "act_seq": act_seq, "act_seed": activation.seed & (2 ** 64 - 1),
        "delay_mode": delay_mode, "phi_fixed": delays.phi,
        "phi_max": delays.phi_bound, "delay_table": delay_table,
        "delay_seed": delays.seed & (2 ** 64 - 1),
        "x0": (np.zeros(game.dim) if x0 is None
               else np.asarray(x0, dtype=float)),
        "lam0": (np.zeros((N, m)) if lam0 is None
                 else np.asarray(lam0, dtype=float).reshape(N, m)),
    }
    return problem


def _scripted_cap(activation, delays, requested):
    caps = [requested]
    if activation.n_scripted() is not None:
        caps.append(activation.n_scripted())
    if delays.n_scripted() is not None:
        caps.append(delays.n_scripted())
    return min(caps)


# ---------------------------------------------------------------------------
# spec-level step surface (thin wrappers over the engine event loop)
# ---------------------------------------------------------------------------

def adgeed_step(sim):
    """One edge-variable activation on a prepared engine; returns the agent."""
    return sim.step()


def adgeno_step(sim):
    """One node-variable activation on a prepared engine; returns the agent."""
    return sim.step()


def read_delayed(sim, reader):
    """Assemble reader's delayed view at the engine's current step.

    Works on the pure-Python engine (it pokes at internals).  Advances the
    reader's visibility horizons exactly as a real read would — mu mailboxes
    are left untouched — and reports the realized delay toward each writer.
    """
    k = sim.k
    x_hat = sim.x.copy()
    lam_hat = sim.lam.copy()
    sig_hat = sim.sigma.copy()
    realized = np.zeros(sim.N, dtype=np.int64)
    for w in range(sim.N):
        if w == reader:
            continue
        phi = sim._sample_delay(k, reader, w)
        h = max(sim.horizon[reader, w], k - phi, 0)
        sim.horizon[reader, w] = h
        realized[w] = k - h
        slot = sim._snapshot_slot(w, h)
        o0, o1 = sim.offsets[w], sim.offsets[w + 1]
        x_hat[o0:o1] = sim.pub_x[w, slot, :o1 - o0]
        lam_hat[w] = sim.pub_lam[w, slot]
        for pos in range(sim.out_indptr[w], sim.out_indptr[w + 1]):
            sig_hat[sim.out_list[pos]] = \
                sim.pub_sig[w, slot, pos - sim.out_indptr[w]]
    return {"x": x_hat, "lam": lam_hat, "sigma": sig_hat,
            "realized_delay": realized}


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

class AsyncResult:
    """Outcome of an asynchronous run; converged is a flag, not an exception."""

    def __init__(self, x, lam_mean, trace, converged, epochs, activations,
                 lam_stack=None, update_ns=0, max_realized_delay=0,
                 backend=""):
        self.x = x
        self.lam_mean = lam_mean
        self.trace = trace
        self.converged = converged
        self.epochs = epochs
        self.activations = activations
        self.lam_stack = lam_stack
        self.update_ns = update_ns
        self.max_realized_delay = max_realized_delay
        self.backend = backend


def run_async(game, cfg=None, algorithm="geno", activation=None, delays=None,
              tol=1e-6, max_activations=1_000_000, x_star=None,
              record_trace=True, backend=None, x0=None, lam0=None, c=0.9,
              check_every=1):
    """Run AD-GEED or AD-GENO until the KKT residual drops below tol.

    Metrics are recorded once per epoch (N activations).  When cfg or its
    eta are omitted they default to derive_steps() and c times the
    asynchronous eta bound for the given activation/delay models.
    check_every > 1 evaluates the residual (and records a trace row) only
    every that many epochs, overshooting the crossing by at most
    check_every - 1 epochs.

    Returns
    -------
    AsyncResult
        converged=False when the activation budget ran out first.
    """
    N = game.n_agents
    if activation is None:
        activation = ActivationModel.uniform(N)
    if delays is None:
        delays = DelayModel.zero()
    if cfg is None:
        cfg = derive_steps(game)
    if cfg.eta is None:
        cfg.eta = eta_bound_async(cfg.chi, cfg.theta, N,
                                  activation.p_min(N), delays.phi_bound, c=c)
    problem = build_problem(game, cfg, algorithm, activation, delays,
                            x0=x0, lam0=lam0)
    sim = make_sim(problem, backend)
    used = backend or active_backend()

    budget = _scripted_cap(activation, delays, max_activations)
    n_epochs = budget // N
    trace = MetricsTrace(index_name="epoch") if record_trace else None
    converged = False
    epoch = 0
    while epoch < n_epochs and not converged:
        burst = min(check_every, n_epochs - epoch)
        sim.run_chunk(N * burst)
        epoch += burst
        lam_stack = np.asarray(sim.lam)
        lam_mean = lam_stack.mean(axis=0)
        res = kkt_residual(game, np.asarray(sim.x), lam_mean,
                           lam_stack=lam_stack)
        if record_trace:
            trace.append(epoch, relative_distance(np.asarray(sim.x), x_star),
                         res)
        converged = res.max() <= tol
    x = np.array(sim.x, dtype=float)
    lam_stack = np.array(sim.lam, dtype=float)
    return AsyncResult(x, lam_stack.mean(axis=0), trace, converged, epoch,
                       sim.k, lam_stack=lam_stack, update_ns=sim.update_ns,
                       max_realized_delay=sim.max_realized_delay,
                       backend=used)


def trace_equivalence(game, cfg=None, activation=None, delays=None,
                      horizon=1000, rho_in_z=True, backend=None, c=0.9):
    """Max (x, lambda) deviation between lockstep AD-GEED and AD-GENO runs.

    Both algorithms consume the identical activation/delay realization; the
    returned value is max over steps k <= horizon of the infinity norm of
    the difference.  rho_in_z=False runs the node-variable side with the
    broken mailbox scaling (negative control: the deviation then blows up
    whenever rho != 1).
    """
    N = game.n_agents
    if activation is None:
        activation = ActivationModel.uniform(N)
    if delays is None:
        delays = DelayModel.zero()
    if cfg is None:
        cfg = derive_steps(game)
    if cfg.eta is None:
        cfg.eta = eta_bound_async(cfg.chi, cfg.theta, N,
                                  activation.p_min(N), delays.phi_bound, c=c)
    horizon = _scripted_cap(activation, delays, horizon)
    p_geed = build_problem(game, cfg, "geed", activation, delays)
    p_geno = build_problem(game, cfg, "geno", activation, delays,
                           rho_in_z=rho_in_z)
    s1 = make_sim(p_geed, backend)
    s2 = make_sim(p_geno, backend)
    dev = 0.0
    for _ in range(horizon):
        a1 = s1.step()
        a2 = s2.step()
        if a1 != a2:
            raise AssertionError("lockstep runs diverged in activation")
        dx = np.max(np.abs(np.asarray(s1.x) - np.asarray(s2.x)), initial=0.0)
        dl = np.max(np.abs(np.asarray(s1.lam) - np.asarray(s2.lam)),
                    initial=0.0)
        dev = max(dev, float(dx), float(dl))
    return dev


# ---------------------------------------------------------------------------
# schedule dump / replay
# ---------------------------------------------------------------------------

def dump_schedule(game, activation, delays, horizon):
    """Schedule realization as CSV text: k, agent, delay toward each writer.

    Draws depend only on (step, reader, writer) counters, never on the
    dynamics, so the dump can be produced without running a solver and fed
    back through replay_models() to reproduce a run exactly.
    """
    N = game.n_agents
    horizon = _scripted_cap(activation, delays, horizon)
    buf = io.StringIO()
    buf.write("k,agent," + ",".join("delay_%d" % j for j in range(N)) + "\n")
    for k in range(horizon):
        a = next_activation(activation, k)
        row = [str(k), str(a)]
        for w in range(N):
            row.append(str(delays.sample_n(k, a, w, N)))
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def save_schedule(path, game, activation, delays, horizon):
    text = dump_schedule(game, activation, delays, horizon)
    with open(path, "w") as fh:
        fh.write(text)


def parse_schedule(text):
    """Inverse of dump_schedule: (activation sequence, delay table)."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    header = lines[0].split(",")
    if header[:2] != ["k", "agent"]:
        raise ValueError("not a schedule CSV (header mismatch)")
    n_agents = len(header) - 2
    seq = []
    table = []
    for ln in lines[1:]:
        parts = ln.split(",")
        seq.append(int(parts[1]))
        table.append([int(v) for v in parts[2:2 + n_agents]])
    return (np.asarray(seq, dtype=np.int64),
            np.asarray(table, dtype=np.int64))


def load_schedule(path):
    with open(path) as fh:
        return parse_schedule(fh.read())


def replay_models(sequence, table):
    """Scripted activation/delay models reproducing a dumped schedule."""
    return ActivationModel.scripted(sequence), DelayModel.scripted(table)
