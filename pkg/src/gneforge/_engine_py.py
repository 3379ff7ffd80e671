"""Pure-Python asynchronous engine: the reference backend.

The engine executes one agent activation per event-loop tick.  Each agent
owns a public snapshot (its strategy block, multiplier and out-edge sigma
variables) published with the activation step as a stamp; readers see a
writer's snapshot through a per-pair visibility horizon

    H[reader][writer] = max(k - phi(k), previous H, 0)

so a write stamped k' is visible exactly when k' <= H - 1.  Horizons are
monotone: a reader's view never regresses between its activations.  The
node-variable algorithm keeps, per (reader, writer) pair, a mailbox of
stamped mu increments that is consumed at read time up to the same horizon —
this is what makes the edge-variable and node-variable iterations coincide
under every delay pattern.

Only the update block (the x/sigma-or-z/lambda computations and their
relaxation) is timed; view assembly, mailbox and publication bookkeeping
count as communication and stay outside the timers.

The compiled engine in _engine_cy.pyx mirrors this file operation for
operation; any semantic change here must be made there too.
"""

import time

import numpy as np

from ._rng import activation_draw, delay_draw

ALG_GEED = 0
ALG_GENO = 1

ACT_IID = 0
ACT_ROUND_ROBIN = 1
ACT_SCRIPTED = 2

DELAY_ZERO = 0
DELAY_FIXED = 1
DELAY_UNIFORM = 2
DELAY_SCRIPTED = 3


class SimCore:
    """Event-loop state for one asynchronous run.

    Parameters
    ----------
    problem : dict
        Precomputed arrays describing the game, steps, graph, schedule and
        algorithm; built by gneforge.asynchronous.build_problem so that both
        backends consume exactly the same data.
    """

    def __init__(self, problem):
        p = problem
        self.alg = p["algorithm"]
        self.n = p["n"]
        self.N = p["N"]
        self.m = p["m"]
        self.E = p["E"]
        self.M = p["M"]
        self.u = p["u"]
        self.lower = p["lower"]
        self.upper = p["upper"]
        self.offsets = p["offsets"]
        self.A = p["A"]
        self.b_shares = p["b_shares"]
        self.tau = p["tau"]
        self.eps = p["eps"]
        self.delta = p["delta"]
        self.rho = p["rho"]
        self.eta = p["eta"]
        self.coef = p["coef"]            # 2 delta rho^2 + 1
        self.scale_zt = p["scale_zt"]    # eta delta rho on the mu consumption
        self.scale_zp = p["scale_zp"]    # eta delta rho on the out-edge sum
        self.nbr_indptr = p["nbr_indptr"]
        self.nbr_list = p["nbr_list"]
        self.rev_pos = p["rev_pos"]
        self.out_indptr = p["out_indptr"]
        self.out_list = p["out_list"]
        self.in_indptr = p["in_indptr"]
        self.in_list = p["in_list"]
        self.edge_src = p["edge_src"]
        self.edge_snk = p["edge_snk"]
        self.in_src_pos = p["in_src_pos"]
        self.edge_pair = p["edge_pair"]
        self.act_mode = p["act_mode"]
        self.cum_p = p["cum_p"]
        self.order = p["order"]
        self.act_seq = p["act_seq"]
        self.act_seed = p["act_seed"]
        self.delay_mode = p["delay_mode"]
        self.phi_fixed = p["phi_fixed"]
        self.phi_max = p["phi_max"]
        self.delay_table = p["delay_table"]
        self.delay_seed = p["delay_seed"]

        n, N, m, E = self.n, self.N, self.m, self.E
        C = self.phi_max + 2
        self.cap = C
        self.k = 0
        self.update_ns = 0
        self.max_realized_delay = 0
        self.x = p["x0"].copy()
        self.lam = p["lam0"].copy()
        self.sigma = np.zeros((E, m))
        self.z = np.zeros((N, m))
        n_max = int(np.max(np.diff(self.offsets)))
        outdeg_max = max(1, int(np.max(np.diff(self.out_indptr))))
        # publication rings: slot 0 carries the initial state, stamped -1
        self.pub_stamp = np.full((N, C), -2, dtype=np.int64)
        self.pub_stamp[:, 0] = -1
        self.pub_head = np.zeros(N, dtype=np.int64)
        self.pub_x = np.zeros((N, C, n_max))
        self.pub_lam = np.zeros((N, C, m))
        self.pub_sig = np.zeros((N, C, outdeg_max, m))
        for w in range(N):
            self.pub_x[w, 0, :self._bs(w)] = self.x[self._sl(w)]
            self.pub_lam[w, 0] = self.lam[w]
        self.horizon = np.zeros((N, N), dtype=np.int64)
        # mu mailboxes, one per directed (reader, writer) neighbor pair
        npairs = len(self.nbr_list)
        self.mu_aged = np.zeros((npairs, m))
        self.mu_stamp = np.full((npairs, C), -2, dtype=np.int64)
        self.mu_vec = np.zeros((npairs, C, m))
        self.mu_start = np.zeros(npairs, dtype=np.int64)
        self.mu_len = np.zeros(npairs, dtype=np.int64)
        # read-phase scratch
        self.x_hat = np.zeros(n)
        self.lam_hat = np.zeros((N, m))
        self.sig_hat = np.zeros((E, m))
        self.mu_cons = np.zeros(m)
        self._slots = np.zeros(N, dtype=np.int64)

    # -- small helpers ------------------------------------------------------

    def _sl(self, i):
        return slice(self.offsets[i], self.offsets[i + 1])

    def _bs(self, i):
        return self.offsets[i + 1] - self.offsets[i]

    def _sample_agent(self, k):
        if self.act_mode == ACT_IID:
            return activation_draw(self.act_seed, k, self.cum_p)
        if self.act_mode == ACT_ROUND_ROBIN:
            return int(self.order[k % self.N])
        return int(self.act_seq[k])

    def _sample_delay(self, k, reader, writer):
        if self.delay_mode == DELAY_ZERO:
            return 0
        if self.delay_mode == DELAY_FIXED:
            return self.phi_fixed
        if self.delay_mode == DELAY_UNIFORM:
            return delay_draw(self.delay_seed, k, reader, writer,
                              self.N, self.phi_max)
        return int(self.delay_table[k, writer])

    def _snapshot_slot(self, w, horizon):
        """Newest ring slot of writer w with stamp <= horizon - 1."""
        head = self.pub_head[w]
        for back in range(self.cap):
            slot = (head - back) % self.cap
            s = self.pub_stamp[w, slot]
            if s != -2 and s <= horizon - 1:
                return slot
        raise AssertionError("publication ring underrun (capacity bug)")

    # -- event loop ---------------------------------------------------------

    def step(self):
        """Execute one activation; returns the activated agent index."""
        k = self.k
        a = self._sample_agent(k)
        sl_a = self._sl(a)

        # ---- read phase: materialize the delayed view -----------------
        self.x_hat[sl_a] = self.x[sl_a]
        self.lam_hat[a] = self.lam[a]
        slots = self._slots
        for w in range(self.N):
            if w == a:
                continue
            phi = self._sample_delay(k, a, w)
            h = max(self.horizon[a, w], k - phi, 0)
            self.horizon[a, w] = h
            if k - h > self.max_realized_delay:
                self.max_realized_delay = k - h
            slot = self._snapshot_slot(w, h)
            slots[w] = slot
            self.x_hat[self._sl(w)] = self.pub_x[w, slot, :self._bs(w)]
            self.lam_hat[w] = self.pub_lam[w, slot]
        if self.alg == ALG_GEED:
            for j in range(self.in_indptr[a], self.in_indptr[a + 1]):
                l = self.in_list[j]
                w = self.edge_src[l]
                self.sig_hat[l] = self.pub_sig[w, slots[w], self.in_src_pos[l]]
        if self.alg == ALG_GENO:
            self.mu_cons[:] = 0.0
            for pos in range(self.nbr_indptr[a], self.nbr_indptr[a + 1]):
                w = self.nbr_list[pos]
                h = self.horizon[a, w]
                self.mu_cons += self.mu_aged[pos]
                self.mu_aged[pos] = 0.0
                while self.mu_len[pos] > 0:
                    slot = self.mu_start[pos] % self.cap
                    if self.mu_stamp[pos, slot] > h - 1:
                        break
                    self.mu_cons += self.mu_vec[pos, slot]
                    self.mu_start[pos] += 1
                    self.mu_len[pos] -= 1

        # ---- update phase (timed) --------------------------------------
        t0 = time.perf_counter_ns()
        x_a = self.x[sl_a]
        lam_a = self.lam[a].copy()
        grad = self.M[sl_a] @ self.x_hat + self.u[sl_a]
        A_a = self.A[:, sl_a]
        x_t = np.clip(x_a - self.tau[a] * (grad + A_a.T @ lam_a),
                      self.lower[sl_a], self.upper[sl_a])
        dis = np.zeros(self.m)
        for pos in range(self.nbr_indptr[a], self.nbr_indptr[a + 1]):
            dis += lam_a - self.lam_hat[self.nbr_list[pos]]
        drive = A_a @ (2.0 * x_t - x_a) - self.b_shares[a] - self.coef * dis
        if self.alg == ALG_GEED:
            agg = np.zeros(self.m)
            o0, o1 = self.out_indptr[a], self.out_indptr[a + 1]
            sig_t = np.empty((o1 - o0, self.m))
            for j in range(o0, o1):
                l = self.out_list[j]
                sig_t[j - o0] = (self.sigma[l] + self.delta * self.rho
                                 * (lam_a - self.lam_hat[self.edge_snk[l]]))
                agg += self.sigma[l]
            for j in range(self.in_indptr[a], self.in_indptr[a + 1]):
                agg -= self.sig_hat[self.in_list[j]]
            lam_t = np.maximum(lam_a + self.eps[a] * (drive - self.rho * agg), 0.0)
            self.x[sl_a] = x_a + self.eta * (x_t - x_a)
            for j in range(o0, o1):
                l = self.out_list[j]
                self.sigma[l] += self.eta * (sig_t[j - o0] - self.sigma[l])
            self.lam[a] = lam_a + self.eta * (lam_t - lam_a)
        else:
            z_t = self.z[a] + self.scale_zt * self.mu_cons
            lam_t = np.maximum(lam_a + self.eps[a] * (drive - self.rho * z_t), 0.0)
            out_sum = np.zeros(self.m)
            for j in range(self.out_indptr[a], self.out_indptr[a + 1]):
                l = self.out_list[j]
                out_sum += lam_a - self.lam_hat[self.edge_snk[l]]
            self.x[sl_a] = x_a + self.eta * (x_t - x_a)
            self.z[a] = z_t + self.scale_zp * out_sum
            self.lam[a] = lam_a + self.eta * (lam_t - lam_a)
        self.update_ns += time.perf_counter_ns() - t0

        # ---- write phase: publish and deposit mu increments ------------
        head = (self.pub_head[a] + 1) % self.cap
        self.pub_head[a] = head
        self.pub_stamp[a, head] = k
        self.pub_x[a, head, :self._bs(a)] = self.x[sl_a]
        self.pub_lam[a, head] = self.lam[a]
        if self.alg == ALG_GEED:
            o0, o1 = self.out_indptr[a], self.out_indptr[a + 1]
            for j in range(o0, o1):
                self.pub_sig[a, head, j - o0] = self.sigma[self.out_list[j]]
        else:
            # mu increments mirror this agent's sigma changes, which live on
            # its out-edges only; each lands in the sink's mailbox
            for j in range(self.out_indptr[a], self.out_indptr[a + 1]):
                l = self.out_list[j]
                snk = self.edge_snk[l]
                pair = self.edge_pair[l]
                if self.mu_len[pair] >= self.cap:
                    raise AssertionError("mu mailbox overrun (capacity bug)")
                slot = (self.mu_start[pair] + self.mu_len[pair]) % self.cap
                self.mu_stamp[pair, slot] = k
                self.mu_vec[pair, slot] = self.lam_hat[snk] - lam_a
                self.mu_len[pair] += 1
                # writer-side aging: entries old enough to be visible at any
                # future read fold into the aged sum
                while self.mu_len[pair] > 0:
                    s0 = self.mu_start[pair] % self.cap
                    if self.mu_stamp[pair, s0] > k - self.phi_max - 1:
                        break
                    self.mu_aged[pair] += self.mu_vec[pair, s0]
                    self.mu_start[pair] += 1
                    self.mu_len[pair] -= 1
        self.k = k + 1
        return a

    def run_chunk(self, steps):
        """Advance the loop by `steps` activations."""
        for _ in range(steps):
            self.step()

    def lam_mean(self):
        return self.lam.mean(axis=0)
