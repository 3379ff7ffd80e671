# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled asynchronous engine: a loop-for-loop mirror of _engine_py.

Semantics (visibility horizons, publication rings, stamped mu mailboxes,
timed update block, splitmix64 draws) are identical to the pure-Python
backend; only the execution is hand-rolled C loops.  Any semantic change in
_engine_py.py must be mirrored here.
"""

import numpy as np

from posix.time cimport CLOCK_MONOTONIC, clock_gettime, timespec

cdef enum:
    ALG_GEED = 0
    ALG_GENO = 1

cdef enum:
    ACT_IID = 0
    ACT_ROUND_ROBIN = 1
    ACT_SCRIPTED = 2

cdef enum:
    DELAY_ZERO = 0
    DELAY_FIXED = 1
    DELAY_UNIFORM = 2
    DELAY_SCRIPTED = 3


cdef inline long long _now_ns() noexcept nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return <long long>ts.tv_sec * 1000000000LL + ts.tv_nsec


cdef inline unsigned long long _mix64(unsigned long long z) noexcept nogil:
    z ^= z >> 30
    z *= <unsigned long long>0xBF58476D1CE4E5B9
    z ^= z >> 27
    z *= <unsigned long long>0x94D049BB133111EB
    z ^= z >> 31
    return z


cdef inline unsigned long long _sm64(unsigned long long seed,
                                     unsigned long long ctr) noexcept nogil:
    return _mix64(seed + (ctr + 1) * <unsigned long long>0x9E3779B97F4A7C15)


cdef inline double _uniform01(unsigned long long seed,
                              unsigned long long ctr) noexcept nogil:
    return <double>(_sm64(seed, ctr) >> 11) * (1.0 / 9007199254740992.0)


cdef class SimCore:
    """Event-loop state for one asynchronous run (compiled backend)."""

    cdef public long long k, update_ns, max_realized_delay
    cdef int alg, n, N, m, E, cap, act_mode, delay_mode, phi_fixed, phi_max
    cdef unsigned long long act_seed, delay_seed
    cdef double delta, rho, eta, coef, scale_zt, scale_zp

    cdef dict _arrays  # keeps numpy buffers alive / python-visible

    cdef double[:, ::1] Mv
    cdef double[::1] uv, lov, upv, tauv, epsv, cumv, xv, xhat, mucons
    cdef double[:, ::1] Av, bsh, lamv, sigv, zv, lamhat, sighat, muaged
    cdef long long[::1] offs, nbr_indptr, nbr_list, rev_pos
    cdef long long[::1] out_indptr, out_list, in_indptr, in_list
    cdef long long[::1] edge_src, edge_snk, in_src_pos, edge_pair, order, \
        act_seq
    cdef long long[:, ::1] delay_tab, pub_stamp, horizon, mu_stamp
    cdef long long[::1] pub_head, mu_start, mu_len, slots
    cdef double[:, :, ::1] pub_x, pub_lam, mu_vec
    cdef double[:, :, :, ::1] pub_sig

    # scratch for the update block, allocated once
    cdef double[::1] _xt, _dis, _drive, _agg, _lamt, _lama
    cdef double[:, ::1] _sigt

    def __init__(self, problem):
        p = problem
        self.alg = p["algorithm"]
        self.n = p["n"]
        self.N = p["N"]
        self.m = p["m"]
        self.E = p["E"]
        self.delta = p["delta"]
        self.rho = p["rho"]
        self.eta = p["eta"]
        self.coef = p["coef"]
        self.scale_zt = p["scale_zt"]
        self.scale_zp = p["scale_zp"]
        self.act_mode = p["act_mode"]
        self.act_seed = p["act_seed"]
        self.delay_mode = p["delay_mode"]
        self.phi_fixed = p["phi_fixed"]
        self.phi_max = p["phi_max"]
        self.delay_seed = p["delay_seed"]
        self.cap = self.phi_max + 2
        self.k = 0
        self.update_ns = 0
        self.max_realized_delay = 0

        N, m, E, C = self.N, self.m, self.E, self.cap
        n_max = int(np.max(np.diff(p["offsets"])))
        outdeg_max = max(1, int(np.max(np.diff(p["out_indptr"]))))
        npairs = len(p["nbr_list"])
        a = {
            "M": np.ascontiguousarray(p["M"], dtype=np.float64),
            "u": np.ascontiguousarray(p["u"], dtype=np.float64),
            "lower": np.ascontiguousarray(p["lower"], dtype=np.float64),
            "upper": np.ascontiguousarray(p["upper"], dtype=np.float64),
            "A": np.ascontiguousarray(p["A"], dtype=np.float64),
            "b_shares": np.ascontiguousarray(p["b_shares"], dtype=np.float64),
            "tau": np.ascontiguousarray(p["tau"], dtype=np.float64),
            "eps": np.ascontiguousarray(p["eps"], dtype=np.float64),
            "cum_p": np.ascontiguousarray(p["cum_p"], dtype=np.float64),
            "offsets": np.ascontiguousarray(p["offsets"], dtype=np.int64),
            "nbr_indptr": np.ascontiguousarray(p["nbr_indptr"], dtype=np.int64),
            "nbr_list": np.ascontiguousarray(p["nbr_list"], dtype=np.int64),
            "rev_pos": np.ascontiguousarray(p["rev_pos"], dtype=np.int64),
            "out_indptr": np.ascontiguousarray(p["out_indptr"], dtype=np.int64),
            "out_list": np.ascontiguousarray(p["out_list"], dtype=np.int64),
            "in_indptr": np.ascontiguousarray(p["in_indptr"], dtype=np.int64),
            "in_list": np.ascontiguousarray(p["in_list"], dtype=np.int64),
            "edge_src": np.ascontiguousarray(p["edge_src"], dtype=np.int64),
            "edge_snk": np.ascontiguousarray(p["edge_snk"], dtype=np.int64),
            "in_src_pos": np.ascontiguousarray(p["in_src_pos"], dtype=np.int64),
            "edge_pair": np.ascontiguousarray(p["edge_pair"], dtype=np.int64),
            "order": np.ascontiguousarray(p["order"], dtype=np.int64),
            "act_seq": np.ascontiguousarray(p["act_seq"], dtype=np.int64),
            "delay_table": np.ascontiguousarray(p["delay_table"],
                                                dtype=np.int64),
            "x": np.array(p["x0"], dtype=np.float64),
            "lam": np.array(p["lam0"], dtype=np.float64),
            "sigma": np.zeros((E, m)),
            "z": np.zeros((N, m)),
            "pub_stamp": np.full((N, C), -2, dtype=np.int64),
            "pub_head": np.zeros(N, dtype=np.int64),
            "pub_x": np.zeros((N, C, n_max)),
            "pub_lam": np.zeros((N, C, m)),
            "pub_sig": np.zeros((N, C, outdeg_max, m)),
            "horizon": np.zeros((N, N), dtype=np.int64),
            "mu_aged": np.zeros((npairs, m)),
            "mu_stamp": np.full((npairs, C), -2, dtype=np.int64),
            "mu_vec": np.zeros((npairs, C, m)),
            "mu_start": np.zeros(npairs, dtype=np.int64),
            "mu_len": np.zeros(npairs, dtype=np.int64),
            "x_hat": np.zeros(self.n),
            "lam_hat": np.zeros((N, m)),
            "sig_hat": np.zeros((E, m)),
            "mu_cons": np.zeros(m),
            "slots": np.zeros(N, dtype=np.int64),
        }
        a["pub_stamp"][:, 0] = -1
        offs = a["offsets"]
        for w in range(N):
            a["pub_x"][w, 0, : offs[w + 1] - offs[w]] = \
                a["x"][offs[w]:offs[w + 1]]
            a["pub_lam"][w, 0] = a["lam"][w]
        self._arrays = a

        self.Mv = a["M"]
        self.uv = a["u"]
        self.lov = a["lower"]
        self.upv = a["upper"]
        self.Av = a["A"]
        self.bsh = a["b_shares"]
        self.tauv = a["tau"]
        self.epsv = a["eps"]
        self.cumv = a["cum_p"]
        self.offs = a["offsets"]
        self.nbr_indptr = a["nbr_indptr"]
        self.nbr_list = a["nbr_list"]
        self.rev_pos = a["rev_pos"]
        self.out_indptr = a["out_indptr"]
        self.out_list = a["out_list"]
        self.in_indptr = a["in_indptr"]
        self.in_list = a["in_list"]
        self.edge_src = a["edge_src"]
        self.edge_snk = a["edge_snk"]
        self.in_src_pos = a["in_src_pos"]
        self.edge_pair = a["edge_pair"]
        self.order = a["order"]
        self.act_seq = a["act_seq"]
        self.delay_tab = a["delay_table"]
        self.xv = a["x"]
        self.lamv = a["lam"]
        self.sigv = a["sigma"]
        self.zv = a["z"]
        self.pub_stamp = a["pub_stamp"]
        self.pub_head = a["pub_head"]
        self.pub_x = a["pub_x"]
        self.pub_lam = a["pub_lam"]
        self.pub_sig = a["pub_sig"]
        self.horizon = a["horizon"]
        self.muaged = a["mu_aged"]
        self.mu_stamp = a["mu_stamp"]
        self.mu_vec = a["mu_vec"]
        self.mu_start = a["mu_start"]
        self.mu_len = a["mu_len"]
        self.xhat = a["x_hat"]
        self.lamhat = a["lam_hat"]
        self.sighat = a["sig_hat"]
        self.mucons = a["mu_cons"]
        self.slots = a["slots"]

        self._xt = np.zeros(n_max)
        self._dis = np.zeros(m)
        self._drive = np.zeros(m)
        self._agg = np.zeros(m)
        self._lamt = np.zeros(m)
        self._lama = np.zeros(m)
        self._sigt = np.zeros((outdeg_max, m))

    # -- python-visible state (same surface as the pure-Python core) -----

    @property
    def x(self):
        return self._arrays["x"]

    @property
    def lam(self):
        return self._arrays["lam"]

    @property
    def sigma(self):
        return self._arrays["sigma"]

    @property
    def z(self):
        return self._arrays["z"]

    def lam_mean(self):
        return self._arrays["lam"].mean(axis=0)

    # -- sampling ---------------------------------------------------------

    cdef int _sample_agent(self, long long k) noexcept:
        cdef double uval
        cdef int i
        if self.act_mode == ACT_IID:
            uval = _uniform01(self.act_seed, <unsigned long long>k)
            for i in range(self.N):
                if uval < self.cumv[i]:
                    return i
            return self.N - 1
        if self.act_mode == ACT_ROUND_ROBIN:
            return <int>self.order[k % self.N]
        return <int>self.act_seq[k]

    cdef long long _sample_delay(self, long long k, int reader,
                                 int writer) noexcept:
        cdef unsigned long long ctr
        if self.delay_mode == DELAY_ZERO:
            return 0
        if self.delay_mode == DELAY_FIXED:
            return self.phi_fixed
        if self.delay_mode == DELAY_UNIFORM:
            if self.phi_max == 0:
                return 0
            ctr = (<unsigned long long>k * self.N + reader) * self.N + writer
            return <long long>(_sm64(self.delay_seed, ctr)
                               % <unsigned long long>(self.phi_max + 1))
        return self.delay_tab[k, writer]

    cdef int _snapshot_slot(self, int w, long long horizon) except -1:
        cdef long long head = self.pub_head[w]
        cdef long long s
        cdef int back, slot
        for back in range(self.cap):
            slot = <int>((head - back + self.cap) % self.cap)
            s = self.pub_stamp[w, slot]
            if s != -2 and s <= horizon - 1:
                return slot
        raise AssertionError("publication ring underrun (capacity bug)")

    # -- event loop -------------------------------------------------------

    cpdef int step(self) except -1:
        cdef long long k = self.k
        cdef int a = self._sample_agent(k)
        cdef long long o_a = self.offs[a], o_a1 = self.offs[a + 1]
        cdef int n_a = <int>(o_a1 - o_a)
        cdef int m = self.m
        cdef int w, i, j, r, c, slot, pos, l, pair
        cdef long long phi, h, o_w, s0, head, t0, t1
        cdef double acc, v

        cdef double[::1] x_t = self._xt
        cdef double[::1] dis = self._dis
        cdef double[::1] drive = self._drive
        cdef double[::1] agg = self._agg
        cdef double[::1] lam_t = self._lamt
        cdef double[::1] lam_a = self._lama
        cdef double[:, ::1] sig_t = self._sigt

        # ---- read phase: assemble the delayed view ----------------------
        for i in range(n_a):
            self.xhat[o_a + i] = self.xv[o_a + i]
        for c in range(m):
            self.lamhat[a, c] = self.lamv[a, c]
        for w in range(self.N):
            if w == a:
                continue
            phi = self._sample_delay(k, a, w)
            h = self.horizon[a, w]
            if k - phi > h:
                h = k - phi
            if h < 0:
                h = 0
            self.horizon[a, w] = h
            if k - h > self.max_realized_delay:
                self.max_realized_delay = k - h
            slot = self._snapshot_slot(w, h)
            self.slots[w] = slot
            o_w = self.offs[w]
            for i in range(<int>(self.offs[w + 1] - o_w)):
                self.xhat[o_w + i] = self.pub_x[w, slot, i]
            for c in range(m):
                self.lamhat[w, c] = self.pub_lam[w, slot, c]
        if self.alg == ALG_GEED:
            for j in range(<int>self.in_indptr[a], <int>self.in_indptr[a + 1]):
                l = <int>self.in_list[j]
                w = <int>self.edge_src[l]
                slot = <int>self.slots[w]
                for c in range(m):
                    self.sighat[l, c] = self.pub_sig[w, slot,
                                                     self.in_src_pos[l], c]
        else:
            for c in range(m):
                self.mucons[c] = 0.0
            for pos in range(<int>self.nbr_indptr[a],
                             <int>self.nbr_indptr[a + 1]):
                w = <int>self.nbr_list[pos]
                h = self.horizon[a, w]
                for c in range(m):
                    self.mucons[c] += self.muaged[pos, c]
                    self.muaged[pos, c] = 0.0
                while self.mu_len[pos] > 0:
                    slot = <int>(self.mu_start[pos] % self.cap)
                    if self.mu_stamp[pos, slot] > h - 1:
                        break
                    for c in range(m):
                        self.mucons[c] += self.mu_vec[pos, slot, c]
                    self.mu_start[pos] += 1
                    self.mu_len[pos] -= 1

        # ---- update phase (the only timed region) -----------------------
        t0 = _now_ns()
        for c in range(m):
            lam_a[c] = self.lamv[a, c]
        for i in range(n_a):
            r = <int>(o_a + i)
            acc = self.uv[r]
            for j in range(self.n):
                acc += self.Mv[r, j] * self.xhat[j]
            for c in range(m):
                acc += self.Av[c, r] * lam_a[c]
            v = self.xv[r] - self.tauv[a] * acc
            if v < self.lov[r]:
                v = self.lov[r]
            elif v > self.upv[r]:
                v = self.upv[r]
            x_t[i] = v
        for c in range(m):
            acc = 0.0
            for pos in range(<int>self.nbr_indptr[a],
                             <int>self.nbr_indptr[a + 1]):
                acc += lam_a[c] - self.lamhat[self.nbr_list[pos], c]
            dis[c] = acc
        for c in range(m):
            acc = -self.bsh[a, c] - self.coef * dis[c]
            for i in range(n_a):
                acc += self.Av[c, o_a + i] * (2.0 * x_t[i] - self.xv[o_a + i])
            drive[c] = acc
        if self.alg == ALG_GEED:
            for c in range(m):
                agg[c] = 0.0
            for j in range(<int>self.out_indptr[a],
                           <int>self.out_indptr[a + 1]):
                l = <int>self.out_list[j]
                i = j - <int>self.out_indptr[a]
                for c in range(m):
                    sig_t[i, c] = (self.sigv[l, c] + self.delta * self.rho
                                   * (lam_a[c]
                                      - self.lamhat[self.edge_snk[l], c]))
                    agg[c] += self.sigv[l, c]
            for j in range(<int>self.in_indptr[a], <int>self.in_indptr[a + 1]):
                l = <int>self.in_list[j]
                for c in range(m):
                    agg[c] -= self.sighat[l, c]
            for c in range(m):
                v = lam_a[c] + self.epsv[a] * (drive[c] - self.rho * agg[c])
                lam_t[c] = v if v > 0.0 else 0.0
            for i in range(n_a):
                r = <int>(o_a + i)
                self.xv[r] = self.xv[r] + self.eta * (x_t[i] - self.xv[r])
            for j in range(<int>self.out_indptr[a],
                           <int>self.out_indptr[a + 1]):
                l = <int>self.out_list[j]
                i = j - <int>self.out_indptr[a]
                for c in range(m):
                    self.sigv[l, c] = (self.sigv[l, c]
                                       + self.eta * (sig_t[i, c]
                                                     - self.sigv[l, c]))
            for c in range(m):
                self.lamv[a, c] = lam_a[c] + self.eta * (lam_t[c] - lam_a[c])
        else:
            for c in range(m):
                agg[c] = self.zv[a, c] + self.scale_zt * self.mucons[c]
            for c in range(m):
                v = lam_a[c] + self.epsv[a] * (drive[c] - self.rho * agg[c])
                lam_t[c] = v if v > 0.0 else 0.0
            for c in range(m):
                acc = 0.0
                for j in range(<int>self.out_indptr[a],
                               <int>self.out_indptr[a + 1]):
                    l = <int>self.out_list[j]
                    acc += lam_a[c] - self.lamhat[self.edge_snk[l], c]
                self.zv[a, c] = agg[c] + self.scale_zp * acc
            for i in range(n_a):
                r = <int>(o_a + i)
                self.xv[r] = self.xv[r] + self.eta * (x_t[i] - self.xv[r])
            for c in range(m):
                self.lamv[a, c] = lam_a[c] + self.eta * (lam_t[c] - lam_a[c])
        t1 = _now_ns()
        self.update_ns += t1 - t0

        # ---- write phase: publish, and append mu increments -------------
        head = (self.pub_head[a] + 1) % self.cap
        self.pub_head[a] = head
        self.pub_stamp[a, <int>head] = k
        for i in range(n_a):
            self.pub_x[a, <int>head, i] = self.xv[o_a + i]
        for c in range(m):
            self.pub_lam[a, <int>head, c] = self.lamv[a, c]
        if self.alg == ALG_GEED:
            for j in range(<int>self.out_indptr[a],
                           <int>self.out_indptr[a + 1]):
                l = <int>self.out_list[j]
                i = j - <int>self.out_indptr[a]
                for c in range(m):
                    self.pub_sig[a, <int>head, i, c] = self.sigv[l, c]
        else:
            # mu increments mirror this agent's sigma changes, which live on
            # its out-edges only; each lands in the sink's mailbox
            for j in range(<int>self.out_indptr[a],
                           <int>self.out_indptr[a + 1]):
                l = <int>self.out_list[j]
                w = <int>self.edge_snk[l]
                pair = <int>self.edge_pair[l]
                if self.mu_len[pair] >= self.cap:
                    raise AssertionError("mu mailbox overrun (capacity bug)")
                slot = <int>((self.mu_start[pair] + self.mu_len[pair])
                             % self.cap)
                self.mu_stamp[pair, slot] = k
                for c in range(m):
                    self.mu_vec[pair, slot, c] = self.lamhat[w, c] - lam_a[c]
                self.mu_len[pair] += 1
                while self.mu_len[pair] > 0:
                    s0 = self.mu_start[pair] % self.cap
                    if self.mu_stamp[pair, <int>s0] > k - self.phi_max - 1:
                        break
                    for c in range(m):
                        self.muaged[pair, c] += self.mu_vec[pair, <int>s0, c]
                    self.mu_start[pair] += 1
                    self.mu_len[pair] -= 1
        self.k = k + 1
        return a

    def run_chunk(self, long long steps):
        cdef long long i
        for i in range(steps):
            self.step()
