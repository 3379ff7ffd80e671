"""Synchronous solver: fixed point, convergence, invariants, trace."""

import numpy as np
import pytest

import gneforge.sync as sync_mod
from gneforge import (SyncState, derive_steps, eta_bound_sync,
                      gather_disagreement, kkt_residual, laplacian,
                      sdgeno_solve, sdgeno_step)

from conftest import make_toy_game, cournot_seeded, TOY_X, TOY_LAM


def toy_cfg(game):
    cfg = derive_steps(game)
    cfg.eta = 0.9 * eta_bound_sync(cfg.chi, cfg.theta)
    return cfg


def test_exact_fixed_point_of_the_iteration():
    # at x*=(.5,.5), lam_i=1, z=0 every update map is stationary:
    # consensus kills d, the box map reproduces x*, and A_i x_i* = b_i
    game = make_toy_game()
    cfg = toy_cfg(game)
    state = SyncState(TOY_X, np.array([[1.0], [1.0]]), np.zeros((2, 1)))
    nxt = sdgeno_step(state, game, cfg)
    assert np.allclose(nxt.x, state.x, atol=1e-15)
    assert np.allclose(nxt.lam, state.lam, atol=1e-15)
    assert np.allclose(nxt.z, state.z, atol=1e-15)


def test_toy_converges_to_known_solution():
    game = make_toy_game()
    res = sdgeno_solve(game, tol=1e-8)
    assert res.converged
    assert np.allclose(res.x, TOY_X, atol=1e-6)
    assert np.allclose(res.lam_mean, TOY_LAM, atol=1e-6)
    # per-agent copies agree at convergence
    assert np.allclose(res.lam_stack[0], res.lam_stack[1], atol=1e-7)


def test_step_requires_eta():
    game = make_toy_game()
    cfg = derive_steps(game)  # eta left unset
    with pytest.raises(ValueError):
        sdgeno_step(SyncState.cold(game), game, cfg)


def test_solve_matches_manual_stepping():
    # the solver's fused loop must reproduce sdgeno_step exactly
    game = cournot_seeded(3)
    cfg = toy_cfg(game)
    res = sdgeno_solve(game, cfg=cfg, tol=0.0, max_iter=400,
                       record_trace=False)
    state = SyncState.cold(game)
    for _ in range(400):
        state = sdgeno_step(state, game, cfg)
    assert res.iterations == 400 and not res.converged
    assert np.allclose(res.x, state.x, atol=1e-12)
    assert np.allclose(res.lam_stack, state.lam, atol=1e-12)


def test_check_every_overshoots_at_most_by_interval():
    game = make_toy_game()
    r1 = sdgeno_solve(game, tol=1e-8, check_every=1)
    r7 = sdgeno_solve(game, tol=1e-8, check_every=7)
    assert r7.converged
    assert r7.iterations % 7 == 0
    assert r1.iterations <= r7.iterations < r1.iterations + 7
    assert np.allclose(r7.x, r1.x, atol=1e-7)


def test_z_mass_stays_zero():
    # z(0)=0 keeps the stacked auxiliaries in range(L): their sum is 0
    game = cournot_seeded(7)
    cfg = toy_cfg(game)
    state = SyncState.cold(game)
    for k in range(10_000):
        state = sdgeno_step(state, game, cfg)
        if k % 500 == 0:
            assert np.max(np.abs(state.z.sum(axis=0))) <= 1e-12
    assert np.max(np.abs(state.z.sum(axis=0))) <= 1e-12


def test_one_gather_per_iteration(monkeypatch):
    game = make_toy_game()
    cfg = toy_cfg(game)
    calls = {"n": 0}
    real = sync_mod.gather_disagreement

    def counting(lam, graph):
        calls["n"] += 1
        return real(lam, graph)

    monkeypatch.setattr(sync_mod, "gather_disagreement", counting)
    state = SyncState.cold(game)
    for _ in range(25):
        state = sync_mod.sdgeno_step(state, game, cfg)
    assert calls["n"] == 25


def test_gather_disagreement_is_laplacian_action():
    game = cournot_seeded(0)
    lam = np.random.default_rng(5).normal(size=(game.n_agents, game.m))
    d = gather_disagreement(lam, game.graph)
    assert np.allclose(d, laplacian(game.graph) @ lam)
    # consensus stacks are in the kernel
    same = np.tile(lam[0], (game.n_agents, 1))
    assert np.allclose(gather_disagreement(same, game.graph), 0.0)


def test_dual_disagreement_small_at_convergence():
    game = cournot_seeded(5)
    res = sdgeno_solve(game, tol=1e-6)
    assert res.converged
    final = kkt_residual(game, res.x, res.lam_mean, lam_stack=res.lam_stack)
    assert final.disagreement <= 1e-6
    spread = res.lam_stack.max(axis=0) - res.lam_stack.min(axis=0)
    assert np.max(spread) <= 1e-5


def test_trace_recording_and_windowed_decrease():
    game = make_toy_game()
    x_ref = TOY_X
    res = sdgeno_solve(game, tol=1e-9, x_star=x_ref)
    t = res.trace
    assert len(t) == res.iterations
    assert t.column("iter")[0] == 1 and t.column("iter")[-1] == res.iterations
    rel = t.column("rel_dist_to_opt")
    assert rel[-1] <= 1e-7
    worst = np.maximum.reduce([t.column(c) for c in
                               ("kkt_primal", "kkt_dual", "violation",
                                "disagreement")])
    # not monotone step to step, but 50-iteration windows must not grow
    w = 50
    blocks = [worst[i:i + w].max() for i in range(0, len(worst) - w, w)]
    for a, b in zip(blocks, blocks[1:]):
        assert b <= a + 1e-9


def test_record_trace_off():
    game = make_toy_game()
    res = sdgeno_solve(game, tol=1e-8, record_trace=False)
    assert res.trace is None and res.converged


def test_budget_exhaustion_is_a_flag():
    game = cournot_seeded(11)
    res = sdgeno_solve(game, tol=1e-12, max_iter=50)
    assert not res.converged
    assert res.iterations == 50
