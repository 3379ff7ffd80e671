"""Asynchronous engines: schedules, delays, masks, equivalence, replay."""

import numpy as np
import pytest

from gneforge import (ActivationModel, AffineCoupling, BoxSet, CommGraph,
                      DelayModel, adgeed_step, adgeno_step, build_masks,
                      build_problem, derive_steps, dump_schedule,
                      eta_bound_async, load_schedule, make_sim,
                      next_activation, parse_schedule, quadratic_game,
                      read_delayed, replay_models, run_async, save_schedule,
                      scenario_config, trace_equivalence)

from conftest import make_toy_game, cournot_seeded, TOY_X, TOY_LAM


def make_path3_game():
    """Three agents in a line (0-1, 1-2), scalar strategies, one constraint."""
    boxes = [BoxSet([0.0], [1.0]) for _ in range(3)]
    coupling = AffineCoupling([[[1.0]]] * 3, [[0.4]] * 3)
    graph = CommGraph(3, [(0, 1), (1, 2)])
    return quadratic_game(boxes, coupling, graph,
                          [[[1.0]]] * 3, [[-2.0]] * 3)


def async_cfg(game, activation=None, delays=None, c=0.9):
    cfg = derive_steps(game)
    act = activation or ActivationModel.uniform(game.n_agents)
    dly = delays or DelayModel.zero()
    cfg.eta = eta_bound_async(cfg.chi, cfg.theta, game.n_agents,
                              act.p_min(game.n_agents), dly.phi_bound, c=c)
    return cfg


# ---------------------------------------------------------------------------
# activation models
# ---------------------------------------------------------------------------

def test_round_robin_cycles():
    model = ActivationModel.round_robin([2, 0, 1])
    got = [next_activation(model, k) for k in range(7)]
    assert got == [2, 0, 1, 2, 0, 1, 2]


def test_scripted_replays_exactly():
    model = ActivationModel.scripted([3, 3, 1, 0])
    assert [next_activation(model, k) for k in range(4)] == [3, 3, 1, 0]
    assert model.n_scripted() == 4


def test_iid_frequencies():
    model = ActivationModel.iid([0.5, 0.3, 0.2], seed=11)
    draws = np.array([next_activation(model, k) for k in range(100_000)])
    freq = np.bincount(draws, minlength=3) / draws.size
    assert np.max(np.abs(freq - [0.5, 0.3, 0.2])) <= 0.01


def test_scenario_c_frequencies():
    act, _ = scenario_config("C", n_agents=8, seed=4)
    draws = np.array([next_activation(act, k) for k in range(100_000)])
    freq = np.bincount(draws, minlength=8) / draws.size
    assert np.max(np.abs(freq - act.probs)) <= 0.01
    # busy half really is busy
    assert freq[:4].sum() > 0.62


def test_activation_draws_are_deterministic():
    model = ActivationModel.uniform(5, seed=77)
    a = [next_activation(model, k) for k in range(50)]
    b = [next_activation(model, k) for k in range(50)]
    assert a == b


def test_activation_validation():
    with pytest.raises(ValueError):
        ActivationModel.iid([0.5, 0.6])
    with pytest.raises(ValueError):
        ActivationModel.iid([0.5, -0.5, 1.0])
    with pytest.raises(ValueError):
        ActivationModel.round_robin([0, 0, 1])
    with pytest.raises(ValueError):
        ActivationModel.scripted([])
    with pytest.raises(ValueError):
        ActivationModel("poisson")
    assert ActivationModel.uniform(4).p_min(4) == pytest.approx(0.25)


# ---------------------------------------------------------------------------
# delay models
# ---------------------------------------------------------------------------

def test_delay_modes():
    zero = DelayModel.zero()
    assert zero.sample_n(9, 0, 1, 4) == 0 and zero.phi_bound == 0
    fixed = DelayModel.fixed(2)
    assert fixed.sample_n(9, 0, 1, 4) == 2
    assert fixed.sample_n(9, 3, 3, 4) == 0  # own state is always fresh
    table = np.array([[0, 1, 2], [2, 0, 1]])
    scripted = DelayModel.scripted(table)
    assert scripted.sample_n(1, 0, 2, 3) == 1
    assert scripted.phi_bound == 2 and scripted.n_scripted() == 2


def test_uniform_delays_bounded_and_deterministic():
    model = DelayModel.uniform(3, seed=5)
    draws = [model.sample_n(k, 0, 1, 8) for k in range(10_000)]
    again = [model.sample_n(k, 0, 1, 8) for k in range(10_000)]
    assert draws == again
    draws = np.asarray(draws)
    assert draws.min() >= 0 and draws.max() <= 3
    freq = np.bincount(draws, minlength=4) / draws.size
    assert np.max(np.abs(freq - 0.25)) <= 0.02
    # distinct (reader, writer) pairs see distinct streams
    other = [model.sample_n(k, 2, 1, 8) for k in range(100)]
    assert other != draws[:100].tolist()


def test_delay_validation():
    with pytest.raises(ValueError):
        DelayModel.fixed(-1)
    with pytest.raises(ValueError):
        DelayModel.scripted(np.array([[0, -1]]))
    with pytest.raises(ValueError):
        DelayModel("gamma")


# ---------------------------------------------------------------------------
# coordinate ownership
# ---------------------------------------------------------------------------

def test_masks_path3_by_hand():
    # stacked col(x, sigma, lambda): x 0..2, sigma 3..4 (edges 0-1, 1-2),
    # lambda 5..7; agent 2 is a sink only so it owns no sigma
    game = make_path3_game()
    masks = build_masks(game)
    assert masks.dim == 8
    assert masks.supports[0].tolist() == [0, 3, 5]
    assert masks.supports[1].tolist() == [1, 4, 6]
    assert masks.supports[2].tolist() == [2, 7]


def test_masks_partition_sigma_and_lambda(cournot8):
    game = cournot8
    masks = build_masks(game)
    n, m, E = game.dim, game.m, game.n_edges
    seen = np.zeros(masks.dim, dtype=int)
    for s in masks.supports:
        seen[s] += 1
    # strategies and multipliers are owned exactly once...
    assert np.all(seen[:n] == 1)
    assert np.all(seen[n + E * m:] == 1)
    # ...and every edge auxiliary belongs to exactly its source
    assert np.all(seen[n:n + E * m] == 1)


def stacked_state(sim, game):
    return np.concatenate([np.asarray(sim.x),
                           np.asarray(sim.sigma).ravel(),
                           np.asarray(sim.lam).ravel()])


@pytest.mark.parametrize("algorithm", ["geed", "geno"])
def test_steps_touch_only_owned_coordinates(algorithm):
    game = cournot_seeded(6)
    act = ActivationModel.uniform(game.n_agents, seed=8)
    cfg = async_cfg(game, act)
    problem = build_problem(game, cfg, algorithm, act, DelayModel.zero())
    sim = make_sim(problem, "python")
    masks = build_masks(game)
    for _ in range(60):
        before = stacked_state(sim, game)
        agent = sim.step()
        after = stacked_state(sim, game)
        changed = np.flatnonzero(before != after)
        assert set(changed) <= set(masks.supports[agent].tolist())


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("algorithm", ["geed", "geno"])
def test_toy_converges_async(algorithm):
    game = make_toy_game()
    res = run_async(game, algorithm=algorithm,
                    activation=ActivationModel.uniform(2, seed=1),
                    tol=1e-7, max_activations=100_000)
    assert res.converged
    assert np.allclose(res.x, TOY_X, atol=1e-6)
    assert np.allclose(res.lam_stack, 1.0, atol=1e-6)
    assert res.backend in ("python", "cython")


@pytest.mark.parametrize("algorithm", ["geed", "geno"])
def test_solution_is_engine_fixed_point(algorithm):
    game = make_toy_game()
    act = ActivationModel.round_robin([0, 1])
    cfg = async_cfg(game, act)
    problem = build_problem(game, cfg, algorithm, act, DelayModel.zero(),
                            x0=TOY_X, lam0=np.ones((2, 1)))
    sim = make_sim(problem, "python")
    for _ in range(50):
        sim.step()
    assert np.allclose(np.asarray(sim.x), TOY_X, atol=1e-14)
    assert np.allclose(np.asarray(sim.lam), 1.0, atol=1e-14)


def test_step_wrappers_advance_clock():
    game = make_path3_game()
    act = ActivationModel.scripted([1, 1, 2])
    cfg = async_cfg(game, act)
    s1 = make_sim(build_problem(game, cfg, "geed", act, DelayModel.zero()),
                  "python")
    s2 = make_sim(build_problem(game, cfg, "geno", act, DelayModel.zero()),
                  "python")
    assert adgeed_step(s1) == 1 and adgeed_step(s1) == 1
    assert adgeno_step(s2) == 1 and adgeno_step(s2) == 1
    assert s1.k == 2 and s2.k == 2


def test_double_activation_before_read_stays_equivalent():
    # agent 1 publishes twice before its edge sink ever reads; the
    # node-variable mailboxes must absorb both increments
    game = make_path3_game()
    act = ActivationModel.scripted([1, 1, 2])
    cfg = async_cfg(game, act)
    dev = trace_equivalence(game, cfg=cfg, activation=act,
                            delays=DelayModel.zero(), horizon=3)
    assert dev <= 1e-14


@pytest.mark.parametrize("delays", [DelayModel.zero(), DelayModel.fixed(2),
                                    DelayModel.uniform(3, seed=3)])
def test_trace_equivalence_across_delay_modes(delays):
    game = cournot_seeded(1)
    act = ActivationModel.uniform(game.n_agents, seed=21)
    dev = trace_equivalence(game, activation=act, delays=delays,
                            horizon=800)
    assert dev <= 1e-12


def test_rho_scaling_negative_control():
    # dropping the rho factor from the mailbox path must break equivalence
    game = cournot_seeded(1)
    act = ActivationModel.uniform(game.n_agents, seed=21)
    cfg = derive_steps(game, rho=0.5)
    cfg.eta = eta_bound_async(cfg.chi, cfg.theta, game.n_agents,
                              act.p_min(game.n_agents), 0)
    dev = trace_equivalence(game, cfg=cfg, activation=act,
                            delays=DelayModel.zero(), horizon=800,
                            rho_in_z=False)
    assert dev > 1e-3


def test_run_async_sets_default_eta():
    game = make_toy_game()
    cfg = derive_steps(game)
    act = ActivationModel.uniform(2, seed=0)
    run_async(game, cfg=cfg, activation=act, tol=1e-4,
              max_activations=10_000)
    expect = eta_bound_async(cfg.chi, cfg.theta, 2, 0.5, 0, c=0.9)
    assert cfg.eta == pytest.approx(expect)
    assert cfg.eta == pytest.approx(1.35)  # worked by hand for the toy game


def test_budget_bookkeeping():
    game = cournot_seeded(2)
    N = game.n_agents
    res = run_async(game, algorithm="geed", tol=0.0,
                    max_activations=4 * N + 3, record_trace=True)
    assert not res.converged
    assert res.epochs == 4
    assert res.activations == 4 * N
    assert len(res.trace) == 4
    assert res.update_ns > 0


def test_max_realized_delay_reporting():
    game = cournot_seeded(2)
    res = run_async(game, algorithm="geno", delays=DelayModel.fixed(2),
                    tol=0.0, max_activations=100 * game.n_agents)
    assert res.max_realized_delay == 2
    fresh = run_async(game, algorithm="geno", tol=0.0,
                      max_activations=10 * game.n_agents)
    assert fresh.max_realized_delay == 0


# ---------------------------------------------------------------------------
# delayed reads
# ---------------------------------------------------------------------------

def test_read_delayed_fresh_equals_current():
    game = make_path3_game()
    act = ActivationModel.round_robin([0, 1, 2])
    cfg = async_cfg(game, act)
    sim = make_sim(build_problem(game, cfg, "geed", act, DelayModel.zero()),
                   "python")
    for _ in range(9):
        sim.step()
    view = read_delayed(sim, reader=0)
    assert np.array_equal(view["x"], np.asarray(sim.x))
    assert np.array_equal(view["lam"], np.asarray(sim.lam))
    assert np.array_equal(view["sigma"], np.asarray(sim.sigma))
    assert np.array_equal(view["realized_delay"], [0, 0, 0])


def test_read_delayed_fixed_lag():
    game = make_path3_game()
    act = ActivationModel.round_robin([1, 2, 0])
    cfg = async_cfg(game, act, DelayModel.fixed(1))
    sim = make_sim(build_problem(game, cfg, "geed", act, DelayModel.fixed(1)),
                   "python")
    snapshots = {0: {"x": np.asarray(sim.x).copy(),
                     "lam": np.asarray(sim.lam).copy()}}
    for k in range(6):
        sim.step()
        snapshots[k + 1] = {"x": np.asarray(sim.x).copy(),
                            "lam": np.asarray(sim.lam).copy()}
    view = read_delayed(sim, reader=0)
    k = sim.k
    old = snapshots[k - 1]
    for w in (1, 2):
        assert view["realized_delay"][w] == 1
        o0, o1 = sim.offsets[w], sim.offsets[w + 1]
        assert np.array_equal(view["x"][o0:o1], old["x"][o0:o1])
        assert np.array_equal(view["lam"][w], old["lam"][w])
    # the reader's own block is always current
    assert np.array_equal(view["x"][:1], np.asarray(sim.x)[:1])


def test_read_delayed_horizons_never_regress():
    game = make_path3_game()
    act = ActivationModel.uniform(3, seed=13)
    dly = DelayModel.uniform(3, seed=14)
    cfg = async_cfg(game, act, dly)
    sim = make_sim(build_problem(game, cfg, "geed", act, dly), "python")
    horizons = np.zeros(3, dtype=int)
    for _ in range(40):
        sim.step()
        view = read_delayed(sim, reader=0)
        h = sim.k - view["realized_delay"]
        assert np.all(h >= horizons)
        horizons = np.maximum(horizons, h)
        assert np.all(view["realized_delay"] <= 3 + 1)


# ---------------------------------------------------------------------------
# determinism and replay
# ---------------------------------------------------------------------------

def test_runs_are_bit_identical():
    game = cournot_seeded(4)
    act = ActivationModel.uniform(game.n_agents, seed=9)
    dly = DelayModel.uniform(2, seed=10)
    r1 = run_async(game, algorithm="geno", activation=act, delays=dly,
                   tol=0.0, max_activations=600)
    r2 = run_async(game, algorithm="geno", activation=act, delays=dly,
                   tol=0.0, max_activations=600)
    assert np.array_equal(r1.x, r2.x)
    assert np.array_equal(r1.lam_stack, r2.lam_stack)


def test_schedule_dump_parse_roundtrip():
    game = make_path3_game()
    act = ActivationModel.uniform(3, seed=2)
    dly = DelayModel.uniform(3, seed=6)
    text = dump_schedule(game, act, dly, 50)
    seq, table = parse_schedule(text)
    assert seq.shape == (50,) and table.shape == (50, 3)
    assert seq.tolist() == [next_activation(act, k) for k in range(50)]
    for k in range(50):
        for w in range(3):
            assert table[k, w] == dly.sample_n(k, seq[k], w, 3)


def test_replay_reproduces_run(tmp_path):
    game = cournot_seeded(4)
    N = game.n_agents
    act = ActivationModel.uniform(N, seed=31)
    dly = DelayModel.uniform(3, seed=32)
    horizon = 40 * N
    r1 = run_async(game, algorithm="geno", activation=act, delays=dly,
                   tol=0.0, max_activations=horizon)
    path = tmp_path / "schedule.csv"
    save_schedule(path, game, act, dly, horizon)
    seq, table = load_schedule(path)
    act2, dly2 = replay_models(seq, table)
    r2 = run_async(game, algorithm="geno", activation=act2, delays=dly2,
                   tol=0.0, max_activations=horizon)
    assert r2.activations == r1.activations
    assert np.array_equal(r1.x, r2.x)
    assert np.array_equal(r1.lam_stack, r2.lam_stack)


def test_parse_schedule_rejects_garbage():
    with pytest.raises(ValueError):
        parse_schedule("epoch,residual\n0,1.0\n")


def test_scripted_budget_caps_run():
    game = make_path3_game()
    act = ActivationModel.scripted([0, 1, 2, 0, 1, 2])
    res = run_async(game, algorithm="geed", activation=act, tol=0.0,
                    max_activations=10_000)
    assert res.activations == 6
