"""Backend parity: the compiled core and the python mirror must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from gneforge import (ActivationModel, DelayModel, available_backends,
                      active_backend, build_problem, derive_steps,
                      eta_bound_async, make_sim, run_async, set_backend)

from conftest import cournot_seeded


def prepared_problem(algorithm, seed=3, delays=None):
    game = cournot_seeded(seed)
    act = ActivationModel.uniform(game.n_agents, seed=seed + 100)
    dly = delays or DelayModel.uniform(3, seed=seed + 200)
    cfg = derive_steps(game)
    cfg.eta = eta_bound_async(cfg.chi, cfg.theta, game.n_agents,
                              act.p_min(game.n_agents), dly.phi_bound)
    return build_problem(game, cfg, algorithm, act, dly), game


def test_compiled_backend_is_built():
    # the extension is part of the package contract, not an optional extra
    assert available_backends() == ["cython", "python"]
    assert active_backend() == "cython"


def test_set_backend_roundtrip():
    try:
        set_backend("python")
        assert active_backend() == "python"
    finally:
        set_backend("cython")
    assert active_backend() == "cython"
    with pytest.raises(ValueError):
        set_backend("fortran")


def test_make_sim_explicit_choice():
    problem, _ = prepared_problem("geed")
    py = make_sim(problem, "python")
    cy = make_sim(problem, "cython")
    assert "engine_py" in type(py).__module__
    assert "engine_cy" in type(cy).__module__
    with pytest.raises(ValueError):
        make_sim(problem, "rust")


@pytest.mark.parametrize("algorithm", ["geed", "geno"])
def test_backends_agree_in_lockstep(algorithm):
    problem, _ = prepared_problem(algorithm)
    py = make_sim(problem, "python")
    cy = make_sim(problem, "cython")
    for _ in range(400):
        a_py = py.step()
        a_cy = cy.step()
        assert a_py == a_cy
    assert np.max(np.abs(np.asarray(py.x) - np.asarray(cy.x))) <= 1e-12
    assert np.max(np.abs(np.asarray(py.lam) - np.asarray(cy.lam))) <= 1e-12
    assert np.max(np.abs(np.asarray(py.sigma) - np.asarray(cy.sigma))) <= 1e-12


@pytest.mark.parametrize("backend", ["python", "cython"])
def test_each_backend_is_reproducible(backend):
    game = cournot_seeded(8)
    act = ActivationModel.uniform(game.n_agents, seed=1)
    runs = []
    for _ in range(2):
        res = run_async(game, algorithm="geno", activation=act,
                        delays=DelayModel.uniform(2, seed=2), tol=0.0,
                        max_activations=50 * game.n_agents, backend=backend)
        runs.append(res)
    assert runs[0].backend == backend
    assert np.array_equal(runs[0].x, runs[1].x)
    assert np.array_equal(runs[0].lam_stack, runs[1].lam_stack)


def test_cross_backend_full_runs_match():
    game = cournot_seeded(9)
    act = ActivationModel.uniform(game.n_agents, seed=1)
    out = {}
    for backend in ("python", "cython"):
        out[backend] = run_async(game, algorithm="geed", activation=act,
                                 delays=DelayModel.zero(), tol=1e-4,
                                 max_activations=2_000_000, backend=backend,
                                 record_trace=False, check_every=32)
    assert out["python"].converged and out["cython"].converged
    assert out["python"].epochs == out["cython"].epochs
    assert np.max(np.abs(out["python"].x - out["cython"].x)) <= 1e-9


def test_env_var_forces_backend():
    env = dict(os.environ)
    env["GNEFORGE_BACKEND"] = "python"
    code = ("import gneforge.backend as b;"
            "print(b.active_backend())")
    got = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert got.returncode == 0
    assert got.stdout.strip() == "python"
    env["GNEFORGE_BACKEND"] = "nonsense"
    got = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert got.returncode != 0
    assert "GNEFORGE_BACKEND" in got.stderr
