"""Experiment runner: generate | solve | compare | oracle | replay.

Configuration may come from a JSON file (--config) with individual flags
taking precedence; the GNE_FORGE_SEED environment variable overrides the
seed from either source.  Exit codes: 0 success, 2 invalid input,
3 non-convergence.
"""

import argparse
import json
import os
import sys

import numpy as np

from .asynchronous import (ActivationModel, DelayModel, load_schedule,
                           replay_models, run_async, save_schedule)
from .backend import active_backend, available_backends
from .cournot import CournotSpec, generate_instance, scenario_config, \
    sweep_instance
from .game import NonConvergence, load_game, save_game, validate_game
from .oracle import vgne_oracle
from .splitting import ThetaTooSmall, derive_steps, eta_bound_async, \
    eta_bound_sync, kkt_residual
from .svg import save_convergence_svg
from .sync import sdgeno_solve

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONV = 3

ALGORITHMS = ("sd-geno", "ad-geed", "ad-geno")


class CliError(Exception):
    """Invalid input; maps to exit code 2."""


def _sig12(v):
    """Round to 12 significant digits (summary readability/stability)."""
    return float("%.12g" % float(v))


def _steps_summary(cfg):
    d = cfg.to_dict()
    out = {}
    for key, val in d.items():
        if isinstance(val, list):
            out[key] = [_sig12(x) for x in val]
        else:
            out[key] = _sig12(val)
    return out


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise CliError("cannot read config %s: %s" % (path, exc))
    if not isinstance(doc, dict):
        raise CliError("config must be a JSON object")
    return doc


def _effective(args, config, key, default=None):
    """Flag value if given, else config-file value, else default."""
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    if key in config:
        return config[key]
    return default


def _seed_of(args, config):
    env = os.environ.get("GNE_FORGE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError("GNE_FORGE_SEED must be an integer, got %r" % env)
    return int(_effective(args, config, "seed", 0))


def _obtain_game(args, config, seed):
    path = _effective(args, config, "game")
    if path is not None:
        try:
            game = load_game(path)
        except (OSError, ValueError, KeyError) as exc:
            raise CliError("cannot load game %s: %s" % (path, exc))
    else:
        n = int(_effective(args, config, "n", 8))
        m = int(_effective(args, config, "m", 3))
        if n < 1 or m < 1:
            raise CliError("need at least one firm and one market "
                           "(got n=%d, m=%d)" % (n, m))
        game = generate_instance(CournotSpec(n_firms=n, n_markets=m,
                                             seed=seed))
    report = validate_game(game)
    if not report.passed:
        raise CliError("game validation failed: " + "; ".join(report.failures))
    return game


def _parse_float(val):
    return None if val is None else float(val)


def _derive_cfg(game, args, config):
    rho = _parse_float(_effective(args, config, "rho"))
    theta = _effective(args, config, "theta")
    safety = _parse_float(_effective(args, config, "safety"))
    kwargs = {}
    if rho is not None:
        kwargs["rho"] = rho
    if theta is not None:
        kwargs["theta"] = float(theta)
    if safety is not None:
        kwargs["safety"] = safety
    try:
        return derive_steps(game, **kwargs)
    except (ThetaTooSmall, ValueError) as exc:
        raise CliError("invalid step parameters: %s" % exc)


def _models_for(args, config, game, seed):
    """Activation/delay models from scenario or custom/replay flags."""
    replay = _effective(args, config, "replay")
    if replay is not None:
        try:
            seq, table = load_schedule(replay)
        except (OSError, ValueError) as exc:
            raise CliError("cannot load schedule %s: %s" % (replay, exc))
        return replay_models(seq, table)
    scenario = (_effective(args, config, "scenario", "A") or "A").upper()
    if scenario in ("A", "B", "C"):
        return scenario_config(scenario, game.n_agents, seed=seed)
    if scenario != "CUSTOM":
        raise CliError("scenario must be A, B, C or custom")
    probs = _effective(args, config, "probs")
    try:
        if probs is not None:
            if isinstance(probs, str):
                probs = [float(p) for p in probs.split(",")]
            activation = ActivationModel.iid(probs, seed=seed)
        elif _effective(args, config, "round_robin"):
            activation = ActivationModel.round_robin(
                list(range(game.n_agents)))
        else:
            activation = ActivationModel.uniform(game.n_agents, seed=seed)
        mode = _effective(args, config, "delay_mode", "zero")
        phi = int(_effective(args, config, "phi", 0))
        if mode == "zero":
            delays = DelayModel.zero()
        elif mode == "fixed":
            delays = DelayModel.fixed(phi)
        elif mode == "uniform":
            delays = DelayModel.uniform(phi, seed=seed + 1)
        else:
            raise CliError("delay mode must be zero, fixed or uniform")
    except ValueError as exc:
        raise CliError("bad scenario parameters: %s" % exc)
    return activation, delays


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args):
    config = _load_config(args.config)
    seed = _seed_of(args, config)
    n = int(_effective(args, config, "n", 8))
    m = int(_effective(args, config, "m", 3))
    if n < 1 or m < 1:
        raise CliError("need at least one firm and one market "
                       "(got n=%d, m=%d)" % (n, m))
    game = generate_instance(CournotSpec(n_firms=n, n_markets=m, seed=seed))
    report = validate_game(game)
    if not report.passed:
        raise CliError("generated instance failed validation: "
                       + "; ".join(report.failures))
    out = _effective(args, config, "out", "instance.json")
    save_game(game, out)
    print("wrote %s (N=%d, m=%d, E=%d, alpha=%.4g)"
          % (out, game.n_agents, game.m, game.n_edges, report.alpha))
    return EXIT_OK


def cmd_solve(args, command="solve"):
    config = _load_config(args.config)
    seed = _seed_of(args, config)
    default_alg = "ad-geno" if command == "replay" else "sd-geno"
    algorithm = _effective(args, config, "algorithm", default_alg)
    if algorithm not in ALGORITHMS:
        raise CliError("algorithm must be one of %s" % (ALGORITHMS,))
    if command == "replay" and algorithm == "sd-geno":
        raise CliError("replay applies to the asynchronous algorithms")
    tol = float(_effective(args, config, "tol", 1e-6))
    unsafe = bool(_effective(args, config, "unsafe", False))
    game = _obtain_game(args, config, seed)
    cfg = _derive_cfg(game, args, config)
    activation, delays = _models_for(args, config, game, seed)
    if command == "replay" and _effective(args, config, "replay") is None:
        raise CliError("replay needs --replay SCHEDULE.csv")

    c = _parse_float(_effective(args, config, "c"))
    eta_flag = _parse_float(_effective(args, config, "eta"))
    if algorithm == "sd-geno":
        eta_cap = eta_bound_sync(cfg.chi, cfg.theta)
    else:
        eta_cap = eta_bound_async(cfg.chi, cfg.theta, game.n_agents,
                                  activation.p_min(game.n_agents),
                                  delays.phi_bound,
                                  c=0.9 if c is None else c)
    violations = []
    if eta_flag is not None:
        cfg.eta = eta_flag
        if algorithm == "sd-geno":
            if eta_flag >= eta_cap:
                violations.append("eta %.6g >= synchronous bound %.6g"
                                  % (eta_flag, eta_cap))
        elif eta_flag > eta_cap:
            violations.append("eta %.6g > asynchronous bound %.6g"
                              % (eta_flag, eta_cap))
    else:
        cfg.eta = 0.9 * eta_cap if algorithm == "sd-geno" else eta_cap
    violations.extend(cfg.bound_violations(game))
    if violations and not unsafe:
        raise CliError("parameter bounds violated (--unsafe to force): "
                       + "; ".join(violations))

    x_star = None
    if _effective(args, config, "oracle_dist"):
        x_star = vgne_oracle(game, tol=min(tol * 1e-2, 1e-8),
                             gamma=0.5 / cfg.ell).x

    summary = {"algorithm": algorithm, "seed": seed, "tol": tol,
               "steps": _steps_summary(cfg),
               "eta_bound": _sig12(eta_cap),
               "bound_violations": violations,
               "backend": active_backend()}
    if algorithm == "sd-geno":
        max_iter = int(_effective(args, config, "max_iter", 100000))
        result = sdgeno_solve(game, cfg, tol=tol, max_iter=max_iter,
                              x_star=x_star)
        summary["iterations"] = result.iterations
    else:
        max_act = int(_effective(args, config, "max_activations", 1000000))
        result = run_async(game, cfg,
                           algorithm="geed" if algorithm == "ad-geed"
                           else "geno",
                           activation=activation, delays=delays, tol=tol,
                           max_activations=max_act, x_star=x_star,
                           backend=_effective(args, config, "backend"))
        summary["epochs"] = result.epochs
        summary["activations"] = result.activations
        summary["update_ns"] = result.update_ns
        summary["max_realized_delay"] = result.max_realized_delay
        summary["backend"] = result.backend
        dump = _effective(args, config, "dump_schedule")
        if dump is not None:
            save_schedule(dump, game, activation, delays, result.activations)
    res = kkt_residual(game, result.x, result.lam_mean,
                       lam_stack=result.lam_stack)
    summary["converged"] = bool(result.converged)
    summary["residuals"] = {"primal": res.primal, "dual": res.dual,
                            "disagreement": res.disagreement,
                            "violation": res.violation}
    summary["x"] = [float(v) for v in result.x]
    summary["lam"] = [float(v) for v in result.lam_mean]

    trace_path = _effective(args, config, "trace")
    if trace_path is not None and result.trace is not None:
        result.trace.to_csv(trace_path)
    plot_path = _effective(args, config, "plot")
    if plot_path is not None and result.trace is not None:
        save_convergence_svg(plot_path, result.trace,
                             title="%s (seed %d)" % (algorithm, seed))
    out = _effective(args, config, "summary")
    text = json.dumps(summary, indent=2, sort_keys=True)
    if out is not None:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK if result.converged else EXIT_NONCONV


def _compare_one(task):
    """One paired (degree, seed) measurement; top-level for pickling."""
    (n, m, degree, seed, tol, max_act) = task
    game = sweep_instance(n, degree, seed=seed, n_markets=m)
    cfg = derive_steps(game)
    out = {"avg_degree": degree, "seed": seed}
    for alg in ("geed", "geno"):
        activation = ActivationModel.uniform(game.n_agents,
                                             seed=seed * 1000 + 17)
        result = run_async(game, cfg, algorithm=alg, activation=activation,
                           delays=DelayModel.zero(), tol=tol,
                           max_activations=max_act, record_trace=False,
                           check_every=64)
        out["time_%s" % alg] = result.update_ns
        out["epochs_%s" % alg] = result.epochs
    return out


def cmd_compare(args):
    config = _load_config(args.config)
    seed0 = _seed_of(args, config)
    n = int(_effective(args, config, "n", 40))
    m = int(_effective(args, config, "m", 3))
    degrees = _effective(args, config, "degrees", "3,10,20,39")
    if isinstance(degrees, str):
        degrees = [float(d) for d in degrees.split(",")]
    n_seeds = int(_effective(args, config, "seeds", 3))
    tol = float(_effective(args, config, "tol", 1e-6))
    max_act = int(_effective(args, config, "max_activations", 4000000))
    workers = int(_effective(args, config, "workers", 1))
    algos = _effective(args, config, "algorithms", "ad-geed,ad-geno")
    if isinstance(algos, str):
        algos = [a.strip() for a in algos.split(",")]
    if set(algos) != {"ad-geed", "ad-geno"}:
        raise CliError("compare currently pairs ad-geed with ad-geno")

    tasks = [(n, m, d, seed0 + s, tol, max_act)
             for d in degrees for s in range(n_seeds)]
    if workers > 1:
        import concurrent.futures
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_compare_one, tasks))
    else:
        rows = [_compare_one(t) for t in tasks]
    rows.sort(key=lambda r: (r["avg_degree"], r["seed"]))

    lines = ["avg_degree,time_geed,time_geno,epochs_geed,epochs_geno,"
             "speedup_percent"]
    for d in degrees:
        sub = [r for r in rows if r["avg_degree"] == d]
        t_geed = float(np.mean([r["time_geed"] for r in sub]))
        t_geno = float(np.mean([r["time_geno"] for r in sub]))
        e_geed = float(np.mean([r["epochs_geed"] for r in sub]))
        e_geno = float(np.mean([r["epochs_geno"] for r in sub]))
        speedup = 100.0 * (t_geed - t_geno) / t_geed if t_geed > 0 else 0.0
        lines.append("%g,%.0f,%.0f,%.1f,%.1f,%.2f"
                     % (d, t_geed, t_geno, e_geed, e_geno, speedup))
    text = "\n".join(lines) + "\n"
    out = _effective(args, config, "out")
    if out is not None:
        with open(out, "w") as fh:
            fh.write(text)
    print(text, end="")
    return EXIT_OK


def cmd_oracle(args):
    config = _load_config(args.config)
    seed = _seed_of(args, config)
    game = _obtain_game(args, config, seed)
    tol = float(_effective(args, config, "tol", 1e-8))
    gamma = _parse_float(_effective(args, config, "gamma"))
    sol = vgne_oracle(game, tol=tol, gamma=gamma)
    doc = {"x": [float(v) for v in sol.x],
           "lam": [float(v) for v in sol.lam],
           "iterations": sol.iterations,
           "residual": {"primal": sol.residual.primal,
                        "dual": sol.residual.dual,
                        "disagreement": sol.residual.disagreement,
                        "violation": sol.residual.violation}}
    text = json.dumps(doc, indent=2, sort_keys=True)
    out = _effective(args, config, "out")
    if out is not None:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="JSON config file (flags win)")
    p.add_argument("--seed", type=int, help="master seed "
                   "(GNE_FORGE_SEED env overrides)")
    p.add_argument("--game", help="instance JSON path")
    p.add_argument("--n", type=int, help="firms when generating inline")
    p.add_argument("--m", type=int, help="markets when generating inline")


def _add_solver(p):
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--scenario", help="A | B | C | custom")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--max-activations", type=int, dest="max_activations")
    p.add_argument("--rho", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--safety", type=float)
    p.add_argument("--c", type=float, help="asynchronous eta bound factor")
    p.add_argument("--unsafe", action="store_const", const=True,
                   help="run despite violated parameter bounds")
    p.add_argument("--probs", help="custom scenario iid probabilities")
    p.add_argument("--round-robin", action="store_const", const=True,
                   dest="round_robin")
    p.add_argument("--delay-mode", dest="delay_mode",
                   choices=("zero", "fixed", "uniform"))
    p.add_argument("--phi", type=int, help="delay bound / fixed delay")
    p.add_argument("--trace", help="write the metrics trace CSV here")
    p.add_argument("--summary", help="write the summary JSON here")
    p.add_argument("--plot", help="write a three-panel SVG here")
    p.add_argument("--replay", help="scripted schedule CSV to replay")
    p.add_argument("--dump-schedule", dest="dump_schedule",
                   help="write the realized schedule CSV here")
    p.add_argument("--oracle-dist", dest="oracle_dist", action="store_const",
                   const=True, help="compute x* first so the trace's "
                   "rel_dist_to_opt column is populated")
    p.add_argument("--backend", choices=available_backends())


def build_parser():
    ap = argparse.ArgumentParser(
        prog="gneforge",
        description="Distributed GNE seeking: generation, solving, sweeps.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit a Cournot instance JSON")
    _add_common(g)
    g.add_argument("--out", help="output path (default instance.json)")

    s = sub.add_parser("solve", help="run one algorithm on one instance")
    _add_common(s)
    _add_solver(s)

    r = sub.add_parser("replay", help="re-run a dumped schedule exactly")
    _add_common(r)
    _add_solver(r)

    c = sub.add_parser("compare", help="AD-GEED vs AD-GENO density sweep")
    _add_common(c)
    c.add_argument("--degrees", help="comma list of mean degrees")
    c.add_argument("--seeds", type=int, help="number of seeds per degree")
    c.add_argument("--tol", type=float)
    c.add_argument("--max-activations", type=int, dest="max_activations")
    c.add_argument("--workers", type=int)
    c.add_argument("--algorithms", help="comma list (ad-geed,ad-geno)")
    c.add_argument("--out", help="comparison CSV path")

    o = sub.add_parser("oracle", help="independent reference solution (JSON)")
    _add_common(o)
    o.add_argument("--tol", type=float)
    o.add_argument("--gamma", type=float)
    o.add_argument("--out", help="also write the JSON here")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "replay":
            return cmd_solve(args, command="replay")
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "oracle":
            return cmd_oracle(args)
        raise CliError("unknown command %r" % args.command)
    except CliError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INVALID
    except NonConvergence as exc:
        print("did not converge: %s" % exc, file=sys.stderr)
        return EXIT_NONCONV


if __name__ == "__main__":
    sys.exit(main())
