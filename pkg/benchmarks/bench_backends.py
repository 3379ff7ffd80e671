"""Per-activation cost of the compiled engine vs the pure-Python mirror.

Runs identical schedules through both backends and reports nanoseconds per
activation (engine update time only, residual checks excluded) plus the
speedup factor.  Typical output on one x86-64 core: the compiled core sits
around 1 us/activation, the Python mirror 20-40x above it.

    python3 benchmarks/bench_backends.py --n 8 --activations 200000
"""

import argparse
import time

from gneforge import (ActivationModel, DelayModel, available_backends,
                      build_problem, derive_steps, eta_bound_async,
                      generate_instance, make_sim)
from gneforge.cournot import CournotSpec


def bench(problem, backend, n_act, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        sim = make_sim(problem, backend)
        t0 = time.perf_counter_ns()
        sim.run_chunk(n_act)
        wall = time.perf_counter_ns() - t0
        best = min(best, wall / n_act)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=8, help="number of firms")
    ap.add_argument("--m", type=int, default=3, help="number of markets")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--phi", type=int, default=3, help="delay bound")
    ap.add_argument("--activations", type=int, default=200_000,
                    help="activations per timed run (python backend runs "
                    "a tenth of this)")
    args = ap.parse_args()

    game = generate_instance(CournotSpec(n_firms=args.n, n_markets=args.m,
                                         seed=args.seed))
    act = ActivationModel.uniform(game.n_agents, seed=args.seed + 1)
    dly = DelayModel.uniform(args.phi, seed=args.seed + 2)
    cfg = derive_steps(game)
    cfg.eta = eta_bound_async(cfg.chi, cfg.theta, game.n_agents,
                              act.p_min(game.n_agents), dly.phi_bound)

    backends = available_backends()
    print("instance: N=%d, m=%d, E=%d, dim=%d; delays uniform{0..%d}"
          % (game.n_agents, game.m, game.n_edges, game.dim, args.phi))
    print("%-10s %-10s %14s" % ("algorithm", "backend", "ns/activation"))
    results = {}
    for algorithm in ("geed", "geno"):
        problem = build_problem(game, cfg, algorithm, act, dly)
        for backend in backends:
            n_act = args.activations
            if backend == "python":
                n_act = max(1000, n_act // 10)
            ns = bench(problem, backend, n_act)
            results[(algorithm, backend)] = ns
            print("%-10s %-10s %14.0f" % (algorithm, backend, ns))
    if "cython" in backends and "python" in backends:
        for algorithm in ("geed", "geno"):
            ratio = (results[(algorithm, "python")]
                     / results[(algorithm, "cython")])
            print("%s: compiled core is %.1fx faster" % (algorithm, ratio))


if __name__ == "__main__":
    main()
