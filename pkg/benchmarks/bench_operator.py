"""Compare the compiled and pure-Python backends.

Times the forward and adjoint products and a short solve on the central
64x64 problem (64 patches of 8x8, N = 1000), and checks that both backends
agree to rounding.

    python benchmarks/bench_operator.py [--repeat 200] [--iters 300]
"""

import argparse
import timeit

import numpy as np

from pmlsv import SensingConfig, SolverConfig, adjoint, available_backends, forward, generate, sample_poisson, solve
from pmlsv.harness import ExperimentSpec, build_truth


def best_ms(fn, repeat):
    return 1e3 * min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200, help="timing repeats for the products")
    parser.add_argument("--iters", type=int, default=300, help="solver iterations")
    args = parser.parse_args(argv)

    spec = ExperimentSpec()
    truth = build_truth(spec, 4.0)
    cfg = SensingConfig(64, 64, 1000, seed=1)
    w = np.random.default_rng(0).random(1000)
    solver_cfg = SolverConfig(max_iters=args.iters, stop_tol_mode="absolute", stop_tol=1e-300,
                              target_intensity=float(truth.sum()))

    results = {}
    for name in available_backends():
        op = generate(cfg, backend=name)
        y = sample_poisson(op, truth, 2)
        fwd = best_ms(lambda: forward(op, truth), args.repeat)
        adj = best_ms(lambda: adjoint(op, w), args.repeat)
        t = timeit.default_timer()
        m, trace = solve(op, y, solver_cfg)
        total = timeit.default_timer() - t
        results[name] = (forward(op, truth), m)
        print(f"{name:>9}: forward {fwd:.3f} ms  adjoint {adj:.3f} ms  "
              f"solve {total:.2f} s for {trace.iterations} iterations ({1e3 * total / max(trace.iterations, 1):.2f} ms/iter)")

    if len(results) == 2:
        (r1, m1), (r2, m2) = results.values()
        print(f"max relative difference: rates {np.max(np.abs(r1 - r2) / np.abs(r2)):.1e}, "
              f"iterate {np.max(np.abs(m1 - m2)) / np.max(np.abs(m2)):.1e}")
    else:
        print("compiled backend not built; only the python backend was timed")


if __name__ == "__main__":
    main()
