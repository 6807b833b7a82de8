"""Time the compiled and numpy stepping backends on the same problem.

    python3 benchmarks/bench_kernels.py --dr 0.005 --T 5

Prints wall time, steps, and nanoseconds per node-update for each backend,
and checks that both produce the same final state.
"""

import argparse
import time

import numpy as np

from dvhj import kernels
from dvhj.initial import bump
from dvhj.profiles import Params
from dvhj.solver import RadialField, RadialGrid, SolverConfig, evolve


def run(backend, params, dr, T, r_max, eps):
    g = RadialGrid.from_spacing(r_max, dr)
    u = bump(g.r, 2.0, 1.0)
    u[-1] = 0.0
    u0 = RadialField(g, 0.0, u)
    start = time.perf_counter()
    res = evolve(u0, T, SolverConfig(epsilon=eps), params, [0.0, T], backend=backend)
    elapsed = time.perf_counter() - start
    # active window is roughly the support plus one node
    nodes = np.count_nonzero(res.snapshots[-1].u) + 1
    return elapsed, res.steps, nodes, res.snapshots[-1].u


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=3.0)
    ap.add_argument("--q", type=float, default=2.0)
    ap.add_argument("--dr", type=float, default=0.005)
    ap.add_argument("--T", type=float, default=5.0)
    ap.add_argument("--r-max", type=float, default=20.0)
    ap.add_argument("--epsilon", type=float, default=0.0)
    args = ap.parse_args(argv)

    params = Params(args.p, args.q)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the numpy backend only")
    finals = {}
    print(f"{'backend':8} {'seconds':>9} {'steps':>9} {'ns/node-step':>13}")
    for name, mod in backends.items():
        elapsed, steps, nodes, u = run(mod, params, args.dr, args.T, args.r_max, args.epsilon)
        finals[name] = u
        ns = 1e9 * elapsed / (steps * nodes)
        print(f"{name:8} {elapsed:9.3f} {steps:9d} {ns:13.2f}")
    if len(finals) == 2:
        diff = float(np.max(np.abs(finals["python"] - finals["cython"])))
        print(f"max |python - cython| = {diff:.3e}")


if __name__ == "__main__":
    main()
