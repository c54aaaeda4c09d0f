"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--n 30000] [--repeat 5]

Inputs are synthetic but shaped like the Adult occupation workload
(5 QIs, up to 16 values, 14 SA values, groups of size l).
"""

import argparse
import time

import numpy as np

from anonattack import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=30000)
    ap.add_argument("--m", type=int, default=5)
    ap.add_argument("--vmax", type=int, default=16)
    ap.add_argument("--sa", type=int, default=14)
    ap.add_argument("--l", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not kernels.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    n = args.n - args.n % args.l
    X = rng.integers(0, args.vmax, (n, args.m)).astype(np.int32)
    y = rng.integers(0, args.sa, n).astype(np.int32)
    log_cond = np.log(rng.dirichlet(np.ones(args.vmax), (args.m, args.sa)).transpose(0, 2, 1))
    log_prior = np.log(rng.dirichlet(np.ones(args.sa)))
    group_ptr = np.arange(0, n + 1, args.l)
    members = rng.permutation(n)
    G = len(group_ptr) - 1
    pos_a = rng.integers(0, args.l, G)
    pos_b = (pos_a + rng.integers(1, args.l, G)) % args.l
    log_u = np.log(rng.random(G))
    counts = kernels.count_joint_np(X, y, args.vmax, args.sa)

    def sweep_with(fn):
        return lambda: fn(X, X, y.copy(), group_ptr, members, pos_a, pos_b, log_u, log_cond, counts.copy())

    cases = {
        "count_joint": (lambda: kernels.count_joint_np(X, y, args.vmax, args.sa),
                        lambda: kernels.count_joint_nb(X, y, args.vmax, args.sa)),
        "log_joint": (lambda: kernels.log_joint_np(X, log_cond, log_prior),
                      lambda: kernels.log_joint_nb(X, log_cond, log_prior)),
        "sweep": (sweep_with(kernels.sweep_np), sweep_with(kernels.sweep_nb)),
    }
    print(f"n={n} m={args.m} vmax={args.vmax} |SA|={args.sa} l={args.l}")
    print(f"{'kernel':<12} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, (np_fn, nb_fn) in cases.items():
        nb_fn()  # compile outside the timing
        t_np, t_nb = best_of(np_fn, args.repeat), best_of(nb_fn, args.repeat)
        print(f"{name:<12} {t_np * 1e3:10.2f} {t_nb * 1e3:10.2f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
