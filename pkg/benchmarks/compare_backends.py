"""Benchmark the compiled assignment kernel against the pure-Python fallback.

Times the raw rectangular LAP kernel, the k-cardinality wrapper and a short
Frank-Wolfe solve at several sizes, and verifies both kernels return the
same matchings while timing them.

Run:  python benchmarks/compare_backends.py [--sizes 50,100,200]
"""

import argparse
import time

import numpy as np


def load_kernels():
    kernels = {}
    from zeromatch.lap import _jv_py
    kernels["python"] = _jv_py.lapjv
    try:
        from zeromatch.lap import _jv_cy
        kernels["cython"] = _jv_cy.lapjv
    except ImportError:
        print("note: compiled kernel not built; benchmarking the fallback only")
    return kernels


def time_fn(fn, *args, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_lap(kernels, sizes, rng):
    print(f"\n{'lapjv kernel':<14}" + "".join(f"{f'n={n}':>12}" for n in sizes)
          + f"{'speedup':>10}")
    rows = {}
    for name, fn in kernels.items():
        times = []
        for n in sizes:
            cost = rng.normal(size=(n, n))
            fn(cost)  # warm up / JIT caches
            times.append(time_fn(fn, cost))
        rows[name] = times
        print(f"{name:<14}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times),
              end="")
        if "python" in rows and name != "python":
            print(f"{rows['python'][-1] / times[-1]:>9.1f}x")
        else:
            print(f"{'1.0x':>10}")
    return rows


def check_agreement(kernels, rng, cases=50):
    if len(kernels) < 2:
        return
    mismatches = 0
    for _ in range(cases):
        m = int(rng.integers(2, 40))
        n = int(rng.integers(m, 50))
        cost = rng.normal(size=(m, n))
        if rng.random() < 0.5:
            cost = np.round(cost)  # exercise ties
        outs = [fn(cost) for fn in kernels.values()]
        if not all(np.array_equal(outs[0][0], o[0]) for o in outs[1:]):
            mismatches += 1
    status = "identical" if mismatches == 0 else f"{mismatches} DIFFER"
    print(f"\nkernel agreement over {cases} random instances: {status}")


def bench_solver(sizes, rng):
    from zeromatch.core import MatchProblem
    from zeromatch.solver import SolverConfig, frank_wolfe_zac

    def sym(size):
        M = rng.random((size, size))
        M = (M + M.T) / 2
        np.fill_diagonal(M, 0.0)
        return M

    print(f"\n{'FW solve (8 iters)':<22}" + "".join(f"{f'n={n}':>12}" for n in sizes))
    times = []
    for n in sizes:
        prob = MatchProblem(D=rng.random((n, n)), adjA=sym(n), adjB=sym(n),
                            attrA=sym(n), attrB=sym(n))
        t0 = time.perf_counter()
        frank_wolfe_zac(prob, n // 2, SolverConfig(max_iter=8))
        times.append(time.perf_counter() - t0)
    import zeromatch.lap
    print(f"{zeromatch.lap.kernel_name():<22}"
          + "".join(f"{t:>11.2f}s" for t in times))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="50,100,200",
                        help="comma-separated square sizes")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)

    kernels = load_kernels()
    bench_lap(kernels, sizes, rng)
    check_agreement(kernels, rng)
    bench_solver(sizes, rng)


if __name__ == "__main__":
    main()
