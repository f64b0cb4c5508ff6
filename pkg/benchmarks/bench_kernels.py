"""Compare the numba and pure-numpy kernel backends.

Times each hot kernel on representative mesh sizes plus one full inner-loop
run, for whichever backend is active, and prints a table.  Run it twice to
see both sides:

    python benchmarks/bench_kernels.py
    QDTOPO_BACKEND=numpy python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from qdtopo import kernels
from qdtopo.fem import Mesh2D, element_stiffness
from qdtopo.problems import mbb_problem, with_simp
from qdtopo.simp import run_simp


def timeit(fn, repeat=20):
    fn()  # warm (first numba call compiles)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_mesh(nx, ny, rmin):
    mesh = Mesh2D(nx, ny)
    rng = np.random.default_rng(0)
    u = rng.normal(size=mesh.n_dofs)
    v = rng.normal(size=mesh.n_dofs)
    rho = rng.uniform(0.0, 1.0, mesh.n_elems)
    g = -rng.uniform(0.0, 3.0, mesh.n_elems)
    bnum = np.maximum(-g, 1e-10)
    designable = np.ones(mesh.n_elems, dtype=bool)
    ke = element_stiffness()
    edof = mesh.edof()
    rows = [
        ("pair_energies", lambda: kernels.pair_energies(u, v, edof, ke)),
        ("filter_apply", lambda: kernels.filter_apply(rho, g, nx, ny, rmin)),
        ("oc_candidate", lambda: kernels.oc_candidate(rho, bnum, 0.7, 0.2,
                                                      0.0, 1.0, designable)),
    ]
    print(f"\n{nx}x{ny} mesh (rmin {rmin}), backend {kernels.BACKEND}:")
    for name, fn in rows:
        print(f"  {name:14s} {timeit(fn) * 1e3:8.3f} ms")


def bench_inner_loop():
    problem = with_simp(mbb_problem(60, 20, 0.5), inner_iters=30, conv_tol=0.0)
    t0 = time.perf_counter()
    result = run_simp(problem, None, problem.simp)
    dt = time.perf_counter() - t0
    print(f"\nfull inner loop 60x20 x30 iterations: {dt:.2f} s "
          f"(objective {result.objective:.2f}, backend {kernels.BACKEND})")


if __name__ == "__main__":
    for nx, ny, rmin in [(60, 20, 1.5), (100, 50, 2.0), (200, 100, 4.0)]:
        bench_mesh(nx, ny, rmin)
    bench_inner_loop()
