"""Compare the compiled kernels with their numpy/LAPACK twins.

Usage: python3 benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 3]
"""
import argparse
import time

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from gammah import _kernels_py
from gammah.assembly import ProblemSpec, assemble_2d
from gammah.linalg import envelope_arrays
from gammah.mesh import lshape_mesh

try:
    from gammah import _kernels as _compiled
except ImportError:
    _compiled = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_size(n, repeat):
    mesh = lshape_mesh(n)
    xy = np.ascontiguousarray(mesh.vertices)
    tri = np.ascontiguousarray(mesh.triangles)
    dof = np.ascontiguousarray(mesh.dof_map())
    _, M = assemble_2d(mesh, ProblemSpec("laplace_potential_2d"))
    perm = reverse_cuthill_mckee(sp.csr_matrix(M), symmetric_mode=True)
    first, ptr, env = envelope_arrays(M[perm][:, perm])
    b = np.ones((len(first), 1))

    out = {}
    backends = {"python": _kernels_py}
    if _compiled is not None:
        backends["compiled"] = _compiled
    for name, k in backends.items():
        t_asm = best_of(lambda: k.p1_triplets(xy, tri, dof, 1.0, 0.0, 0.0, 0.0), repeat)

        def chol():
            e = env.copy()
            k.envelope_cholesky(first, ptr, e)
            return e

        t_chol = best_of(chol, repeat)
        fac = chol()
        def solve():
            x = b.copy()
            k.envelope_solve_lower(first, ptr, fac, x)
            k.envelope_solve_upper(first, ptr, fac, x)
            return x

        t_solve = best_of(solve, repeat)
        out[name] = (t_asm, t_chol, t_solve)
    return mesh.n_triangles, len(first), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; timing the python backend only")
    print(f"{'n':>5} {'elements':>9} {'dofs':>8} {'backend':>9} "
          f"{'assembly s':>11} {'cholesky s':>11} {'solve s':>9}")
    for n in args.sizes:
        ne, nd, res = bench_size(n, args.repeat)
        for name, (ta, tc, ts) in res.items():
            print(f"{n:>5} {ne:>9} {nd:>8} {name:>9} {ta:>11.4f} {tc:>11.4f} {ts:>9.4f}")
        if "compiled" in res:
            sp_ = [p / c if c > 0 else float("nan") for p, c in zip(res["python"], res["compiled"])]
            print(f"{'':>5} {'':>9} {'':>8} {'speedup':>9} {sp_[0]:>11.2f} {sp_[1]:>11.2f} {sp_[2]:>9.2f}")


if __name__ == "__main__":
    main()
