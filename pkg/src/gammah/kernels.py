"""Backend selection for the hot loops.

The compiled extension ``gammah._kernels`` is used when it was built; set
``GAMMAH_PURE_PYTHON=1`` to force the numpy/LAPACK fallback in
``gammah._kernels_py``. Both expose the same four functions.
"""
import os

if os.environ.get("GAMMAH_PURE_PYTHON"):
    from gammah import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from gammah import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        from gammah import _kernels_py as _impl
        BACKEND = "python"

p1_triplets = _impl.p1_triplets
envelope_cholesky = _impl.envelope_cholesky
envelope_solve_lower = _impl.envelope_solve_lower
envelope_solve_upper = _impl.envelope_solve_upper

__all__ = ["BACKEND", "p1_triplets", "envelope_cholesky",
           "envelope_solve_lower", "envelope_solve_upper"]
