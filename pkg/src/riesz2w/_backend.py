"""Select the pairwise-kernel backend at import time.

The compiled extension is preferred when importable; set
``RIESZ2W_BACKEND=python`` or ``=cython`` to force a choice.
"""

import os

_choice = os.environ.get("RIESZ2W_BACKEND", "auto").lower()

if _choice not in ("auto", "cython", "python"):
    raise ImportError(f"RIESZ2W_BACKEND must be auto|cython|python, got {_choice!r}")

if _choice == "python":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _fastkern as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        from . import _kernels_py as _impl

        BACKEND = "python"

riesz_matvec = _impl.riesz_matvec
riesz_rmatvec = _impl.riesz_rmatvec
pair_moment2 = _impl.pair_moment2
pair_directional_sum = _impl.pair_directional_sum
pair_angle_hist = _impl.pair_angle_hist
pair_min_dist = _impl.pair_min_dist
box_poisson_sum = _impl.box_poisson_sum
