"""Kernel backend selection.

The hot numeric loops live in two interchangeable modules:

* ``_kernels_numba`` -- ``@njit``-compiled loops (default when numba
  imports cleanly)
* ``_kernels_numpy`` -- pure-numpy fallback

``NEURODYN_BACKEND`` picks one explicitly:

* ``numba`` -- require the jitted kernels, fail loudly if numba is missing
* ``numpy`` -- force the fallback (useful for debugging and benchmarking)
* ``auto`` / unset -- numba when available, numpy otherwise

``benchmarks/bench_backends.py`` compares the two implementations.
"""

import os

_choice = os.environ.get("NEURODYN_BACKEND", "auto").strip().lower() or "auto"

if _choice == "numpy":
    from . import _kernels_numpy as kernels

    BACKEND = "numpy"
elif _choice == "numba":
    from . import _kernels_numba as kernels

    BACKEND = "numba"
elif _choice == "auto":
    try:
        from . import _kernels_numba as kernels

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        from . import _kernels_numpy as kernels

        BACKEND = "numpy"
else:
    raise ValueError(
        f"NEURODYN_BACKEND must be 'numba', 'numpy' or 'auto', got {_choice!r}"
    )

__all__ = ["BACKEND", "kernels"]
