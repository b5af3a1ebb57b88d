"""Kernel backend and precision selection.

LATENTRL_BACKEND=numpy forces the pure-numpy path; LATENTRL_BACKEND=numba
forces the compiled path (and fails loudly if numba is unusable). Unset,
numba is preferred with a silent numpy fallback.

LATENTRL_DTYPE=float32 switches all freshly created parameter, replay, and
world arrays to single precision (float64 is the default and what the
reproducibility guarantees are stated for).
"""

import os

import numpy as np

from .errors import ConfigError

_requested = os.environ.get("LATENTRL_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ConfigError(
        f"LATENTRL_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

_dtype = os.environ.get("LATENTRL_DTYPE", "float64").strip().lower()
if _dtype not in ("float64", "float32"):
    raise ConfigError(
        f"LATENTRL_DTYPE must be 'float64' or 'float32', got {_dtype!r}"
    )
DTYPE = np.float64 if _dtype == "float64" else np.float32

if _requested == "numpy":
    from . import kernels_numpy as ops

    BACKEND = "numpy"
elif _requested == "numba":
    from . import kernels_numba as ops

    BACKEND = "numba"
else:
    try:
        from . import kernels_numba as ops

        BACKEND = "numba"
    except ImportError:
        from . import kernels_numpy as ops

        BACKEND = "numpy"

__all__ = ["ops", "BACKEND", "DTYPE"]
