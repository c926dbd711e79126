"""Select the permission-check kernel at import time.

The compiled ``_kernel`` extension is preferred. Setting ``NEVERLAND_PURE_PYTHON=1``
forces the pure-Python fallback, as does a missing or broken build.
"""

import os

if os.environ.get("NEVERLAND_PURE_PYTHON"):
    from . import _kernel_py as kernel

    BACKEND = "python"
else:
    try:
        from . import _kernel as kernel

        BACKEND = "cython"
    except ImportError:
        from . import _kernel_py as kernel

        BACKEND = "python"

check = kernel.check
check_range = kernel.check_range

__all__ = ["BACKEND", "check", "check_range"]
