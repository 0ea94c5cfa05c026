"""Backend selection for the hot kernels.

The compiled ``_kernels`` extension is used when it imports; otherwise, or
when ``ODEWORKBENCH_PURE_PYTHON=1`` is set, the pure-Python ``_fallback``.
"""

from __future__ import annotations

import os

from . import _fallback
from ._fallback import hermite_eval, quadratic_rhs  # noqa: F401  (numpy-vectorized already)

BACKEND = "python"
integrate_quadratic = _fallback.integrate_quadratic

if os.environ.get("ODEWORKBENCH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:  # extension not built
        pass
    else:
        integrate_quadratic = _kernels.integrate_quadratic
        BACKEND = "compiled"

STATUS_OK = _fallback.STATUS_OK
STATUS_UNDERFLOW = _fallback.STATUS_UNDERFLOW
STATUS_MAX_STEPS = _fallback.STATUS_MAX_STEPS
