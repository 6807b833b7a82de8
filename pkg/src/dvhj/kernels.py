"""Selects the time-stepping backend at import.

The compiled extension is used when it was built; otherwise, or when
``DVHJ_PURE_PYTHON`` is set to a non-empty value, the numpy twin is used.
Both expose ``advance`` and ``stable_dt_value`` with identical semantics.
"""

import os
from types import ModuleType

from . import _fallback

MODE_GENERIC = 0
MODE_P3 = 1
MODE_P4 = 2
MODE_Q2 = 1


def _load_compiled() -> ModuleType | None:
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()

if _compiled is not None and not os.environ.get("DVHJ_PURE_PYTHON"):
    backend = _compiled
    BACKEND = "cython"
else:
    backend = _fallback
    BACKEND = "python"

advance = backend.advance
stable_dt_value = backend.stable_dt_value


def available_backends() -> dict[str, ModuleType]:
    out = {"python": _fallback}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def flux_mode(p: float) -> int:
    if p == 3.0:
        return MODE_P3
    if p == 4.0:
        return MODE_P4
    return MODE_GENERIC


def source_mode(q: float) -> int:
    return MODE_Q2 if q == 2.0 else MODE_GENERIC
