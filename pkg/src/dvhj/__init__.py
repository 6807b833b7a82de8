"""Numerical laboratory for ``u_t = Δ_p u + |∇u|^q`` with ``p > 2``, ``q > 1``."""

__version__ = "0.1.0"

from .profiles import Params  # noqa: E402

__all__ = ["Params", "__version__"]
