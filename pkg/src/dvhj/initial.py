"""Initial data on a radial grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParameterDomainError
from .profiles import Params, barenblatt_constants, eval_barenblatt
from .solver import RadialField, RadialGrid

__all__ = ["InitialData", "bump", "tent", "make_initial_data", "read_profile_csv"]

KINDS = ("bump", "tent", "barenblatt", "custom-csv")


@dataclass(frozen=True)
class InitialData:
    field: RadialField
    kind: str
    R0: float  # radius of the support
    w2inf: bool


def bump(r, A: float, R0: float) -> np.ndarray:
    """``A (1 - (r/R0)²)_+²``: compactly supported with bounded second derivatives."""
    s = np.maximum(1.0 - (np.asarray(r, dtype=float) / R0) ** 2, 0.0)
    return A * s * s


def bump_gradient_sup(A: float, R0: float) -> float:
    """``||∇ bump||_∞``, attained at ``r = R0/√3``."""
    return 8.0 * A / (3.0 * np.sqrt(3.0) * R0)


def tent(r, A: float, R0: float) -> np.ndarray:
    return A * np.maximum(1.0 - np.asarray(r, dtype=float) / R0, 0.0)


def read_profile_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column ``r,u`` CSV with a header row."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:] if a], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or len(data) < 2:
        raise ConfigError(f"{path}: need at least two data rows")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ConfigError(f"{path}: radii must be increasing")
    return data[:, 0], data[:, 1]


def make_initial_data(
    kind: str,
    grid: RadialGrid,
    params: Params,
    amplitude: float = 1.0,
    radius: float = 1.0,
    csv_path=None,
    t0: float = 1.0,
) -> InitialData:
    """Sample an initial state; ``amplitude`` is the mass for ``barenblatt``."""
    r = grid.r
    if kind not in KINDS:
        raise ConfigError(f"unknown ic.kind {kind!r}; expected one of {', '.join(KINDS)}")
    if not amplitude > 0:
        raise ParameterDomainError(f"ic.amplitude must be > 0, got {amplitude!r}")
    if kind == "bump":
        u, R0, w2 = bump(r, amplitude, radius), radius, True
    elif kind == "tent":
        u, R0, w2 = tent(r, amplitude, radius), radius, False
    elif kind == "barenblatt":
        if not t0 > 0:
            raise ParameterDomainError("ic.t0 must be > 0")
        _, _, r0 = barenblatt_constants(amplitude, params)
        R0 = r0 * t0 ** (1.0 / (params.N * (params.p - 2.0) + params.p))
        u, w2 = eval_barenblatt(t0, r, amplitude, params), False
    else:
        if csv_path is None:
            raise ConfigError("ic.csv_path is required for custom-csv")
        rs, us = read_profile_csv(csv_path)
        if np.any(us < 0) or not np.all(np.isfinite(us)):
            raise ParameterDomainError("custom initial data must be finite and >= 0")
        u = np.interp(r, rs, us, right=0.0)
        nz = np.flatnonzero(u > 0)
        R0, w2 = (float(r[nz[-1]]) if nz.size else 0.0), False
    if kind in ("bump", "tent") and not radius > 0:
        raise ParameterDomainError(f"ic.radius must be > 0, got {radius!r}")
    if R0 >= grid.r_max - grid.dr:
        raise ParameterDomainError(f"initial support radius {R0!r} does not fit in r_max={grid.r_max!r}")
    u = np.array(u, dtype=float)
    u[-1] = 0.0
    return InitialData(RadialField(grid, 0.0, u), kind, float(R0), w2)
