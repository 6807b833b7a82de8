"""Sup-convolution evaluation of the rescaled first-order flow

    h_τ - y·∇h - |∇h|^q = 0,   h(0) = h0,

through

    h(τ, y) = sup_z { h0(z) - γ_q |y - z e^{-τ}|^{q/(q-1)} (1 - e^{-qτ})^{-1/(q-1)} }_+.

For radial data the competitor can be restricted to the ray through ``y``:
any other ``z`` with the same modulus is farther from ``y e^{τ}``. The
``line`` mode evaluates the full one-dimensional formula and is used to
check that reduction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError
from .profiles import Params, derived_constants

__all__ = ["SampledInitialData", "hopf_lax_evolve", "tail_smallness"]

GOLDEN_ITERS = 60
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_CHUNK = 1 << 22  # query x candidate entries per block


@dataclass(frozen=True)
class SampledInitialData:
    """Nonnegative compactly supported samples on a uniform grid.

    ``mode`` is ``"radial"`` (nodes are radii from 0) or ``"line"``
    (nodes are positions on the real line).
    """

    nodes: np.ndarray
    values: np.ndarray
    mode: str = "radial"

    def __post_init__(self):
        x = np.array(self.nodes, dtype=float)
        v = np.array(self.values, dtype=float)
        if x.shape != v.shape or x.ndim != 1 or len(x) < 2:
            raise ValueError("nodes and values must be 1-D arrays of equal length >= 2")
        if self.mode not in ("radial", "line"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if np.any(np.diff(x) <= 0):
            raise ValueError("nodes must be increasing")
        if self.mode == "radial" and x[0] < 0:
            raise ValueError("radial nodes must be >= 0")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("values must be finite and >= 0")
        x.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "values", v)

    @property
    def support_radius(self) -> float:
        nz = np.flatnonzero(self.values > 0)
        if not nz.size:
            return 0.0
        return float(np.max(np.abs(self.nodes[nz])))


def _interp(data: SampledInitialData, z: np.ndarray) -> np.ndarray:
    return np.interp(z, data.nodes, data.values, left=0.0, right=0.0)


def _golden(objective, yy, a, b):
    """Maximum of ``objective(yy, ·)`` on ``[a, b]``, assumed unimodal there."""
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = objective(yy, x1), objective(yy, x2)
    for _ in range(GOLDEN_ITERS):
        left = f1 >= f2
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        nx1 = b - _INVPHI * (b - a)
        nx2 = a + _INVPHI * (b - a)
        x1n = np.where(left, nx1, x2)
        x2n = np.where(left, x1, nx2)
        f1n = np.where(left, objective(yy, nx1), f2)
        f2n = np.where(left, f1, objective(yy, nx2))
        x1, x2, f1, f2 = x1n, x2n, f1n, f2n
    return objective(yy, 0.5 * (a + b))


def hopf_lax_evolve(h0: SampledInitialData, tau: float, query_points, params: Params) -> np.ndarray:
    """``h(τ, ·)`` at ``query_points`` (radii in radial mode, positions in line mode).

    Grid search over the positive samples of ``h0`` followed by golden-section
    refinement on the two linear pieces of the interpolant that meet at the
    best node.
    """
    if not tau > 0:
        raise ParameterDomainError(f"tau must be > 0, got {tau!r}")
    q = params.q
    k = q / (q - 1.0)
    c = derived_constants(params).gamma_q * (-math.expm1(-q * tau)) ** (-1.0 / (q - 1.0))
    e = math.exp(-tau)

    y = np.atleast_1d(np.asarray(query_points, dtype=float))
    if h0.mode == "radial":
        y = np.abs(y)
    out = np.zeros(y.shape)
    cand = np.flatnonzero(h0.values > 0)
    if not cand.size:
        return out
    # one neighbour on each side so refinement can reach the support edge
    lo_i, hi_i = max(cand[0] - 1, 0), min(cand[-1] + 1, len(h0.nodes) - 1)
    zs = h0.nodes[lo_i:hi_i + 1]
    hs = h0.values[lo_i:hi_i + 1]

    def objective(yy, z):
        return _interp(h0, z) - c * np.abs(yy - z * e) ** k

    stalls = 0
    tol = 1e-12 * max(1.0, float(np.max(h0.values)))
    block = max(1, _CHUNK // len(zs))
    flat = y.ravel()
    res = out.ravel()
    for s in range(0, flat.size, block):
        yy = flat[s:s + block]
        vals = hs[None, :] - c * np.abs(yy[:, None] - zs[None, :] * e) ** k
        j = np.argmax(vals, axis=1)
        best = vals[np.arange(len(yy)), j]
        zj = zs[j]
        # the objective is concave on each linear piece of h0, so a golden
        # search per adjacent piece finds that piece's maximum
        left = _golden(objective, yy, zs[np.maximum(j - 1, 0)], zj)
        right = _golden(objective, yy, zj, zs[np.minimum(j + 1, len(zs) - 1)])
        refined = np.maximum(left, right)
        # negative values are clipped anyway; only a miss above 0 matters
        stalls += int(np.count_nonzero((best > 0) & (refined < best - tol)))
        res[s:s + block] = np.maximum(np.maximum(best, refined), 0.0)
    if stalls:
        warnings.warn(f"golden-section refinement fell back to the grid value at {stalls} points",
                      RuntimeWarning, stacklevel=2)
    return np.minimum(out, float(np.max(h0.values)))


def tail_smallness(h_values, Y: float, beta: float, y_nodes=None) -> bool:
    """True iff every sample at radius ``>= Y`` is ``<= beta``.

    ``h_values`` is an array (``y_nodes`` then required) or any object with
    ``y_nodes``/``v``, ``nodes``/``values`` or ``grid``/``u`` attributes.
    Beyond the sampled range values are taken as 0.
    """
    if y_nodes is None:
        for xs, vs in (("y_nodes", "v"), ("nodes", "values")):
            if hasattr(h_values, xs):
                y_nodes, h_values = getattr(h_values, xs), getattr(h_values, vs)
                break
        else:
            if hasattr(h_values, "grid"):
                y_nodes, h_values = h_values.grid.r, h_values.u
            else:
                raise ValueError("y_nodes required for a bare array")
    y = np.abs(np.asarray(y_nodes, dtype=float))
    v = np.asarray(h_values, dtype=float)
    sel = y >= Y
    return bool(np.all(v[sel] <= beta))
