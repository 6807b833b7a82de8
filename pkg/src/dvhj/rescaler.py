"""Self-similar frame, the limit amplitude M∞ and the distance to H∞.

With ``τ = log(1+t)/q`` and ``y = x (1+t)^{-1/q}`` the values of the field
are unchanged; only the coordinates move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .diagnostics import TimeSeries, Verdict
from .hopflax import tail_smallness
from .profiles import Params, eval_h_s, h_s_support_radius
from .solver import RadialField

__all__ = [
    "RescaledField",
    "MInftyEstimate",
    "ConvergenceReport",
    "to_selfsimilar",
    "from_selfsimilar",
    "estimate_M_infty",
    "profile_error",
    "convergence_report",
]

TAIL_LEVEL = 0.05
PROFILE_MONO_TOL = 1e-12


@dataclass(frozen=True)
class RescaledField:
    tau: float
    y_nodes: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class MInftyEstimate:
    M_est: float
    decayed_to_zero: bool
    gamma: float | None  # exponent of the selected fit, None for a constant series
    c: float
    residual: float  # RMS misfit over the fitted tail


@dataclass
class ConvergenceReport:
    M_infty_estimate: float
    fit: MInftyEstimate
    errors_by_tau: np.ndarray  # rows (tau, sup error)
    verdicts: list[Verdict] = field(default_factory=list)

    def summary_lines(self) -> list[str]:
        f = self.fit
        g = "const" if f.gamma is None else format(f.gamma, ".6g")
        lines = [
            f"M_infty_estimate {self.M_infty_estimate!r}",
            f"M_fit gamma={g} c={f.c!r} residual={f.residual!r}",
            f"decayed_to_zero {'yes' if f.decayed_to_zero else 'no'}",
        ]
        if len(self.errors_by_tau):
            tau, err = (float(x) for x in self.errors_by_tau[-1])
            lines.append(f"final_profile_error tau={tau!r} sup_error={err!r}")
        return lines


def to_selfsimilar(field: RadialField, params: Params, target_y_grid=None) -> RescaledField:
    """Rescaled copy of ``field``; ``target_y_grid`` defaults to the image of the field's nodes."""
    if field.t < 0:
        raise ValueError("field time must be >= 0")
    s = (1.0 + field.t) ** (1.0 / params.q)
    r = field.grid.r
    tau = math.log1p(field.t) / params.q
    if target_y_grid is None:
        return RescaledField(tau, r / s, np.array(field.u))
    y = np.asarray(target_y_grid, dtype=float)
    v = np.interp(y * s, r, field.u, left=float(field.u[0]), right=0.0)
    v[y * s > r[-1]] = 0.0
    return RescaledField(tau, y, v)


def from_selfsimilar(v: RescaledField, params: Params, r_nodes) -> np.ndarray:
    """Physical-frame values at ``r_nodes`` from a rescaled field."""
    t = math.expm1(params.q * v.tau)
    y = np.asarray(r_nodes, dtype=float) / (1.0 + t) ** (1.0 / params.q)
    out = np.interp(y, v.y_nodes, v.v, right=0.0)
    out[y > v.y_nodes[-1]] = 0.0
    return out


def _fit_exponents(params: Params) -> list[float]:
    p, q = params.p, params.q
    menu = [0.5, 1.0]
    if 2 * q - p != 0:
        menu.append((p - q) / (2 * q - p))
    return [g for g in menu if g > 0 and math.isfinite(g)]


def estimate_M_infty(
    series: TimeSeries, tail_fraction: float, params: Params, sup0: float | None = None
) -> MInftyEstimate:
    """Fit ``M(t) = M + c t^{-γ}`` to the tail of the sup-norm series.

    γ runs over ``{1/2, 1, (p-q)/(2q-p)}`` (non-positive members dropped) and
    the fit with the smallest RMS residual wins. The estimate is clipped to
    ``[0, ||u0||_∞]``.
    """
    if len(series) < 4:
        raise ValueError(f"need at least 4 snapshots, got {len(series)}")
    if not 0.0 < tail_fraction < 1.0:
        raise ValueError("tail_fraction must lie in (0, 1)")
    if sup0 is None:
        sup0 = float(series.sup_norm[0])
    t_all, m_all = series.t, series.sup_norm
    k = max(4, int(math.ceil(tail_fraction * len(series))))
    t, m = t_all[-k:], m_all[-k:]
    keep = t > 0
    t, m = t[keep], m[keep]
    if len(t) < 2:
        raise ValueError("need at least 2 snapshots with t > 0 in the tail")
    if np.ptp(m) == 0.0:
        M, gamma, c, res = float(m[0]), None, 0.0, 0.0
    else:
        best = None
        for g in _fit_exponents(params):
            A = np.column_stack([np.ones_like(t), t**-g])
            coef, *_ = np.linalg.lstsq(A, m, rcond=None)
            res = float(np.sqrt(np.mean((A @ coef - m) ** 2)))
            if best is None or res < best[3]:
                best = (float(coef[0]), g, float(coef[1]), res)
        M, gamma, c, res = best
    M = min(max(M, 0.0), sup0)
    return MInftyEstimate(M, M < 1e-3 * sup0, gamma, c, res)


def profile_error(v: RescaledField, M: float, params: Params) -> float:
    if M < 0:
        raise ValueError("M must be >= 0")
    return float(np.max(np.abs(v.v - eval_h_s(v.y_nodes, M, params))))


def convergence_report(
    series: TimeSeries,
    snapshots: Sequence[RadialField],
    params: Params,
    sup0: float,
    R0: float,
    tail_fraction: float = 0.5,
) -> ConvergenceReport:
    """Estimate M∞ and track ``||v(τ) - H∞||_∞`` over the snapshots.

    Adds two verdicts: CHK-PROFILE (errors non-increasing over the final half
    of the schedule, only when the amplitude has not decayed) and CHK-TAIL
    (rescaled values below ``0.05 ||u0||_∞`` beyond a ball fixed by ``u0``).
    """
    fit = estimate_M_infty(series, tail_fraction, params, sup0=sup0)
    M = fit.M_est
    rows, rescaled = [], []
    for snap in snapshots:
        v = to_selfsimilar(snap, params)
        rescaled.append(v)
        rows.append((v.tau, profile_error(v, M, params)))
    errors = np.array(rows, dtype=float).reshape(-1, 2)
    verdicts = []

    if fit.decayed_to_zero:
        verdicts.append(Verdict("CHK-PROFILE", "SKIPPED", note="amplitude decayed to zero"))
    else:
        half = errors[errors[:, 0] >= 0.5 * errors[-1, 0], 1]
        inc = np.diff(half)
        worst = float(np.max(inc)) if inc.size else 0.0
        ok = worst <= PROFILE_MONO_TOL * max(M, 1.0)
        verdicts.append(Verdict("CHK-PROFILE", "PASS" if ok else "FAIL", float(errors[-1, 1]),
                                None, -worst, "final error; slack = -max increase"))

    Y = R0 + h_s_support_radius(sup0, params)
    level = TAIL_LEVEL * sup0
    bad = [v.tau for v in rescaled if not tail_smallness(v.v, Y, level, y_nodes=v.y_nodes)]
    worst = max((float(np.max(v.v[v.y_nodes >= Y], initial=0.0)) for v in rescaled), default=0.0)
    note = f"Y={Y:.6g}" + ("" if not bad else f"; exceeded at tau={bad[0]!r}")
    verdicts.append(Verdict("CHK-TAIL", "FAIL" if bad else "PASS", worst, level, level - worst, note))
    return ConvergenceReport(M, fit, errors, verdicts)
