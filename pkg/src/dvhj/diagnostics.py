"""Per-snapshot statistics and pass/fail checks of the qualitative estimates.

Checks whose constants are explicit are checked against that constant (with
the stated slack); checks that involve unknown universal constants are rate
or boundedness checks only.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import _fallback, kernels
from .errors import ParameterDomainError
from .profiles import Params, derived_constants
from .solver import RadialField, SolverConfig

__all__ = [
    "SERIES_HEADER",
    "StatsRecord",
    "TimeSeries",
    "InitialDataInfo",
    "Verdict",
    "RegimeReport",
    "field_stats",
    "discrete_plap",
    "classify_regime",
    "loglog_slope",
    "burn_in_time",
    "run_checks",
    "format_verdicts",
]

SERIES_HEADER = ("t", "sup_norm", "grad_sup", "l1_norm", "min_plap", "support_radius")

MAXP_TOL = 1e-12
GRADMON_TOL = 1e-10
GRADRATE_SLACK = 0.15
SEMICONV12_SLACK = 1.25
SEMICONV16_SLACK = 1.1
MASSBAL_TOL = 1e-2
L1_GROWTH = 1.5
L1_GROWTH_MIN_T = 100.0
DECAY_SLOPE_TOL = 0.15


class StatsRecord(NamedTuple):
    t: float
    sup_norm: float
    grad_sup: float
    l1_norm: float
    min_plap: float
    support_radius: float


@dataclass(frozen=True)
class TimeSeries:
    t: np.ndarray
    sup_norm: np.ndarray
    grad_sup: np.ndarray
    l1_norm: np.ndarray
    min_plap: np.ndarray
    support_radius: np.ndarray

    def __post_init__(self):
        cols = [np.array(getattr(self, k), dtype=float) for k in SERIES_HEADER]
        if len({len(c) for c in cols}) != 1:
            raise ValueError("series columns differ in length")
        if np.any(np.diff(cols[0]) <= 0):
            raise ValueError("series times must be strictly increasing")
        for k, c in zip(SERIES_HEADER, cols):
            c.flags.writeable = False
            object.__setattr__(self, k, c)

    def __len__(self) -> int:
        return len(self.t)

    def record(self, k: int) -> StatsRecord:
        return StatsRecord(*(float(getattr(self, c)[k]) for c in SERIES_HEADER))

    @classmethod
    def from_records(cls, records: Sequence[StatsRecord]) -> "TimeSeries":
        arr = np.array([tuple(r) for r in records], dtype=float).reshape(-1, len(SERIES_HEADER))
        return cls(*arr.T)

    def to_csv_text(self) -> str:
        lines = [",".join(SERIES_HEADER)]
        for k in range(len(self)):
            lines.append(",".join(repr(v) for v in self.record(k)))
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with open(path, newline="") as fh:
            text = fh.read()
        return cls.from_csv_text(text)

    @classmethod
    def from_csv_text(cls, text: str) -> "TimeSeries":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != SERIES_HEADER:
            raise ValueError(f"series header must be {','.join(SERIES_HEADER)}")
        recs = [StatsRecord(*map(float, r)) for r in rows[1:] if r]
        return cls.from_records(recs)


@dataclass(frozen=True)
class InitialDataInfo:
    """What the checks need to know about the initial state and the run."""

    kind: str
    R0: float  # support radius of u0
    sup0: float
    grad0: float
    min_plap0: float
    w2inf: bool  # u0 has bounded second derivatives
    dt0: float  # first stable step, sets the burn-in time
    r_max: float
    dr: float
    mu: float | None = None  # wave offset for the support bound


@dataclass(frozen=True)
class Verdict:
    name: str
    status: str  # PASS, FAIL or SKIPPED
    measured: float | None = None
    bound: float | None = None
    slack: float | None = None
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def line(self) -> str:
        def fmt(x):
            return "-" if x is None else format(x, ".6g")

        s = f"{self.name} {self.status} {fmt(self.measured)} {fmt(self.bound)} {fmt(self.slack)}"
        return f"{s}  # {self.note}" if self.note else s


def format_verdicts(verdicts: Sequence[Verdict]) -> str:
    return "\n".join(v.line() for v in verdicts) + "\n"


@dataclass(frozen=True)
class RegimeReport:
    regime: str  # A1, A2 or B
    threshold_ratio: float | None = None


def discrete_plap(u: np.ndarray, dr: float, epsilon: float, params: Params) -> np.ndarray:
    """The solver's diffusion term at nodes ``0 .. n-2``."""
    from .solver import RadialGrid

    n = len(u)
    grid = RadialGrid(dr * (n - 1), n)
    wp, wm = grid.metric_weights(params.N)
    g = np.diff(u) * (1.0 / dr)
    e2 = epsilon * epsilon
    flux = _fallback._flux(
        g, kernels.flux_mode(params.p), e2, (params.p - 2.0) / 2.0, params.p - 2.0
    )
    fm = np.empty(n - 1)
    fm[0] = -flux[0]
    fm[1:] = flux[:-1]
    return (wp[:-1] * flux - wm[:-1] * fm) * (1.0 / dr)


def field_stats(field: RadialField, params: Params, config: SolverConfig) -> StatsRecord:
    u = field.u
    grid = field.grid
    dr = grid.dr
    thr = config.support_threshold
    if thr is None:
        thr = 1e-10 * float(np.max(u))
    above = np.flatnonzero(u > thr)
    support = float(above[-1] * dr) if above.size else 0.0
    plap = discrete_plap(u, dr, config.epsilon, params)
    return StatsRecord(
        t=field.t,
        sup_norm=float(np.max(u)),
        grad_sup=float(np.max(np.abs(np.diff(u)))) / dr,
        l1_norm=float(np.dot(grid.volume_weights(params.N), u)),
        min_plap=float(np.min(plap)),
        support_radius=support,
    )


def classify_regime(
    u0_field: RadialField, params: Params, config: SolverConfig | None = None
) -> RegimeReport:
    """Regime A1 (q ≤ p-1), A2 (p-1 < q ≤ q⋆) or B (q⋆ < q < p).

    For regime B the amplitude ratio ``||u0||_∞ / |inf Δ_p u0|^{(p-q)/q}`` is
    reported; whether it is large enough for a positive limit is not decided
    here.
    """
    params.require_subcritical()
    p, q = params.p, params.q
    qs = derived_constants(params).q_star
    if q <= p - 1:
        return RegimeReport("A1")
    if q <= qs:
        return RegimeReport("A2")
    eps = 0.0 if config is None else config.epsilon
    m = float(np.min(discrete_plap(u0_field.u, u0_field.grid.dr, eps, params)))
    if not (math.isfinite(m) and m < 0):
        return RegimeReport("B", math.inf)
    return RegimeReport("B", u0_field.sup / abs(m) ** ((p - q) / q))


def loglog_slope(t: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of ``log y`` against ``log t``."""
    lt, ly = np.log(t), np.log(y)
    return float(np.polyfit(lt, ly, 1)[0])


def burn_in_time(series: TimeSeries, dt0: float) -> float:
    """First snapshot time at or after ``10 dt0``."""
    later = series.t[series.t >= 10.0 * dt0]
    return float(later[0]) if later.size else math.inf


def _final_decade(series: TimeSeries) -> np.ndarray:
    tf = series.t[-1]
    return (series.t >= tf / 10.0) & (series.t > 0)


def _chk_maxp(series, snapshots, info):
    bound = info.sup0 + MAXP_TOL
    worst = float(np.max(series.sup_norm))
    lo = min((float(np.min(s.u)) for s in snapshots), default=0.0)
    inc = np.diff(series.sup_norm)
    bad = []
    if lo < 0:
        bad.append(f"negative value {lo:.3g}")
    over = np.flatnonzero(series.sup_norm > bound)
    if over.size:
        bad.append(f"sup exceeds initial sup at t={float(series.t[over[0]])!r}")
    up = np.flatnonzero(inc > MAXP_TOL)
    if up.size:
        bad.append(f"sup increases at t={float(series.t[up[0] + 1])!r}")
    return Verdict("CHK-MAXP", "FAIL" if bad else "PASS", worst, bound, bound - worst, "; ".join(bad))


def _chk_gradmon(series, info):
    tol = GRADMON_TOL * max(1.0, info.grad0)
    inc = np.diff(series.grad_sup)
    worst = float(np.max(inc)) if inc.size else 0.0
    ok = worst <= tol
    note = "" if ok else f"grad_sup increases at t={float(series.t[int(np.argmax(inc)) + 1])!r}"
    return Verdict("CHK-GRADMON", "PASS" if ok else "FAIL", worst, tol, tol - worst, note)


def _chk_gradrate(series, params):
    sel = _final_decade(series) & (series.grad_sup > 0)
    if np.count_nonzero(sel) < 3:
        return Verdict("CHK-GRADRATE", "SKIPPED", note="fewer than 3 snapshots in the final decade")
    if series.t[-1] / series.t[sel][0] < 5.0:
        return Verdict("CHK-GRADRATE", "SKIPPED", note="final decade not resolved")
    slope = loglog_slope(series.t[sel], series.grad_sup[sel])
    lo = -1.0 / params.q - GRADRATE_SLACK
    ok = lo <= slope <= 0.0
    return Verdict("CHK-GRADRATE", "PASS" if ok else "FAIL", slope, lo, min(slope - lo, -slope))


def _semiconv12_ratio(series, params, info):
    """``min_plap·t / (C G0^{p-q})`` for snapshots past burn-in; the bound is ``-1``."""
    p, q, N = params.p, params.q, params.N
    C = N * (p - 1.0) / (q * (q - 1.0))
    scale = C * info.grad0 ** (p - q)
    sel = series.t >= burn_in_time(series, info.dt0)
    sel &= series.t > 0
    if not np.any(sel) or scale == 0:
        return None
    return series.min_plap[sel] * series.t[sel] / scale


def _chk_semiconv12(series, params, info):
    rho = _semiconv12_ratio(series, params, info)
    if rho is None:
        return Verdict("CHK-SEMICONV-12", "SKIPPED", note="no snapshot past burn-in")
    worst = float(np.min(rho))
    ok = worst >= -SEMICONV12_SLACK
    return Verdict("CHK-SEMICONV-12", "PASS" if ok else "FAIL", worst, -SEMICONV12_SLACK,
                   worst + SEMICONV12_SLACK)


def _chk_semiconv16(series, info):
    if not info.w2inf:
        return Verdict("CHK-SEMICONV-16", "SKIPPED", note="initial data not W2,inf")
    bound = -SEMICONV16_SLACK * abs(info.min_plap0)
    worst = float(np.min(series.min_plap))
    ok = worst >= bound
    return Verdict("CHK-SEMICONV-16", "PASS" if ok else "FAIL", worst, bound, worst - bound)


def _chk_semiconv11(series, params, info):
    p, q = params.p, params.q
    sel = (series.t >= burn_in_time(series, info.dt0)) & (series.t > 0)
    if not np.any(sel) or info.sup0 <= 0:
        return Verdict("CHK-SEMICONV-11", "SKIPPED", note="no snapshot past burn-in")
    val = series.min_plap[sel] * series.t[sel] ** (p / q) / info.sup0 ** ((p - q) / q)
    worst = float(np.min(val))
    ok = math.isfinite(worst)
    return Verdict("CHK-SEMICONV-11", "PASS" if ok else "FAIL", worst, None, None,
                   "compare across resolutions")


def support_tail_allowance(t: np.ndarray, config: SolverConfig, params: Params, sup0: float):
    """Extra radius granted to exponentially small tails of the regularised flow."""
    eps = config.epsilon
    if eps == 0.0:
        return np.zeros_like(t)
    thr = config.support_threshold if config.support_threshold else 1e-10 * sup0
    level = max(thr / sup0, 1e-300) if sup0 > 0 else 1e-10
    return np.sqrt(4.0 * eps ** (params.p - 2.0) * t * math.log(1.0 / level))


def _chk_support(series, params, config, info):
    if config.pure_diffusion:
        return Verdict("CHK-SUPPORT", "SKIPPED", note="pure diffusion run")
    if info.mu is None:
        return Verdict("CHK-SUPPORT", "SKIPPED", note="wave offset unavailable")
    t = series.t
    bound = np.maximum(info.R0, t - info.mu) + 2.0 * info.dr
    bound = bound + support_tail_allowance(t, config, params, info.sup0)
    excess = series.support_radius - bound
    k = int(np.argmax(excess))
    worst = float(excess[k])
    ok = worst <= 0.0
    note = "" if ok else f"support exceeds bound at t={float(t[k])!r}"
    return Verdict("CHK-SUPPORT", "PASS" if ok else "FAIL", float(series.support_radius[k]),
                   float(bound[k]), -worst, note)


def _inside(series, info):
    return series.support_radius < info.r_max - 2.0 * info.dr


def _chk_massbal(series, info, source_integral):
    if source_integral is None:
        return Verdict("CHK-MASSBAL", "SKIPPED", note="source integral not recorded")
    src = np.asarray(source_integral, dtype=float)
    inside = _inside(series, info)
    if not inside[0]:
        return Verdict("CHK-MASSBAL", "SKIPPED", note="initial support touches the far boundary")
    # only while the support stays clear of the far boundary
    last = int(np.argmin(inside)) if not np.all(inside) else len(series)
    dl1 = series.l1_norm[:last] - series.l1_norm[0]
    s = src[:last] - src[0]
    denom = np.maximum(np.abs(s), series.l1_norm[0])
    rel = np.abs(dl1 - s) / np.where(denom > 0, denom, 1.0)
    worst = float(np.max(rel))
    ok = worst <= MASSBAL_TOL
    return Verdict("CHK-MASSBAL", "PASS" if ok else "FAIL", worst, MASSBAL_TOL, MASSBAL_TOL - worst)


def _chk_l1(series, params, config, info):
    inside = _inside(series, info)
    last = int(np.argmin(inside)) if not np.all(inside) else len(series)
    l1 = series.l1_norm[:last]
    tol = 1e-12 * max(abs(float(series.l1_norm[0])), 1e-300)
    drops = np.diff(l1)
    worst_drop = float(np.min(drops)) if drops.size else 0.0
    if worst_drop < -tol:
        k = int(np.argmin(drops)) + 1
        return Verdict("CHK-L1", "FAIL", worst_drop, -tol, worst_drop + tol,
                       f"l1_norm decreases at t={float(series.t[k])!r}")
    qs = derived_constants(params).q_star
    long_run = series.t[-1] >= L1_GROWTH_MIN_T and not config.pure_diffusion
    if params.q <= qs and long_run and last == len(series):
        at1 = np.flatnonzero(series.t >= 1.0)
        base = float(series.l1_norm[at1[0]])
        ratio = float(series.l1_norm[-1]) / base if base > 0 else math.inf
        ok = ratio >= L1_GROWTH
        return Verdict("CHK-L1", "PASS" if ok else "FAIL", ratio, L1_GROWTH, ratio - L1_GROWTH,
                       "growth l1(T)/l1(1)")
    return Verdict("CHK-L1", "PASS", worst_drop, -tol, worst_drop + tol, "monotonicity only")


def _chk_decay(series, params, info):
    from .rescaler import estimate_M_infty

    qs = derived_constants(params).q_star
    if not (qs < params.q < params.p):
        return Verdict("CHK-DECAY", "SKIPPED", note="regime A")
    if len(series) < 4:
        return Verdict("CHK-DECAY", "SKIPPED", note="fewer than 4 snapshots")
    est = estimate_M_infty(series, 0.5, params, sup0=info.sup0)
    if not est.decayed_to_zero:
        return Verdict("CHK-DECAY", "PASS", est.M_est, 1e-3 * info.sup0,
                       est.M_est - 1e-3 * info.sup0, "plateau")
    sel = _final_decade(series) & (series.sup_norm > 0)
    if np.count_nonzero(sel) < 3:
        return Verdict("CHK-DECAY", "SKIPPED", note="fewer than 3 snapshots in the final decade")
    kappa = (params.p - params.q) / (2.0 * params.q - params.p)
    t = series.t[sel]
    slope = loglog_slope(t, series.sup_norm[sel] * t**kappa)
    ok = slope <= DECAY_SLOPE_TOL
    return Verdict("CHK-DECAY", "PASS" if ok else "FAIL", slope, DECAY_SLOPE_TOL,
                   DECAY_SLOPE_TOL - slope, "decay")


def run_checks(
    series: TimeSeries,
    snapshots: Sequence[RadialField],
    params: Params,
    config: SolverConfig,
    ic_meta: InitialDataInfo,
    source_integral=None,
) -> list[Verdict]:
    """Run every check; a check that cannot apply reports SKIPPED with a reason."""
    if len(series) == 0:
        raise ValueError("empty series")
    out = [_chk_maxp(series, snapshots, ic_meta), _chk_gradmon(series, ic_meta)]
    try:
        params.require_subcritical()
        sub = True
    except ParameterDomainError:
        sub = False
    out.append(_chk_gradrate(series, params))
    if config.pure_diffusion:
        for name in ("CHK-SEMICONV-12", "CHK-SEMICONV-16", "CHK-SEMICONV-11"):
            out.append(Verdict(name, "SKIPPED", note="pure diffusion run"))
    else:
        out += [
            _chk_semiconv12(series, params, ic_meta),
            _chk_semiconv16(series, ic_meta),
            _chk_semiconv11(series, params, ic_meta),
        ]
    out.append(_chk_support(series, params, config, ic_meta))
    out.append(_chk_massbal(series, ic_meta, source_integral))
    out.append(_chk_l1(series, params, config, ic_meta))
    if config.pure_diffusion or not sub:
        out.append(Verdict("CHK-DECAY", "SKIPPED", note="not a growth run with q < p"))
    else:
        out.append(_chk_decay(series, params, ic_meta))
    return out
