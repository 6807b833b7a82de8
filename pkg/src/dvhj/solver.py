"""Explicit monotone finite-volume solver for the radial problem

    u_t = r^{1-N} (r^{N-1} a_ε(u_r²) u_r)_r + b_ε(u_r²),

with ``a_ε(s) = (s + ε²)^{(p-2)/2}`` and ``b_ε(s) = (s + ε²)^{q/2} - ε^q``.
``ε = 0`` gives the degenerate equation itself.

The source is discretised with the Godunov numerical Hamiltonian of the
concave ``-|ξ|^q``, so under the step restriction of :func:`stable_dt` the
update is a monotone map: ordered data stay ordered, the sup norm never
grows, and zero is preserved exactly outside the support.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import CFLViolationError, NumericalInstabilityError, ParameterDomainError
from .profiles import Params, sphere_measure

logger = logging.getLogger(__name__)

__all__ = [
    "RadialGrid",
    "RadialField",
    "SolverConfig",
    "Coefficients",
    "EvolveResult",
    "regularized_coefficients",
    "discrete_gradient_sup",
    "stable_dt",
    "step",
    "evolve",
]


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid ``r_i = i * dr`` on ``[0, r_max]``; node 0 is the symmetry axis."""

    r_max: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.r_max) and self.r_max > 0):
            raise ParameterDomainError(f"degenerate grid: r_max={self.r_max!r}")
        if int(self.n) != self.n or self.n < 3:
            raise ParameterDomainError(f"degenerate grid: n={self.n!r} (need n >= 3)")
        object.__setattr__(self, "n", int(self.n))

    @property
    def dr(self) -> float:
        return self.r_max / (self.n - 1)

    @property
    def r(self) -> np.ndarray:
        return np.arange(self.n) * self.dr

    @classmethod
    def from_spacing(cls, r_max: float, dr: float) -> "RadialGrid":
        """Grid with spacing ``dr`` whose extent is at least ``r_max``."""
        n = int(math.ceil(r_max / dr - 1e-9)) + 1
        return cls((n - 1) * dr, n)

    def metric_weights(self, N: int) -> tuple[np.ndarray, np.ndarray]:
        """Face weights ``((r_{i±1/2}/r_i)^{N-1})``; row 0 carries the ``2N`` axis limit."""
        i = np.arange(self.n, dtype=float)
        wp = np.empty(self.n)
        wm = np.empty(self.n)
        wp[0], wm[0] = 2.0 * N, 0.0
        wp[1:] = ((i[1:] + 0.5) / i[1:]) ** (N - 1)
        wm[1:] = ((i[1:] - 0.5) / i[1:]) ** (N - 1)
        return wp, wm

    def volume_weights(self, N: int) -> np.ndarray:
        """Cell volumes ``ω_N r_i^{N-1} dr`` (half cell at the axis).

        With these weights the discrete diffusion term telescopes, so the
        weighted sum of ``u`` changes only through the source. For ``N = 1``
        they coincide with the trapezoid rule on ``(-r_max, r_max)``.
        """
        dr = self.dr
        w = sphere_measure(N) * self.r ** (N - 1) * dr
        w[0] = sphere_measure(N) * (0.5 * dr) ** N / N
        return w


@dataclass(frozen=True)
class RadialField:
    """A radial state ``u(t, r_i)``; the last node is a homogeneous Dirichlet node."""

    grid: RadialGrid
    t: float
    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.shape != (self.grid.n,):
            raise ValueError(f"field has shape {u.shape}, grid has {self.grid.n} nodes")
        if not np.all(np.isfinite(u)):
            raise NumericalInstabilityError(f"non-finite field values at t={self.t!r}")
        if u[-1] != 0.0:
            raise ValueError("far-field node must be 0")
        u.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "t", float(self.t))

    @property
    def sup(self) -> float:
        return float(np.max(self.u))


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 0.0
    cfl_safety: float = 0.9
    pure_diffusion: bool = False
    # None: 1e-10 * ||u0||_inf, resolved by evolve()
    support_threshold: float | None = None
    # None: the measured ||∇u0||_inf
    lipschitz_bound: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ParameterDomainError(f"epsilon must lie in [0, 1), got {self.epsilon!r}")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ParameterDomainError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety!r}")
        if self.support_threshold is not None and not self.support_threshold >= 0:
            raise ParameterDomainError("support_threshold must be >= 0")
        if self.lipschitz_bound is not None and not self.lipschitz_bound > 0:
            raise ParameterDomainError("lipschitz_bound must be > 0")


class Coefficients(NamedTuple):
    a: np.ndarray | float
    b: np.ndarray | float


def regularized_coefficients(s2, epsilon: float, params: Params) -> Coefficients:
    """Flux modulus ``a_ε(s2)`` and source ``b_ε(s2)`` at squared gradient ``s2``."""
    s2 = np.asarray(s2, dtype=float)
    if np.any(s2 < 0):
        raise ParameterDomainError("squared gradient must be >= 0")
    e2 = epsilon * epsilon
    a = (s2 + e2) ** ((params.p - 2.0) / 2.0)
    b = (s2 + e2) ** (params.q / 2.0) - epsilon**params.q
    if s2.ndim == 0:
        return Coefficients(float(a), float(b))
    return Coefficients(a, b)


def discrete_gradient_sup(u: np.ndarray, dr: float) -> float:
    """Largest one-sided difference quotient."""
    return float(np.max(np.abs(np.diff(u)))) / dr if len(u) > 1 else 0.0


def _active_extent(u: np.ndarray) -> int:
    nz = np.flatnonzero(u)
    last = int(nz[-1]) if nz.size else -1
    return min(max(last + 2, 1), len(u) - 1)


def stable_dt(field: RadialField, config: SolverConfig, params: Params) -> float:
    """Largest step for which the explicit update is monotone.

    ``cfl_safety / (2N D(G)/dr² + q G (G²+ε²)^{(q-2)/2} / dr)`` where
    ``D(G) = ((p-1)G² + ε²)(G²+ε²)^{(p-4)/2}`` is the slope of the flux
    ``s ↦ a_ε(s²) s`` at the Lipschitz bound ``G`` (it is increasing in ``s``)
    and the second term is the Lipschitz constant of the source. May be
    ``inf`` for flat data under pure diffusion.
    """
    dr = field.grid.dr
    if not dr > 0:
        raise ParameterDomainError("degenerate grid: dr <= 0")
    G = config.lipschitz_bound
    if G is None:
        G = discrete_gradient_sup(field.u, dr)
    return kernels.stable_dt_value(
        float(G), dr, config.epsilon, params.p, params.q, params.N,
        config.cfl_safety, not config.pure_diffusion,
    )


class _Stepper:
    """Buffers and precomputed weights shared by the steps of one run."""

    def __init__(self, grid: RadialGrid, config: SolverConfig, params: Params, backend=None):
        self.grid, self.config, self.params = grid, config, params
        self.backend = backend or kernels.backend
        self.wp, self.wm = grid.metric_weights(params.N)
        self.wq = grid.volume_weights(params.N)
        self.work = np.zeros(grid.n)
        self.fmode = kernels.flux_mode(params.p)
        self.smode = kernels.source_mode(params.q)

    def advance(self, u, t, t_end, G, n_active, step_count):
        c, P = self.config, self.params
        self.work[:] = u
        return self.backend.advance(
            u, self.work, self.wp, self.wm, self.wq,
            float(t), float(t_end), self.grid.dr, c.epsilon, P.p, P.q, P.N,
            not c.pure_diffusion, c.cfl_safety, float(G), int(n_active), int(step_count),
            self.fmode, self.smode,
        )


def step(field: RadialField, dt: float, config: SolverConfig, params: Params) -> RadialField:
    """One explicit step of size ``dt``."""
    bound = stable_dt(field, config, params)
    if not 0 < dt <= bound * (1.0 + 1e-12):
        raise CFLViolationError(f"dt={dt!r} outside (0, {bound!r}]")
    G = config.lipschitz_bound
    if G is None:
        G = discrete_gradient_sup(field.u, field.grid.dr)
    stepper = _Stepper(field.grid, config, params)
    u = np.array(field.u)
    t_end = field.t + dt
    # the kernel may only take this one step: make its own bound no smaller than dt
    G_used = G if bound >= dt else G * (1.0 - 1e-12)
    _, _, _, steps, _, _, status = stepper.advance(
        u, field.t, t_end, G_used, _active_extent(u), 1
    )
    if status:
        raise NumericalInstabilityError(f"non-finite value in step from t={field.t!r}")
    if steps != 1:
        raise CFLViolationError(f"step of dt={dt!r} needed {steps} kernel steps")
    return RadialField(field.grid, t_end, u)


@dataclass
class EvolveResult:
    snapshots: list[RadialField]
    series: "TimeSeries"  # noqa: F821
    source_integral: np.ndarray  # cumulative Σ dt Σ w_i b_ε(m_i²) at each snapshot
    steps: int
    dt0: float
    config: SolverConfig
    warnings: list[str] = field(default_factory=list)


def evolve(
    u0: RadialField,
    T: float,
    config: SolverConfig,
    params: Params,
    snapshot_times,
    backend=None,
) -> EvolveResult:
    """Integrate to ``T`` and record a snapshot at each requested time.

    Steps are clipped to land exactly on snapshot times. The Lipschitz bound
    in the step restriction starts at ``||∇u0||_∞`` and is re-measured every
    100 steps; it is only lowered there (raised at once should a measurement
    exceed it).
    """
    from .diagnostics import TimeSeries, field_stats

    times = np.asarray(snapshot_times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("snapshot_times must be a non-empty 1-D sequence")
    if np.any(np.diff(times) <= 0):
        raise ValueError("snapshot_times must be strictly increasing")
    if times[0] < u0.t or times[-1] > T:
        raise ValueError(f"snapshot_times must lie in [{u0.t!r}, {T!r}]")

    sup0 = u0.sup
    if config.support_threshold is None:
        config = dataclasses.replace(config, support_threshold=1e-10 * sup0)
    grid = u0.grid
    dr = grid.dr
    G = config.lipschitz_bound
    if G is None:
        G = discrete_gradient_sup(u0.u, dr)
    dt0 = kernels.stable_dt_value(
        G, dr, config.epsilon, params.p, params.q, params.N, config.cfl_safety,
        not config.pure_diffusion,
    )

    stepper = _Stepper(grid, config, params, backend)
    u = np.array(u0.u)
    t = u0.t
    n_active = _active_extent(u)
    step_count = 0
    total_src = 0.0
    notes: list[str] = []
    snapshots, records, src_cum = [], [], []
    warned = False
    for ts in times:
        if ts > t:
            t_new, n_active, G, _, step_count, src, status = stepper.advance(
                u, t, ts, G, n_active, step_count
            )
            if status:
                raise NumericalInstabilityError(
                    f"non-finite value after {step_count} steps near t={t_new!r} "
                    f"(last finite state kept); G={G!r}, dr={dr!r}"
                )
            t = float(ts)
            total_src += src
        snap = RadialField(grid, t, u.copy())
        snapshots.append(snap)
        records.append(field_stats(snap, params, config))
        src_cum.append(total_src)
        if not warned and u[-2] > 0.0:
            msg = f"support reached the penultimate node by t={t!r}; enlarge r_max"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            notes.append(msg)
            warned = True
    logger.debug("evolve: %d steps to T=%g", step_count, t)
    if t < T:
        t_new, n_active, G, _, step_count, src, status = stepper.advance(
            u, t, T, G, n_active, step_count
        )
        if status:
            raise NumericalInstabilityError(f"non-finite value after {step_count} steps")
    return EvolveResult(
        snapshots=snapshots,
        series=TimeSeries.from_records(records),
        source_integral=np.array(src_cum),
        steps=step_count,
        dt0=dt0,
        config=config,
        warnings=notes,
    )
