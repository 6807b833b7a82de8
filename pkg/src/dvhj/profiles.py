"""Closed-form profiles: exponents, the non-diffusive limit profile, the
Barenblatt source solution of the p-Laplacian equation, and the travelling
wave used to bound the support.

All evaluators take the radius ``r = |x|``; arrays are accepted wherever a
scalar radius is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import ParameterDomainError, QuadratureError, TabulationRangeError

__all__ = [
    "Params",
    "DerivedConstants",
    "derived_constants",
    "sphere_measure",
    "eval_h_infty",
    "eval_h_s",
    "h_s_support_radius",
    "barenblatt_constants",
    "eval_barenblatt",
    "TravelingWave",
    "traveling_wave",
    "wave_offset_mu",
]


@dataclass(frozen=True)
class Params:
    """Exponents of ``u_t = Δ_p u + |∇u|^q`` and the space dimension."""

    p: float
    q: float
    N: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 2.0):
            raise ParameterDomainError(f"p must be > 2, got {self.p!r}")
        if not (math.isfinite(self.q) and self.q > 1.0):
            raise ParameterDomainError(f"q must be > 1, got {self.q!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ParameterDomainError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "N", int(self.N))

    def require_subcritical(self) -> "Params":
        """Reject ``q >= p``, outside the range of the large-time theory."""
        if not self.q < self.p:
            raise ParameterDomainError(
                f"q must satisfy 1 < q < p, got q={self.q!r}, p={self.p!r}"
            )
        return self


@dataclass(frozen=True)
class DerivedConstants:
    gamma_q: float
    q_star: float
    alpha: float
    beta: float
    h_infty_support_coeff: float


def derived_constants(params: Params) -> DerivedConstants:
    p, q, N = params.p, params.q, params.N
    gamma_q = (q - 1.0) * q ** (-q / (q - 1.0))
    denom = N * (p - 2.0) + p
    return DerivedConstants(
        gamma_q=gamma_q,
        q_star=p - N / (N + 1.0),
        alpha=N / denom,
        beta=1.0 / denom,
        h_infty_support_coeff=(1.0 / gamma_q) ** ((q - 1.0) / q),
    )


def sphere_measure(N: int) -> float:
    """Surface measure of the unit sphere in R^N (2 for N = 1)."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def eval_h_infty(t, r, M, params: Params):
    """``(M - γ_q (r / t^{1/q})^{q/(q-1)})_+``."""
    if not t > 0:
        raise ParameterDomainError(f"t must be > 0, got {t!r}")
    if M < 0:
        raise ParameterDomainError(f"M must be >= 0, got {M!r}")
    q = params.q
    gamma_q = derived_constants(params).gamma_q
    y = np.abs(np.asarray(r, dtype=float)) / t ** (1.0 / q)
    out = np.maximum(M - gamma_q * y ** (q / (q - 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def eval_h_s(r, M, params: Params):
    """Steady state of the rescaled Hamilton-Jacobi flow; equals ``eval_h_infty(1, r, M)``."""
    return eval_h_infty(1.0, r, M, params)


def h_s_support_radius(M: float, params: Params) -> float:
    """Radius beyond which ``h_s(·; M)`` vanishes."""
    q = params.q
    return (M / derived_constants(params).gamma_q) ** ((q - 1.0) / q)


# --- Barenblatt -------------------------------------------------------------


def barenblatt_constants(L: float, params: Params) -> tuple[float, float, float]:
    """Return ``(A, k, r0)`` of the profile ``(A - k r^{p/(p-1)})_+^{(p-1)/(p-2)}``.

    ``k`` makes the profile a self-similar solution of ``φ_t = Δ_p φ``; ``A``
    fixes the mass to ``L``; ``r0`` is the support radius at ``t = 1``.
    """
    if not L > 0:
        raise ParameterDomainError(f"mass L must be > 0, got {L!r}")
    p, N = params.p, params.N
    dc = derived_constants(params)
    k = (p - 2.0) / p * dc.beta ** (1.0 / (p - 1.0))
    m = (p - 1.0) / (p - 2.0)
    s = N * (p - 1.0) / p
    # mass = K * A^(m + s), from the substitution r = r0 * x^((p-1)/p)
    K = sphere_measure(N) * (p - 1.0) / p * special.beta(s, m + 1.0) * k ** (-s)
    A = (L / K) ** (1.0 / (m + s))
    r0 = (A / k) ** ((p - 1.0) / p)
    return A, k, r0


def eval_barenblatt(t, r, L, params: Params):
    """Barenblatt solution with mass ``L`` at time ``t``."""
    if not t > 0:
        raise ParameterDomainError(f"t must be > 0, got {t!r}")
    p = params.p
    dc = derived_constants(params)
    A, k, _ = barenblatt_constants(L, params)
    xi = np.abs(np.asarray(r, dtype=float)) * t ** (-dc.beta)
    core = np.maximum(A - k * xi ** (p / (p - 1.0)), 0.0)
    out = t ** (-dc.alpha) * core ** ((p - 1.0) / (p - 2.0))
    return float(out) if out.ndim == 0 else out


# --- Travelling wave --------------------------------------------------------
#
# f solves (p-1) ∫_0^f z^{p-3} / (1 - z^{q-1}) dz = (-y)_+ .  Two variables
# keep the integrands bounded:
#   f <= 1/2 : rho = f^{p-2}      (removes the z^{p-3} endpoint singularity)
#   f >  1/2 : sigma = log(1 - f) (turns the 1/(1-z) pole into a bounded integrand)


class _WaveIntegrals:
    def __init__(self, params: Params, tol: float):
        p, q = params.p, params.q
        self.p, self.q, self.tol = p, q, tol
        self.c = (p - 1.0) / (p - 2.0)
        self.kappa = (q - 1.0) / (p - 2.0)
        self.rho_half = 0.5 ** (p - 2.0)
        self.sigma_half = math.log(0.5)
        self.phi_half = self.phi_low(0.0, 0.0, self.rho_half)
        self.F_half = self.F_low(0.0, 0.0, self.rho_half)

    def _quad(self, fun, a, b):
        if a == b:
            return 0.0
        val, err = integrate.quad(fun, a, b, epsabs=1e-3 * self.tol, epsrel=1e-13, limit=200)
        if not err <= max(1e-2 * self.tol, 1e-12 * abs(val)):
            raise QuadratureError(
                f"quadrature on [{a!r}, {b!r}] reached error {err:.3e}, tol {self.tol:.1e}"
            )
        return val

    # low branch, variable rho
    def dphi_low(self, rho):
        return self.c / (1.0 - rho**self.kappa)

    def phi_low(self, rho_a, phi_a, rho):
        return phi_a + self.c * self._quad(lambda s: 1.0 / (1.0 - s**self.kappa), rho_a, rho)

    def F_low(self, rho_a, F_a, rho):
        e = 1.0 / (self.p - 2.0)
        return F_a + self.c * self._quad(lambda s: s**e / (1.0 - s**self.kappa), rho_a, rho)

    # high branch, variable sigma
    def psi(self, sigma):
        s = math.exp(sigma)
        return s * (1.0 - s) ** (self.p - 3.0) / -math.expm1((self.q - 1.0) * math.log1p(-s))

    def dphi_high(self, sigma):
        return -(self.p - 1.0) * self.psi(sigma)

    def phi_high(self, sig_a, phi_a, sigma):
        return phi_a + (self.p - 1.0) * self._quad(self.psi, sigma, sig_a)

    def F_high(self, sig_a, F_a, sigma):
        def g(s):
            return -math.expm1(s) * self.psi(s)

        return F_a + (self.p - 1.0) * self._quad(g, sigma, sig_a)


def _newton_bracketed(fun, dfun, lo, hi, x0, ftol, maxiter=100):
    """Root of an increasing ``fun`` on ``[lo, hi]``; Newton steps, bisection fallback."""
    x = min(max(x0, lo), hi)
    for _ in range(maxiter):
        fx = fun(x)
        if abs(fx) <= ftol:
            return x, fx
        if fx > 0:
            hi = x
        else:
            lo = x
        d = dfun(x)
        x_new = x - fx / d if d > 0 else 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if x_new == x or hi - lo <= 4 * np.finfo(float).eps * max(abs(lo), abs(hi), 1.0):
            return x_new, fun(x_new)
        x = x_new
    return x, fun(x)


@dataclass(frozen=True)
class _WaveNode:
    target: float  # (-y)
    high: bool
    var: float  # rho or sigma
    phi: float
    F: float
    f: float


class _WaveSolver:
    def __init__(self, params: Params, tol: float):
        self.I = _WaveIntegrals(params, tol)
        self.tol = tol
        self.origin = _WaveNode(0.0, False, 0.0, 0.0, 0.0, 0.0)
        self.half = _WaveNode(self.I.phi_half, True, self.I.sigma_half, self.I.phi_half, self.I.F_half, 0.5)

    def solve(self, target: float, anchor: _WaveNode) -> _WaveNode:
        """Solve at ``-y = target`` starting from a node with ``anchor.target <= target``."""
        I, p = self.I, self.I.p
        ftol = 0.5 * self.tol
        if target <= I.phi_half:
            if anchor.high:
                anchor = self.origin
            rho_a, phi_a = anchor.var, anchor.phi
            x0 = rho_a + (target - phi_a) / I.dphi_low(rho_a)
            rho, _ = _newton_bracketed(
                lambda r: I.phi_low(rho_a, phi_a, r) - target,
                I.dphi_low,
                rho_a,
                I.rho_half,
                x0,
                ftol,
            )
            phi = I.phi_low(rho_a, phi_a, rho)
            F = I.F_low(rho_a, anchor.F, rho)
            f = rho ** (1.0 / (p - 2.0))
            node = _WaveNode(target, False, rho, phi, F, f)
        else:
            if not anchor.high:
                anchor = self.half
            sig_a, phi_a = anchor.var, anchor.phi
            slope = -I.dphi_high(sig_a)
            lo = sig_a - 2.0 * (target - phi_a) / slope - 1.0
            while I.phi_high(sig_a, phi_a, lo) < target:
                lo = sig_a - 2.0 * (sig_a - lo)
            # increasing in -sigma
            s, _ = _newton_bracketed(
                lambda m: I.phi_high(sig_a, phi_a, -m) - target,
                lambda m: -I.dphi_high(-m),
                -sig_a,
                -lo,
                -(sig_a - (target - phi_a) / slope),
                ftol,
            )
            sigma = -s
            phi = I.phi_high(sig_a, phi_a, sigma)
            F = I.F_high(sig_a, anchor.F, sigma)
            node = _WaveNode(target, True, sigma, phi, F, -math.expm1(sigma))
        if not abs(node.phi - target) <= self.tol:
            raise QuadratureError(
                f"wave residual {abs(node.phi - target):.3e} exceeds tol {self.tol:.1e} at y={-target!r}"
            )
        return node


@dataclass(frozen=True)
class TravelingWave:
    """Tabulated wave profile ``f`` and its tail integral ``F`` on ``[y_min, 0]``.

    ``y_nodes`` is increasing and ends at 0. Both functions vanish for ``y > 0``.
    ``gap_values`` holds ``1 - f`` without the cancellation of forming it from
    ``f_values`` (f is within 1e-16 of 1 far behind the front).
    """

    params: Params
    y_nodes: np.ndarray
    f_values: np.ndarray
    F_values: np.ndarray
    gap_values: np.ndarray
    tol: float = 1e-10
    _nodes: tuple = field(default=(), repr=False, compare=False)
    _solver: object = field(default=None, repr=False, compare=False)

    @property
    def y_min(self) -> float:
        return float(self.y_nodes[0])

    def _node_at(self, y: float) -> _WaveNode:
        target = -y
        # nodes are stored by increasing target (decreasing y)
        targets = [n.target for n in self._nodes]
        j = int(np.searchsorted(targets, target, side="right")) - 1
        anchor = self._nodes[max(j, 0)]
        return self._solver.solve(target, anchor)

    def f(self, y: float) -> float:
        """Wave profile at an arbitrary ``y`` (solved, not interpolated)."""
        if y >= 0:
            return 0.0
        return self._node_at(y).f

    def F(self, y: float) -> float:
        """``∫_y^∞ f``; solved at arbitrary ``y``."""
        if y >= 0:
            return 0.0
        return self._node_at(y).F

    def residuals(self) -> np.ndarray:
        """``|(p-1)∫_0^{f} z^{p-3}/(1-z^{q-1}) dz - (-y)|`` at every node, re-evaluated."""
        I = _WaveIntegrals(self.params, self.tol)
        out = np.empty(len(self.y_nodes))
        for i, (y, f, gap) in enumerate(zip(self.y_nodes, self.f_values, self.gap_values)):
            if f <= 0.5:
                phi = I.phi_low(0.0, 0.0, f ** (self.params.p - 2.0))
            else:
                phi = I.phi_high(I.sigma_half, I.phi_half, math.log(gap))
            out[i] = abs(phi - (-y))
        return out


def _wave_grid(y_min: float, n_nodes: int, refine: float = 3.0) -> np.ndarray:
    x = np.linspace(0.0, 1.0, n_nodes)
    g = np.expm1(refine * x) / math.expm1(refine)
    y = y_min * g[::-1]
    y[-1] = 0.0
    y[0] = y_min
    return y


def traveling_wave(params: Params, y_min: float, n_nodes: int = 2001, tol: float = 1e-10) -> TravelingWave:
    """Tabulate the travelling wave on ``[y_min, 0]`` (nodes refined toward 0)."""
    params.require_subcritical()
    if not y_min < 0:
        raise ParameterDomainError(f"y_min must be < 0, got {y_min!r}")
    if n_nodes < 2:
        raise ParameterDomainError("n_nodes must be >= 2")
    solver = _WaveSolver(params, tol)
    y_nodes = _wave_grid(y_min, n_nodes)
    nodes = [solver.origin]
    for y in y_nodes[-2::-1]:
        nodes.append(solver.solve(-y, nodes[-1]))
    nodes_inc_y = nodes[::-1]
    f_values = np.array([n.f for n in nodes_inc_y])
    F_values = np.array([n.F for n in nodes_inc_y])
    gap_values = np.array([math.exp(n.var) if n.high else 1.0 - n.f for n in nodes_inc_y])
    return TravelingWave(
        params=params,
        y_nodes=y_nodes,
        f_values=f_values,
        F_values=F_values,
        gap_values=gap_values,
        tol=tol,
        _nodes=tuple(nodes),
        _solver=solver,
    )


def wave_offset_mu(tw: TravelingWave, R0: float, M: float) -> float:
    """The ``μ < 0`` with ``F(R0 + μ) = M``; the support then stays within ``max(R0, t - μ)``."""
    if not R0 > 0:
        raise ParameterDomainError(f"R0 must be > 0, got {R0!r}")
    if not M > 0:
        raise ParameterDomainError(f"M must be > 0, got {M!r}")
    F_tab = tw.F_values
    if M > F_tab[0]:
        raise TabulationRangeError(
            f"M={M!r} exceeds F(y_min)={float(F_tab[0])!r}; extend the tabulation below y_min={tw.y_min!r}"
        )
    # F_tab is decreasing along increasing y
    j = int(np.searchsorted(-F_tab, -M, side="left"))
    hi = float(tw.y_nodes[min(j, len(F_tab) - 1)])
    lo = float(tw.y_nodes[max(j - 1, 0)])
    if lo == hi:
        s = lo
    else:
        lo_val, hi_val = F_tab[max(j - 1, 0)] - M, F_tab[min(j, len(F_tab) - 1)] - M
        if lo_val == 0:
            s = lo
        elif hi_val == 0:
            s = hi
        else:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid in (lo, hi):
                    break
                if tw.F(mid) > M:
                    lo = mid
                else:
                    hi = mid
            s = 0.5 * (lo + hi)
    return s - R0
