import os
import subprocess
import sys
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvhj import kernels
from dvhj.errors import CFLViolationError, ParameterDomainError
from dvhj.initial import bump, make_initial_data
from dvhj.profiles import Params
from dvhj.solver import (
    RadialField,
    RadialGrid,
    SolverConfig,
    evolve,
    regularized_coefficients,
    stable_dt,
    step,
)


def field(u, dr=1.0, t=0.0):
    u = np.asarray(u, dtype=float)
    return RadialField(RadialGrid(dr * (len(u) - 1), len(u)), t, u)


def bump_field(dr, r_max=6.0, A=1.0, R0=1.0):
    g = RadialGrid.from_spacing(r_max, dr)
    u = bump(g.r, A, R0)
    u[-1] = 0.0
    return RadialField(g, 0.0, u)


def test_grid_and_weights():
    g = RadialGrid(2.0, 5)
    assert g.dr == 0.5
    np.testing.assert_array_equal(g.r, [0, 0.5, 1, 1.5, 2])
    assert RadialGrid.from_spacing(1.0, 0.1).n == 11
    wq = g.volume_weights(1)
    np.testing.assert_allclose(wq, [0.5, 1, 1, 1, 1])
    # a constant integrates to the volume of the ball of radius r_max + dr/2
    g3 = RadialGrid(1.0, 201)
    assert np.sum(g3.volume_weights(3)) == pytest.approx(4 / 3 * np.pi * 1.0025**3, rel=1e-4)
    with pytest.raises(ParameterDomainError):
        RadialGrid(0.0, 5)
    with pytest.raises(ParameterDomainError):
        RadialGrid(1.0, 2)


def test_field_validation():
    with pytest.raises(ValueError):
        field([1.0, 1.0, 1.0])
    f = field([1.0, 0.5, 0.0])
    with pytest.raises(ValueError):
        f.u[0] = 3.0


def test_regularized_coefficients(p3q2):
    a, b = regularized_coefficients(1.0, 0.1, p3q2)
    assert a == pytest.approx(1.004987, abs=1e-6)
    assert b == pytest.approx(1.0, abs=1e-14)
    assert regularized_coefficients(0.0, 0.3, p3q2).b == 0.0
    s2 = np.linspace(0, 5, 101)
    a, b = regularized_coefficients(s2, 0.2, Params(3.5, 1.7))
    assert np.all(np.diff(a) >= 0) and np.all(np.diff(b) >= 0) and np.all(b >= 0)
    a0, b0 = regularized_coefficients(s2, 0.0, Params(3.5, 1.7))
    np.testing.assert_allclose(a0, s2**0.75)
    np.testing.assert_allclose(b0, s2**0.85)


def test_stable_dt_examples(p3q2):
    cfg = SolverConfig(pure_diffusion=True, lipschitz_bound=1.0)
    f = field([1.0, 0.5, 0.0], dr=0.1)
    assert stable_dt(f, cfg, p3q2) == pytest.approx(0.9 * 0.01 / 4)
    f2 = field([1.0, 0.5, 0.0, 0.0, 0.0], dr=0.05)
    assert stable_dt(f2, cfg, p3q2) == pytest.approx(stable_dt(f, cfg, p3q2) / 4)
    flat = field([0.0, 0.0, 0.0])
    assert stable_dt(flat, SolverConfig(pure_diffusion=True), p3q2) == np.inf
    assert np.isfinite(stable_dt(flat, SolverConfig(), p3q2))


def test_hand_stencil(p3q2):
    f = field([0.0, 1.0, 0.0, 0.0])
    out = step(f, 0.1, SolverConfig(), p3q2)
    np.testing.assert_allclose(out.u, [0.3, 0.8, 0.2, 0.0], rtol=0, atol=1e-15)
    assert out.t == pytest.approx(0.1)


def test_cfl_violation(p3q2):
    f = field([0.0, 1.0, 0.0, 0.0])
    with pytest.raises(CFLViolationError):
        step(f, 0.2, SolverConfig(), p3q2)


def test_zero_and_constant_fields(p3q2):
    z = field(np.zeros(10), dr=0.1)
    assert np.all(step(z, 1e-3, SolverConfig(), p3q2).u == 0)
    c = np.full(20, 0.7)
    c[-1] = 0.0
    cf = field(c, dr=0.1)
    out = step(cf, 0.5 * stable_dt(cf, SolverConfig(), p3q2), SolverConfig(epsilon=0.1), p3q2)
    np.testing.assert_array_equal(out.u[:-2], c[:-2])


@pytest.mark.filterwarnings("ignore:support reached")
def test_flat_field_stays_below_level(p3q2):
    c = np.full(101, 0.5)
    c[-1] = 0.0
    res = evolve(field(c, dr=0.05), 2.0, SolverConfig(), p3q2, [0.0, 1.0, 2.0])
    for s in res.snapshots:
        assert s.sup <= 0.5
    assert res.snapshots[-1].u[0] == 0.5


@pytest.mark.filterwarnings("ignore:support reached")
@settings(max_examples=15, deadline=None)
@given(
    A=st.floats(0.1, 2.0),
    R0=st.floats(0.3, 1.5),
    p=st.sampled_from([2.5, 3.0, 4.0]),
    q=st.floats(1.2, 2.4),
    eps=st.sampled_from([0.0, 0.05]),
)
def test_max_principle_and_sup_monotone(A, R0, p, q, eps):
    P = Params(p, min(q, p - 0.1))
    u0 = bump_field(0.05, r_max=5.0, A=A, R0=R0)
    res = evolve(u0, 1.0, SolverConfig(epsilon=eps), P, np.linspace(0, 1, 6))
    sups = res.series.sup_norm
    assert sups[0] == u0.sup
    assert np.all(np.diff(sups) <= 1e-12)
    for s in res.snapshots:
        assert np.min(s.u) >= 0.0
    assert np.all(np.diff(res.series.grad_sup) <= 1e-10 * max(1.0, res.series.grad_sup[0]))


def test_comparison(p3q2):
    lo = bump_field(0.02, A=0.8, R0=1.0)
    hi = bump_field(0.02, A=1.0, R0=1.3)
    assert np.all(lo.u <= hi.u)
    cfg = SolverConfig(lipschitz_bound=max(
        np.max(np.abs(np.diff(lo.u))), np.max(np.abs(np.diff(hi.u)))) / 0.02)
    ts = [0.0, 0.5, 2.0]
    a = evolve(lo, 2.0, cfg, p3q2, ts)
    b = evolve(hi, 2.0, cfg, p3q2, ts)
    for x, y in zip(a.snapshots, b.snapshots):
        assert np.all(x.u <= y.u)


def test_snapshot_times_exact(p3q2):
    ts = [0.0, 0.1, 0.37, 1.0]
    res = evolve(bump_field(0.05), 1.0, SolverConfig(), p3q2, ts)
    assert [s.t for s in res.snapshots] == ts
    np.testing.assert_array_equal(res.series.t, ts)
    with pytest.raises(ValueError):
        evolve(bump_field(0.05), 1.0, SolverConfig(), p3q2, [0.5, 0.2])


def test_mass_balance(p3q2):
    res = evolve(bump_field(0.01), 5.0, SolverConfig(), p3q2, [0.0, 1.0, 5.0])
    dl1 = res.series.l1_norm - res.series.l1_norm[0]
    np.testing.assert_allclose(dl1, res.source_integral, rtol=1e-10, atol=1e-13)
    assert res.source_integral[-1] > 0.1


def test_pure_diffusion_conserves_mass(p3q2):
    res = evolve(bump_field(0.01), 3.0, SolverConfig(pure_diffusion=True), p3q2, [0.0, 3.0])
    assert res.series.l1_norm[-1] == pytest.approx(res.series.l1_norm[0], rel=1e-12)
    assert np.all(res.source_integral == 0)


def test_grid_convergence_first_order(p3q2):
    sups = []
    for dr in (0.04, 0.02, 0.01):
        res = evolve(bump_field(dr), 2.0, SolverConfig(), p3q2, [0.0, 2.0])
        sups.append(res.series.sup_norm[-1])
    d1, d2 = abs(sups[0] - sups[1]), abs(sups[1] - sups[2])
    assert d2 < 0.7 * d1


def test_domain_too_small_warning(p3q2):
    u0 = bump_field(0.05, r_max=1.5)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        res = evolve(u0, 3.0, SolverConfig(), p3q2, [0.0, 3.0])
    assert any("penultimate" in str(x.message) for x in w)
    assert res.warnings


def _both(P, cfg, dr=0.02, T=2.0):
    out = {}
    for name, mod in kernels.available_backends().items():
        out[name] = evolve(bump_field(dr), T, cfg, P, [0.0, 0.5, T], backend=mod)
    return out


@pytest.mark.filterwarnings("ignore:support reached")
@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
@pytest.mark.parametrize("p,q,eps", [(3.0, 2.0, 0.0), (3.0, 2.0, 0.1), (4.0, 2.0, 0.0)])
def test_backends_bitwise(p, q, eps):
    r = _both(Params(p, q), SolverConfig(epsilon=eps))
    a, b = r["python"], r["cython"]
    assert a.steps == b.steps
    for x, y in zip(a.snapshots, b.snapshots):
        np.testing.assert_array_equal(x.u, y.u)


@pytest.mark.filterwarnings("ignore:support reached")
@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
@pytest.mark.parametrize("p,q,eps", [(2.5, 1.7, 0.0), (3.5, 2.2, 0.05)])
def test_backends_agree_generic_exponents(p, q, eps):
    r = _both(Params(p, q), SolverConfig(epsilon=eps))
    a, b = r["python"], r["cython"]
    assert a.steps == b.steps
    for x, y in zip(a.snapshots, b.snapshots):
        np.testing.assert_allclose(x.u, y.u, rtol=0, atol=1e-13)


def test_backend_nonfinite_status():
    mod = kernels.available_backends()["python"]
    u = np.array([1.0, np.inf, 0.5, 0.0, 0.0])
    g = RadialGrid(0.4, 5)
    wp, wm = g.metric_weights(1)
    out = mod.advance(u, u.copy(), wp, wm, g.volume_weights(1), 0.0, 1e-3, g.dr, 0.0,
                      3.0, 2.0, 1, True, 0.9, 10.0, 4, 0, 1, 1)
    assert out[-1] == 1


def test_pure_python_env_switch():
    code = "from dvhj import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, DVHJ_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


def test_initial_data_kinds(p3q2, tmp_path):
    g = RadialGrid.from_spacing(6.0, 0.01)
    b = make_initial_data("bump", g, p3q2, 2.0, 1.0)
    assert b.field.sup == 2.0 and b.w2inf and b.R0 == 1.0
    t = make_initial_data("tent", g, p3q2, 1.0, 0.5)
    assert not t.w2inf
    bb = make_initial_data("barenblatt", g, p3q2, 1.0, t0=1.0)
    assert bb.R0 == pytest.approx(2.5148668593658705)
    csv = tmp_path / "u0.csv"
    csv.write_text("r,u\n0,1\n1,0.5\n2,0\n")
    c = make_initial_data("custom-csv", g, p3q2, csv_path=csv)
    assert c.field.u[100] == pytest.approx(0.5)
    assert c.R0 == pytest.approx(1.99)
    with pytest.raises(ParameterDomainError):
        make_initial_data("bump", g, p3q2, 1.0, 10.0)
