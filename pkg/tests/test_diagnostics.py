import math

import numpy as np
import pytest

from dvhj.diagnostics import (
    SERIES_HEADER,
    InitialDataInfo,
    TimeSeries,
    Verdict,
    classify_regime,
    discrete_plap,
    field_stats,
    loglog_slope,
    run_checks,
)
from dvhj.errors import ParameterDomainError
from dvhj.initial import bump
from dvhj.profiles import Params, eval_barenblatt, eval_h_infty
from dvhj.solver import RadialField, RadialGrid, SolverConfig, evolve
from dvhj.cli import wave_offset


def grid_field(r_max, n, fun, t=0.0):
    g = RadialGrid(r_max, n)
    u = fun(g.r)
    u[-1] = 0.0
    return RadialField(g, t, u)


def info_for(u0, dt0=1e-3, **kw):
    base = dict(kind="bump", R0=1.0, sup0=u0.sup, grad0=1.0, min_plap0=-1.0, w2inf=True,
                dt0=dt0, r_max=u0.grid.r_max, dr=u0.grid.dr, mu=-3.4)
    base.update(kw)
    return InitialDataInfo(**base)


def test_series_csv_round_trip():
    rng = np.random.default_rng(7)
    cols = rng.random((6, 5))
    cols[0] = np.cumsum(cols[0])
    s = TimeSeries(*cols)
    text = s.to_csv_text()
    assert text.splitlines()[0] == ",".join(SERIES_HEADER)
    back = TimeSeries.from_csv_text(text)
    for k in SERIES_HEADER:
        np.testing.assert_array_equal(getattr(back, k), getattr(s, k))
    with pytest.raises(ValueError):
        TimeSeries.from_csv_text("a,b\n1,2\n")


def test_verdict_line():
    assert Verdict("CHK-X", "PASS", 0.5, 1.0, 0.5).line() == "CHK-X PASS 0.5 1 0.5"
    assert Verdict("CHK-Y", "SKIPPED", note="why").line() == "CHK-Y SKIPPED - - -  # why"


def test_field_stats_h_infty(p3q2):
    cfg = SolverConfig()
    for n, tol in ((401, 0.02), (4001, 0.002)):
        f = grid_field(4.0, n, lambda r: eval_h_infty(1.0, r, 1.0, p3q2))
        st = field_stats(f, p3q2, cfg)
        assert st.sup_norm == 1.0
        assert abs(st.support_radius - 2.0) <= tol


def test_field_stats_barenblatt_mass(p3q2):
    f = grid_field(4.0, 4001, lambda r: eval_barenblatt(1.0, r, 1.0, p3q2))
    st = field_stats(f, p3q2, SolverConfig())
    assert st.l1_norm == pytest.approx(1.0, rel=1e-4)


def test_flat_field_plap(p3q2):
    u = np.full(50, 0.3)
    plap = discrete_plap(u, 0.1, 0.0, p3q2)
    assert np.all(plap[:-1] == 0)
    g = np.abs(np.diff(u[:-1]))
    assert np.max(g) == 0


def test_plap_matches_closed_form():
    # Δ_p of r^2 in R^N with p=3: (r^{-(N-1)} (r^{N-1} |2r| 2r))' = 4(N+1) r
    for N in (1, 2, 3):
        P = Params(3.0, 2.0, N)
        dr = 1e-3
        r = np.arange(2001) * dr
        plap = discrete_plap(r**2, dr, 0.0, P)
        sel = slice(100, 1900)
        np.testing.assert_allclose(plap[sel], 4 * (N + 1) * r[sel], rtol=1e-3)


def test_regime_examples():
    g = grid_field(6.0, 601, lambda r: bump(r, 1.0, 1.0))
    assert classify_regime(g, Params(3, 2)).regime == "A1"
    assert classify_regime(g, Params(3, 2.3)).regime == "A2"
    rb = classify_regime(g, Params(3, 2.75))
    assert rb.regime == "B" and math.isfinite(rb.threshold_ratio) and rb.threshold_ratio > 0
    with pytest.raises(ParameterDomainError):
        classify_regime(g, Params(3, 3.2))


def test_semiconv12_constant_is_one_for_p3_q2(p3q2):
    u0 = grid_field(4.0, 401, lambda r: bump(r, 1.0, 1.0))
    t = np.array([0.0, 1.0, 2.0, 4.0])
    # min_plap exactly on the bound -1.25 G0/t with G0 = 2
    mp = np.array([-1.0, -2.5, -1.25, -0.625])
    s = TimeSeries(t, np.ones(4), np.full(4, 2.0), np.ones(4), mp, np.ones(4))
    info = info_for(u0, grad0=2.0)
    v = {x.name: x for x in run_checks(s, [u0], p3q2, SolverConfig(), info)}
    assert v["CHK-SEMICONV-12"].status == "PASS"
    assert v["CHK-SEMICONV-12"].measured == pytest.approx(-1.25)
    mp2 = mp.copy()
    mp2[2] = -1.3
    s2 = TimeSeries(t, np.ones(4), np.full(4, 2.0), np.ones(4), mp2, np.ones(4))
    v2 = {x.name: x for x in run_checks(s2, [u0], p3q2, SolverConfig(), info)}
    assert v2["CHK-SEMICONV-12"].status == "FAIL"


def test_maxp_names_the_offending_snapshot(p3q2):
    u0 = grid_field(4.0, 401, lambda r: bump(r, 1.0, 1.0))
    t = np.array([0.0, 1.0, 2.0, 3.0])
    sup = np.array([1.0, 0.9, 0.95, 0.8])
    s = TimeSeries(t, sup, np.ones(4), np.ones(4), -np.ones(4), np.ones(4))
    v = {x.name: x for x in run_checks(s, [u0], p3q2, SolverConfig(), info_for(u0))}
    assert v["CHK-MAXP"].status == "FAIL"
    assert "t=2.0" in v["CHK-MAXP"].note


def test_skips_carry_reasons(p3q2):
    u0 = grid_field(4.0, 401, lambda r: bump(r, 1.0, 1.0))
    s = TimeSeries([0.0], [1.0], [1.0], [1.0], [-1.0], [1.0])
    out = run_checks(s, [u0], p3q2, SolverConfig(pure_diffusion=True), info_for(u0, mu=None))
    for v in out:
        assert v.status in ("PASS", "FAIL", "SKIPPED")
        if v.status == "SKIPPED":
            assert v.note


def test_loglog_slope():
    t = np.geomspace(1, 100, 10)
    assert loglog_slope(t, 3 * t**-0.5) == pytest.approx(-0.5)


def _bump_run(params, dr, T, n_snap=30, r_max=None, A=1.0):
    r_max = r_max or T + 10.0
    g = RadialGrid.from_spacing(r_max, dr)
    u = bump(g.r, A, 1.0)
    u[-1] = 0.0
    u0 = RadialField(g, 0.0, u)
    times = np.concatenate([[0.0], np.geomspace(0.1, T, n_snap)])
    res = evolve(u0, T, SolverConfig(), params, times)
    plap0 = discrete_plap(u, g.dr, 0.0, params)
    info = InitialDataInfo("bump", 1.0, u0.sup, float(res.series.grad_sup[0]),
                           float(np.min(plap0)), True, res.dt0, g.r_max, g.dr,
                           wave_offset(params, 1.0, u0.sup))
    return res, info


def test_short_bump_run_all_checks_pass(p3q2):
    res, info = _bump_run(p3q2, 0.02, 20.0)
    out = run_checks(res.series, res.snapshots, p3q2, res.config, info, res.source_integral)
    failed = [v.line() for v in out if v.status == "FAIL"]
    assert not failed
    again = run_checks(res.series, res.snapshots, p3q2, res.config, info, res.source_integral)
    assert [v.line() for v in again] == [v.line() for v in out]


@pytest.mark.slow
def test_flagship_regression_T200(p3q2):
    res, info = _bump_run(p3q2, 0.005, 200.0, n_snap=40)
    out = run_checks(res.series, res.snapshots, p3q2, res.config, info, res.source_integral)
    failed = [v.line() for v in out if v.status == "FAIL"]
    assert not failed
