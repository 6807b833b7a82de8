"""Command-line front end: run experiments, dump profiles, re-verify outputs.

Exit codes: 0 all checks passed, 1 verify found a different report,
2 configuration error, 3 parameter-domain error, 4 numerical failure,
5 run completed but at least one check failed.
"""

from __future__ import annotations

import argparse
import configparser
import glob
import json
import logging
import math
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    InitialDataInfo,
    TimeSeries,
    classify_regime,
    discrete_plap,
    format_verdicts,
    run_checks,
)
from .errors import (
    ConfigError,
    NumericalInstabilityError,
    ParameterDomainError,
    QuadratureError,
    TabulationRangeError,
)
from .initial import KINDS, make_initial_data, read_profile_csv
from .profiles import (
    Params,
    eval_barenblatt,
    eval_h_infty,
    eval_h_s,
    traveling_wave,
    wave_offset_mu,
)
from .rescaler import convergence_report
from .solver import RadialField, RadialGrid, SolverConfig, evolve

log = logging.getLogger("dvhj")

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_DOMAIN, EXIT_NUMERICAL, EXIT_CHECKS = 0, 1, 2, 3, 4, 5

# key -> (type, default); a default of ... marks a required key
_KEYS = {
    "params.p": (float, ...),
    "params.q": (float, ...),
    "params.N": (int, 1),
    "grid.r_max": (float, ...),
    "grid.n": (int, None),
    "grid.dr": (float, None),
    "solver.epsilon": (float, 0.0),
    "solver.cfl_safety": (float, 0.9),
    "solver.pure_diffusion": (bool, False),
    "solver.support_threshold": (float, None),
    "solver.lipschitz_bound": (float, None),
    "ic.kind": (str, "bump"),
    "ic.amplitude": (float, 1.0),
    "ic.radius": (float, 1.0),
    "ic.csv_path": (str, None),
    "ic.t0": (float, 1.0),
    "schedule.T": (float, ...),
    "schedule.snapshots": (int, 20),
    "schedule.spacing": (str, "geometric"),
    "schedule.t_first": (float, None),
    "schedule.times": (str, None),
    "output.dir": (str, ...),
    "analysis.tail_fraction": (float, 0.5),
}


@dataclass
class ICSpec:
    kind: str
    amplitude: float
    radius: float
    csv_path: str | None
    t0: float


@dataclass
class ExperimentConfig:
    params: Params
    r_max: float
    n: int
    solver: SolverConfig
    ic: ICSpec
    T: float
    times: list[float]
    output_dir: Path
    tail_fraction: float = 0.5
    source_text: str = field(default="", repr=False)

    @property
    def grid(self) -> RadialGrid:
        return RadialGrid(self.r_max, self.n)


def _convert(key, typ, raw):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            x = float(raw)
            if x != int(x):
                raise ValueError(raw)
            return int(x)
        return typ(raw.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None


def _schedule(T, count, spacing, t_first, explicit):
    if explicit is not None:
        try:
            ts = sorted({float(x) for x in explicit.replace(",", " ").split()})
        except ValueError:
            raise ConfigError(f"schedule.times: cannot parse {explicit!r}") from None
    else:
        if count < 1:
            raise ParameterDomainError("schedule.snapshots must be >= 1")
        if spacing == "linear":
            ts = list(np.linspace(0.0, T, count + 1)[1:])
        elif spacing == "geometric":
            t1 = t_first if t_first is not None else 1e-3 * T
            if not 0 < t1 <= T:
                raise ParameterDomainError("schedule.t_first must lie in (0, T]")
            ts = list(np.geomspace(t1, T, count)) if count > 1 else [T]
        else:
            raise ConfigError(f"schedule.spacing must be geometric or linear, got {spacing!r}")
    ts = [float(t) for t in ts]
    if any(t < 0 or t > T for t in ts):
        raise ParameterDomainError("snapshot times must lie in [0, T]")
    ts[-1:] = [T] if ts and abs(ts[-1] - T) <= 1e-12 * T else ts[-1:]
    if not ts or ts[-1] != T:
        ts.append(T)
    if ts[0] != 0.0:
        ts.insert(0, 0.0)
    return ts


def parse_config(path) -> ExperimentConfig:
    """Read a flat ``section.key = value`` file (``#`` starts a comment)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cp = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None,
    )
    cp.optionxform = str
    try:
        cp.read_string("[cfg]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw = dict(cp["cfg"])
    unknown = sorted(set(raw) - set(_KEYS))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
    v = {}
    for key, (typ, default) in _KEYS.items():
        if key in raw:
            v[key] = _convert(key, typ, raw[key])
        elif default is ...:
            raise ConfigError(f"{path}: missing required key {key}")
        else:
            v[key] = default

    params = Params(v["params.p"], v["params.q"], v["params.N"])
    if not v["solver.pure_diffusion"]:
        params.require_subcritical()
    r_max = v["grid.r_max"]
    if not (math.isfinite(r_max) and r_max > 0):
        raise ParameterDomainError("grid.r_max must be > 0")
    if (v["grid.n"] is None) == (v["grid.dr"] is None):
        raise ConfigError(f"{path}: give exactly one of grid.n and grid.dr")
    if v["grid.dr"] is not None:
        if not v["grid.dr"] > 0:
            raise ParameterDomainError("grid.dr must be > 0")
        grid = RadialGrid.from_spacing(r_max, v["grid.dr"])
    else:
        grid = RadialGrid(r_max, v["grid.n"])
    solver = SolverConfig(
        epsilon=v["solver.epsilon"],
        cfl_safety=v["solver.cfl_safety"],
        pure_diffusion=v["solver.pure_diffusion"],
        support_threshold=v["solver.support_threshold"],
        lipschitz_bound=v["solver.lipschitz_bound"],
    )
    if v["ic.kind"] not in KINDS:
        raise ConfigError(f"ic.kind must be one of {', '.join(KINDS)}")
    csv_path = v["ic.csv_path"]
    if csv_path is not None:
        csv_path = str((path.parent / csv_path).resolve())
        if not os.path.exists(csv_path):
            raise ConfigError(f"ic.csv_path {csv_path} does not exist")
    ic = ICSpec(v["ic.kind"], v["ic.amplitude"], v["ic.radius"], csv_path, v["ic.t0"])
    T = v["schedule.T"]
    if not (math.isfinite(T) and T > 0):
        raise ParameterDomainError("schedule.T must be > 0")
    times = _schedule(T, v["schedule.snapshots"], v["schedule.spacing"], v["schedule.t_first"],
                      v["schedule.times"])
    tf = v["analysis.tail_fraction"]
    if not 0 < tf < 1:
        raise ParameterDomainError("analysis.tail_fraction must lie in (0, 1)")
    out = (path.parent / v["output.dir"]).resolve()
    return ExperimentConfig(params, grid.r_max, grid.n, solver, ic, T, times, out, tf, text)


# --- pipeline ----------------------------------------------------------------


def wave_offset(params: Params, R0: float, M: float) -> float | None:
    """Support-bound offset, extending the wave table until it covers ``M``."""
    y_min = -(2.0 * M + 20.0)
    for _ in range(8):
        try:
            tw = traveling_wave(params, y_min)
            return wave_offset_mu(tw, R0, M)
        except TabulationRangeError:
            y_min *= 2.0
        except QuadratureError as exc:
            log.warning("wave offset unavailable: %s", exc)
            return None
    return None


@dataclass
class RunResult:
    config: ExperimentConfig
    info: InitialDataInfo
    evolve: object
    regime: object


def simulate(cfg: ExperimentConfig, backend=None) -> RunResult:
    """Build the initial data and integrate; no files are touched."""
    grid = cfg.grid
    ic = make_initial_data(cfg.ic.kind, grid, cfg.params, cfg.ic.amplitude, cfg.ic.radius,
                           cfg.ic.csv_path, cfg.ic.t0)
    u0 = ic.field
    sup0 = u0.sup
    if not sup0 > 0:
        raise ParameterDomainError("initial data vanish identically")
    res = evolve(u0, cfg.T, cfg.solver, cfg.params, cfg.times, backend=backend)
    mu = None
    if not cfg.solver.pure_diffusion and ic.R0 > 0:
        mu = wave_offset(cfg.params, ic.R0, sup0)
    plap0 = discrete_plap(u0.u, grid.dr, cfg.solver.epsilon, cfg.params)
    info = InitialDataInfo(
        kind=ic.kind, R0=ic.R0, sup0=sup0, grad0=float(res.series.grad_sup[0]),
        min_plap0=float(np.min(plap0)), w2inf=ic.w2inf, dt0=res.dt0,
        r_max=grid.r_max, dr=grid.dr, mu=mu,
    )
    regime = None
    if cfg.params.q < cfg.params.p:
        regime = classify_regime(u0, cfg.params, cfg.solver)
    return RunResult(cfg, info, res, regime)


def _fmt_t(x: float) -> str:
    return format(x, ".10g")


def _write_xy(path, header, x, y):
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        fh.writelines(f"{a!r},{b!r}\n" for a, b in zip(x.tolist(), y.tolist()))


def write_artifacts(result: RunResult, out: Path) -> None:
    cfg, res = result.config, result.evolve
    from .rescaler import to_selfsimilar

    res.series.to_csv(out / "series.csv")
    snaps, rescaled = [], []
    for snap in res.snapshots:
        name = f"snapshot_{_fmt_t(snap.t)}.csv"
        _write_xy(out / name, "r,u", snap.grid.r, snap.u)
        snaps.append(name)
        v = to_selfsimilar(snap, cfg.params)
        rname = f"rescaled_{_fmt_t(v.tau)}.csv"
        _write_xy(out / rname, "y,v", v.y_nodes, v.v)
        rescaled.append(rname)
    if len(set(snaps)) != len(snaps):
        raise ConfigError("snapshot times collide at 10 significant digits")
    meta = {
        "version": __version__,
        "params": {"p": cfg.params.p, "q": cfg.params.q, "N": cfg.params.N},
        "grid": {"r_max": cfg.r_max, "n": cfg.n},
        "solver": asdict(res.config),
        "ic": asdict(cfg.ic) | {"csv_path": None if cfg.ic.csv_path is None
                                else os.path.basename(cfg.ic.csv_path)},
        "info": asdict(result.info),
        "regime": None if result.regime is None else asdict(result.regime),
        "T": cfg.T,
        "tail_fraction": cfg.tail_fraction,
        "steps": res.steps,
        "source_integral": res.source_integral.tolist(),
        "snapshots": snaps,
        "rescaled": rescaled,
        "warnings": res.warnings,
    }
    (out / "run.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    (out / "config.txt").write_text(cfg.source_text)


def _read_snapshot(path, grid: RadialGrid, t: float) -> RadialField:
    r, u = read_profile_csv(path)
    if len(u) != grid.n:
        raise ConfigError(f"{path}: expected {grid.n} rows")
    return RadialField(grid, t, u)


def build_report(run_dir) -> tuple[str, list, np.ndarray]:
    """Recompute the report from the artifacts in ``run_dir``.

    Returns ``(text, verdicts, errors_by_tau)``; ``run`` and ``verify`` both
    go through here so a stored report can be reproduced byte for byte.
    """
    run_dir = Path(run_dir)
    try:
        meta = json.loads((run_dir / "run.json").read_text())
        series = TimeSeries.from_csv(run_dir / "series.csv")
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{run_dir}: incomplete run directory ({exc})") from exc
    P = meta["params"]
    params = Params(P["p"], P["q"], P["N"])
    grid = RadialGrid(meta["grid"]["r_max"], meta["grid"]["n"])
    solver = SolverConfig(**meta["solver"])
    info = InitialDataInfo(**meta["info"])
    snaps = [_read_snapshot(run_dir / name, grid, t)
             for name, t in zip(meta["snapshots"], series.t.tolist())]
    verdicts = run_checks(series, snaps, params, solver, info, meta["source_integral"])
    lines = [
        f"dvhj {meta['version']} report",
        f"params p={params.p!r} q={params.q!r} N={params.N}",
        f"grid r_max={grid.r_max!r} n={grid.n} dr={grid.dr!r}",
        f"solver epsilon={solver.epsilon!r} cfl_safety={solver.cfl_safety!r} "
        f"pure_diffusion={solver.pure_diffusion} support_threshold={solver.support_threshold!r}",
        f"ic kind={info.kind} R0={info.R0!r} sup={info.sup0!r} grad={info.grad0!r} "
        f"min_plap={info.min_plap0!r}",
        f"run T={meta['T']!r} snapshots={len(series)} steps={meta['steps']} dt0={info.dt0!r}",
    ]
    if meta["regime"] is not None:
        reg = meta["regime"]
        ratio = reg.get("threshold_ratio")
        lines.append(f"regime {reg['regime']}" + ("" if ratio is None else f" threshold_ratio={ratio!r}"))
    if info.mu is not None:
        lines.append(f"wave_offset mu={info.mu!r}")
    errors = np.zeros((0, 2))
    if len(series) >= 4 and params.q < params.p:
        rep = convergence_report(series, snaps, params, info.sup0, info.R0, meta["tail_fraction"])
        lines += rep.summary_lines()
        verdicts += rep.verdicts
        errors = rep.errors_by_tau
    for w in meta["warnings"]:
        lines.append(f"warning {w}")
    text = "\n".join(lines) + "\n" + format_verdicts(verdicts)
    return text, verdicts, errors


def _exit_for(verdicts) -> int:
    return EXIT_CHECKS if any(v.status == "FAIL" for v in verdicts) else EXIT_OK


def run_experiment(config_path) -> int:
    """Run one experiment; artifacts appear atomically in ``output.dir``."""
    cfg = parse_config(config_path)
    result = simulate(cfg)
    out = cfg.output_dir
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        write_artifacts(result, tmp)
        text, verdicts, errors = build_report(tmp)
        with open(tmp / "errors.csv", "w", newline="") as fh:
            fh.write("tau,sup_error\n")
            fh.writelines(f"{a!r},{b!r}\n" for a, b in errors.tolist())
        (tmp / "report.txt").write_text(text)
        if out.exists():
            old = Path(tempfile.mkdtemp(prefix=f".{out.name}.old.", dir=out.parent))
            os.replace(out, old / "x")
            os.replace(tmp, out)
            shutil.rmtree(old)
        else:
            os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    sys.stdout.write(text)
    return _exit_for(verdicts)


def verify(series_path) -> int:
    run_dir = Path(series_path).resolve().parent
    text, verdicts, _ = build_report(run_dir)
    sys.stdout.write(text)
    stored = run_dir / "report.txt"
    if stored.exists() and stored.read_text() != text:
        sys.stderr.write(f"report differs from {stored}\n")
        return EXIT_MISMATCH
    return _exit_for(verdicts)


# --- profile dumps -------------------------------------------------------------


def dump_profile(args) -> int:
    params = Params(args.p, args.q, args.N)
    if args.name == "wave" or args.name == "wave-F":
        tw = traveling_wave(params, -abs(args.y_min), args.n)
        x = tw.y_nodes
        y = tw.f_values if args.name == "wave" else tw.F_values
        header = "y,value"
    else:
        x = np.linspace(0.0, args.r_max, args.n)
        if args.name == "h_infty":
            y = eval_h_infty(args.t, x, args.M, params)
        elif args.name == "h_s":
            y = eval_h_s(x, args.M, params)
        else:
            y = eval_barenblatt(args.t, x, args.L, params)
        header = "r,value"
    lines = [header] + [f"{a:.17g},{b:.17g}" for a, b in zip(x.tolist(), np.asarray(y).tolist())]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- tables --------------------------------------------------------------------

TABLE_HEADER = "config,p,q,N,dr,T,M_est,final_tau,final_error,failed_checks"


def _table_row(config_path: str, rerun: bool) -> tuple[str, int]:
    cfg = parse_config(config_path)
    status = EXIT_OK
    if rerun or not (cfg.output_dir / "report.txt").exists():
        status = run_experiment_quiet(config_path)
    text = (cfg.output_dir / "report.txt").read_text()
    M = next((ln.split()[1] for ln in text.splitlines() if ln.startswith("M_infty_estimate")), "")
    errs = (cfg.output_dir / "errors.csv").read_text().splitlines()[1:]
    tau, err = errs[-1].split(",") if errs else ("", "")
    failed = sum(1 for ln in text.splitlines() if ln.startswith("CHK-") and ln.split()[1] == "FAIL")
    P = cfg.params
    row = f"{config_path},{P.p!r},{P.q!r},{P.N},{cfg.grid.dr!r},{cfg.T!r},{M},{tau},{err},{failed}"
    return row, status


def run_experiment_quiet(config_path) -> int:
    saved = sys.stdout
    sys.stdout = open(os.devnull, "w")
    try:
        return run_experiment(config_path)
    finally:
        sys.stdout.close()
        sys.stdout = saved


def make_table(pattern: str, jobs: int, rerun: bool, out) -> int:
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise ConfigError(f"no configs match {pattern!r}")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_table_row, paths, [rerun] * len(paths)))
    else:
        rows = [_table_row(p, rerun) for p in paths]
    text = TABLE_HEADER + "\n" + "".join(r + "\n" for r, _ in rows)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return max(s for _, s in rows)


# --- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dvhj", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")

    pr = sub.add_parser("profile", help="dump a closed-form profile as CSV")
    pr.add_argument("name", choices=["h_infty", "h_s", "barenblatt", "wave", "wave-F"])
    pr.add_argument("--p", type=float, required=True)
    pr.add_argument("--q", type=float, default=2.0)
    pr.add_argument("--N", type=int, default=1)
    pr.add_argument("--t", type=float, default=1.0)
    pr.add_argument("--M", type=float, default=1.0)
    pr.add_argument("--L", type=float, default=1.0)
    pr.add_argument("--r-max", type=float, default=5.0)
    pr.add_argument("--y-min", type=float, default=20.0)
    pr.add_argument("--n", type=int, default=501)
    pr.add_argument("--out")

    v = sub.add_parser("verify", help="recompute the report of a stored run")
    v.add_argument("series")

    t = sub.add_parser("table", help="collect final errors of several runs into one CSV")
    t.add_argument("pattern", help="glob of config files")
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--rerun", action="store_true")
    t.add_argument("--out")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return run_experiment(args.config)
        if args.command == "profile":
            return dump_profile(args)
        if args.command == "verify":
            return verify(args.series)
        return make_table(args.pattern, args.jobs, args.rerun, args.out)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except ParameterDomainError as exc:
        sys.stderr.write(f"domain error: {exc}\n")
        return EXIT_DOMAIN
    except (NumericalInstabilityError, QuadratureError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
