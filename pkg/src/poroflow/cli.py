"""Command-line entry point: ``poroflow {phases,stationary,evolve,sweep}``.

Exit codes: 0 success, 2 configuration error, 3 solver failure (no
convergence), 4 file-system error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .diagnostics import energy, velocity_features
from .discretization import Regime
from .errors import BifurcationWarning, ConfigError, ConvergenceError, FeatureError, ParseError, ValidationError
from .io import (
    RUNLOG_COLUMNS,
    ScenarioConfig,
    default_config,
    fmt,
    load_config,
    run_log_rows,
    write_config,
    write_csv,
    write_profile_csv,
)
from .phases import branch_point, critical_pressure, coexistence_pressure, fluid_rich_phase, standard_phase
from .stationary import (
    FIG1_K1,
    FIG1_K2,
    FIG1_K3,
    figure_sweep_cases,
    interface_position,
    interface_width,
    stationary_connection,
)
from .transient import FIGURE_TIMES, InitialCondition, MemorySink, evolve

log = logging.getLogger("poroflow")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4
ENV_OUT = "POROFLOW_OUT"
_FIGURE_VALUES = {"k1": FIG1_K1, "k2": FIG1_K2, "k3": FIG1_K3}


def output_root(config: ScenarioConfig, explicit: str | None = None) -> Path:
    """--out on the command line, else $POROFLOW_OUT, else the config's directory."""
    if explicit:
        return Path(explicit)
    env = os.environ.get(ENV_OUT)
    return Path(env) if env else Path(config.outputs.directory)


def _dump_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def phases_summary(config: ScenarioConfig) -> dict:
    params = config.params
    p_c, eps_c = critical_pressure(params)
    p_co = coexistence_pressure(params)
    s, f = standard_phase(p_co, params), fluid_rich_phase(p_co, params)
    return {
        "a": params.a,
        "b": params.b,
        "alpha": params.alpha,
        "branch_point": branch_point(params),
        "p_c": p_c,
        "eps_c": eps_c,
        "p_co": p_co,
        "standard": s.as_dict(),
        "fluid_rich": f.as_dict(),
    }


def _stationary_record(config, state):
    grid = config.grid
    return {
        "k1": config.params.k1,
        "k2": config.params.k2,
        "k3": config.params.k3,
        "p": config.params.p,
        "n": grid.n,
        "interface_position": interface_position(state, grid),
        "interface_width": interface_width(state, grid),
        "energy": energy(state, config.params, grid).F,
    }


def _solve_stationary(config: ScenarioConfig):
    left, right = config.phases()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BifurcationWarning)
        return stationary_connection(config.params, config.grid, left, right)


def _sweep_point(args):
    label, config, out_dir = args
    state = _solve_stationary(config)
    write_profile_csv(out_dir / f"stationary_{label}.csv", config.grid, state)
    rec = _stationary_record(config, state)
    rec["label"] = label
    return rec


def run_sweep(config: ScenarioConfig, cases, out_dir: Path, workers: int = 1) -> list[dict]:
    """Solve each (label, params) case; one CSV per case plus sweep.json."""
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(label, replace(config, params=params), out_dir) for label, params in cases]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_sweep_point, jobs))
    else:
        records = [_sweep_point(j) for j in jobs]
    _dump_json(out_dir / "sweep.json", records)
    return records


def parse_sweep(text: str) -> tuple[str, tuple[float, ...]]:
    """``k1=1e-3,4e-3`` or ``k1=figure`` (the published sweep values)."""
    name, _, values = text.partition("=")
    name = name.strip()
    if name not in _FIGURE_VALUES or not values:
        raise ConfigError(f"--sweep expects k1=..., k2=... or k3=... (got {text!r})")
    if values.strip() == "figure":
        return name, _FIGURE_VALUES[name]
    try:
        return name, tuple(float(v) for v in values.split(","))
    except ValueError as exc:
        raise ConfigError(f"--sweep values must be numbers: {exc}") from exc


def run_scenario(config: ScenarioConfig, out_dir: Path, features: bool | None = None) -> int:
    """Evolve one scenario and write snapshots, run log, stationary overlay and plot script."""
    out_dir.mkdir(parents=True, exist_ok=True)
    features = config.outputs.features if features is None else features
    grid, params = config.grid, config.params
    bc = config.bc()
    write_config(config, out_dir / "config.json")

    sink = MemorySink()
    log_rows = []
    try:
        report = evolve(params, grid, bc, config.ic, config.transient, sink, run_log=log_rows.append)
    finally:
        write_csv(out_dir / "run_log.csv", RUNLOG_COLUMNS, run_log_rows(log_rows))

    index = []
    for k, t in enumerate(sink.times()):
        state, v = sink.snapshots[t]
        name = f"snapshot_{k:02d}.csv"
        write_profile_csv(out_dir / name, grid, state, v)
        entry = {"file": name, "t": fmt(t)}
        if features:
            try:
                feats = velocity_features(v, grid).to_dict()
            except FeatureError as exc:
                feats = {"error": str(exc)}
            fname = f"features_{k:02d}.json"
            _dump_json(out_dir / fname, feats)
            entry["features"] = fname
        index.append(entry)
    _dump_json(out_dir / "snapshots.json", index)

    try:
        stat = _solve_stationary(config)
        write_profile_csv(out_dir / "stationary.csv", grid, stat)
    except ConvergenceError as exc:
        log.warning("no stationary overlay: %s", exc)
    _dump_json(
        out_dir / "report.json",
        {
            "steps": report.steps,
            "newton_iters": report.newton_iters,
            "rejected": report.rejected,
            "final_residual": report.final_residual,
            "final_energy": report.final_energy.F,
            "t_end": report.final_state.t,
        },
    )
    emit_plot_script(out_dir)
    return EXIT_OK


_PLOT_TEMPLATE = '''"""Plot the snapshots of this run: columns eps, m, v; stationary profile in gray."""
import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent


def read(name):
    with open(HERE / name, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = list(zip(*[[float(c) for c in r] for r in rows[1:]]))
    return dict(zip(rows[0], cols))


index = json.loads((HERE / "snapshots.json").read_text())
stat = read("stationary.csv") if (HERE / "stationary.csv").exists() else None
fig, axes = plt.subplots(len(index), 3, figsize=(9, 2.0 * max(len(index), 1)), squeeze=False)
for row, entry in zip(axes, index):
    snap = read(entry["file"])
    for ax, key in zip(row, ("eps", "m", "v")):
        if stat is not None and key != "v":
            ax.plot(stat["X_s"], stat[key], color="0.6", lw=1.0)
        ax.plot(snap["X_s"], snap[key], color="k", lw=1.0)
        ax.set_title(f"{key}, t = {float(entry['t']):g}", fontsize=8)
fig.tight_layout()
fig.savefig(HERE / "profiles.png", dpi=150)
'''


def emit_plot_script(run_dir) -> Path:
    """Write ``plot.py`` next to the run outputs; running it needs matplotlib."""
    path = Path(run_dir) / "plot.py"
    path.write_text(_PLOT_TEMPLATE)
    return path


def _load(args) -> ScenarioConfig:
    return load_config(args.config) if args.config else default_config()


def cmd_phases(args) -> int:
    config = _load(args)
    summary = phases_summary(config)
    text = json.dumps(summary, indent=2, sort_keys=True)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "phases.json").write_text(text + "\n")
    return EXIT_OK


def cmd_stationary(args) -> int:
    config = _load(args)
    out = output_root(config, args.out)
    if args.sweep:
        name, values = parse_sweep(args.sweep)
        cases = []
        for v in values:
            ks = {"k1": 1e-3, "k2": 1e-3, "k3": 1e-3} if args.sweep_base == "figure" else {
                k: getattr(config.params, k) for k in ("k1", "k2", "k3")
            }
            ks[name] = v
            try:
                cases.append((f"{name}={v:g}", replace(config.params, **ks)))
            except ValidationError as exc:
                raise ValidationError([f"{name}={v:g}: {p}" for p in exc.problems]) from exc
        records = run_sweep(config, cases, out, workers=args.workers)
        print(json.dumps(records, indent=2))
        return EXIT_OK
    out.mkdir(parents=True, exist_ok=True)
    state = _solve_stationary(config)
    write_profile_csv(out / "stationary.csv", config.grid, state)
    rec = _stationary_record(config, state)
    _dump_json(out / "stationary.json", rec)
    print(json.dumps(rec, indent=2))
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load(args)
    out = output_root(config, args.out)
    records = run_sweep(config, figure_sweep_cases(config.params), out, workers=args.workers)
    print(json.dumps(records, indent=2))
    return EXIT_OK


def _parse_times(text: str) -> tuple[float, ...]:
    try:
        return tuple(sorted(float(t) for t in text.split(",") if t.strip()))
    except ValueError as exc:
        raise ConfigError(f"--snapshots must be comma-separated numbers: {exc}") from exc


def cmd_evolve(args) -> int:
    config = _load(args)
    if args.bc:
        config = replace(config, regime=Regime(args.bc))
    if args.ic:
        ic = InitialCondition.parse(args.ic)
        if ic.path is not None and not ic.path.is_file():
            raise ConfigError(f"initial-condition file {ic.path} does not exist")
        config = replace(config, ic=ic)
    tc = config.transient
    times = _parse_times(args.snapshots) if args.snapshots else None
    if times is None and not tc.snapshot_times and config.ic.label() in FIGURE_TIMES:
        times = FIGURE_TIMES[config.ic.label()]
    t_end = args.t_end if args.t_end is not None else (max(times) if times else tc.t_end)
    try:
        tc = replace(tc, t_end=t_end, snapshot_times=times if times is not None else tc.snapshot_times)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    config = replace(config, transient=tc)
    out = output_root(config, args.out_dir)
    status = run_scenario(config, out, features=args.features or None)
    print(json.dumps({"out_dir": str(out), "snapshots": len(tc.snapshot_times)}))
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poroflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phases", help="critical and coexistence pressures, coexisting phases")
    p.add_argument("--config")
    p.add_argument("--out", help="directory for phases.json")
    p.set_defaults(func=cmd_phases)

    p = sub.add_parser("stationary", help="stationary connection profile(s)")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--sweep", help="k1=v1,v2,... (or k1=figure for the published values)")
    p.add_argument(
        "--sweep-base",
        choices=("figure", "config"),
        default="figure",
        help="hold the other k's at 1e-3 (figure) or at the config values",
    )
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("evolve", help="transient run with snapshots")
    p.add_argument("--config")
    p.add_argument("--bc", choices=[r.value for r in Regime])
    p.add_argument("--ic", help="linear, fluid-poor, fluid-rich or file:PATH")
    p.add_argument("--t-end", type=float)
    p.add_argument("--snapshots", help="comma-separated snapshot times")
    p.add_argument("--out-dir")
    p.add_argument("--features", action="store_true", help="write velocity features per snapshot")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("sweep", help="all gradient-coefficient cases of the stationary figure")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, ValidationError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        where = f" at t={exc.t:g}" if getattr(exc, "t", None) is not None else ""
        print(f"solver failed{where}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
