"""Scenario configuration (JSON) and profile / run-log files (CSV)."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .discretization import BcRegime, FieldState, Grid, Regime
from .errors import ParseError, ValidationError
from .model import PARAM_KEYS, ModelParams, PhasePoint
from .phases import coexistence_pressure, critical_pressure, fluid_rich_phase, standard_phase
from .transient import ICKind, InitialCondition, TransientConfig

COEXISTENCE = "coexistence"
SNAPSHOT_COLUMNS = ("X_s", "eps", "m", "v")
RUNLOG_COLUMNS = ("t", "dt", "newton_iters", "F", "dF")
_TRANSIENT_KEYS = ("t_end", "dt_init", "dt_min", "dt_max", "snapshot_times", "adapt", "lte_tol")


def fmt(x) -> str:
    """17 significant digits: enough to round-trip any double."""
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class Outputs:
    directory: str = "runs"
    features: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to run one scenario.

    ``params.p`` is always numeric; ``pressure`` remembers whether it was
    given as the literal ``"coexistence"`` so the config writes back the same way.
    """

    params: ModelParams
    grid: Grid = Grid()
    regime: Regime = Regime.ZERO_CHEMICAL_POTENTIAL
    ic: InitialCondition = InitialCondition(ICKind.LINEAR)
    transient: TransientConfig = TransientConfig(t_end=40.0)
    outputs: Outputs = field(default_factory=Outputs)
    pressure: str | None = COEXISTENCE

    def phases(self) -> tuple[PhasePoint, PhasePoint]:
        """Dirichlet data: standard phase on the left, fluid-rich phase on the right."""
        return standard_phase(self.params.p, self.params), fluid_rich_phase(self.params.p, self.params)

    def bc(self) -> BcRegime:
        left, right = self.phases()
        return BcRegime(self.regime, left, right)

    def to_dict(self) -> dict:
        params = self.params.to_dict()
        if self.pressure == COEXISTENCE:
            params["p"] = COEXISTENCE
        tc = self.transient
        return {
            "params": params,
            "grid": {"l1": self.grid.l1, "l2": self.grid.l2, "n": self.grid.n},
            "regime": self.regime.value,
            "ic": self.ic.label(),
            "transient": {
                "t_end": tc.t_end,
                "dt_init": tc.dt_init,
                "dt_min": tc.dt_min,
                "dt_max": tc.dt_max,
                "snapshot_times": list(tc.snapshot_times),
                "adapt": tc.adapt,
                "lte_tol": tc.lte_tol,
            },
            "outputs": {"directory": self.outputs.directory, "features": self.outputs.features},
        }


def _number(value, where, problems, integer=False, optional=False):
    if optional and value is None:
        return None
    ok = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok:
        problems.append(f"{where} must be {'an integer' if integer else 'a number'} (got {value!r})")
        return None
    return value


def _unknown(section: dict, allowed, where, problems):
    extra = sorted(set(section) - set(allowed))
    if extra:
        problems.append(f"{where}: unknown keys {extra}")


def _section(data, key, problems):
    sec = data.get(key, {})
    if not isinstance(sec, dict):
        problems.append(f"{key} must be an object")
        return {}
    return sec


def config_from_dict(data: dict, base_dir: Path | None = None) -> ScenarioConfig:
    """Validate a decoded config; every violated invariant is reported at once."""
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ValidationError(["top level must be a JSON object"])
    _unknown(data, ("params", "grid", "regime", "ic", "transient", "outputs"), "config", problems)

    # params: missing keys take their defaults
    raw = _section(data, "params", problems)
    _unknown(raw, PARAM_KEYS, "params", problems)
    values = ModelParams().to_dict()
    pressure = None
    for key in PARAM_KEYS:
        if key not in raw:
            continue
        if key == "p" and raw[key] == COEXISTENCE:
            pressure = COEXISTENCE
            continue
        v = _number(raw[key], f"params.{key}", problems)
        if v is not None:
            values[key] = float(v)
    if "p" not in raw:
        pressure = COEXISTENCE
    params = None
    if not any(p.startswith("params.") for p in problems):
        try:
            params = ModelParams(**values)
        except ValidationError as exc:
            problems.extend(f"params.{msg}" for msg in exc.problems)

    raw = _section(data, "grid", problems)
    _unknown(raw, ("l1", "l2", "n"), "grid", problems)
    l1 = _number(raw.get("l1", 0.0), "grid.l1", problems)
    l2 = _number(raw.get("l2", 1.0), "grid.l2", problems)
    n = _number(raw.get("n", 201), "grid.n", problems, integer=True)
    grid = None
    if None not in (l1, l2, n):
        try:
            grid = Grid(float(l1), float(l2), int(n))
        except ValueError as exc:
            problems.append(f"grid: {exc}")

    regime = None
    try:
        regime = Regime(data.get("regime", Regime.ZERO_CHEMICAL_POTENTIAL.value))
    except ValueError:
        problems.append(f"regime must be one of {[r.value for r in Regime]} (got {data.get('regime')!r})")

    ic = None
    try:
        ic = InitialCondition.parse(str(data.get("ic", "linear")))
    except ValueError:
        problems.append(f"ic must be linear, fluid-poor, fluid-rich or file:PATH (got {data.get('ic')!r})")
    if ic is not None and ic.kind is ICKind.FROM_FILE:
        path = ic.path if ic.path.is_absolute() or base_dir is None else (base_dir / ic.path).resolve()
        if not path.is_file():
            problems.append(f"ic file {path} does not exist")
        ic = InitialCondition(ICKind.FROM_FILE, path)

    raw = _section(data, "transient", problems)
    _unknown(raw, _TRANSIENT_KEYS, "transient", problems)
    defaults = TransientConfig(t_end=40.0)
    kw = {}
    for key in ("t_end", "dt_init", "dt_min", "dt_max"):
        v = _number(raw.get(key, getattr(defaults, key)), f"transient.{key}", problems)
        if v is not None:
            kw[key] = float(v)
    lte = _number(raw.get("lte_tol", defaults.lte_tol), "transient.lte_tol", problems, optional=True)
    kw["lte_tol"] = None if lte is None else float(lte)
    adapt = raw.get("adapt", True)
    if not isinstance(adapt, bool):
        problems.append(f"transient.adapt must be true or false (got {adapt!r})")
    kw["adapt"] = bool(adapt)
    times = raw.get("snapshot_times", [])
    if not isinstance(times, list) or any(
        isinstance(t, bool) or not isinstance(t, (int, float)) for t in times
    ):
        problems.append("transient.snapshot_times must be a list of numbers")
        times = []
    kw["snapshot_times"] = tuple(float(t) for t in times)
    transient = None
    if len(kw) == 7:
        try:
            transient = TransientConfig(**kw)
        except ValueError as exc:
            problems.append(f"transient: {exc}")

    raw = _section(data, "outputs", problems)
    _unknown(raw, ("directory", "features"), "outputs", problems)
    outputs = Outputs(str(raw.get("directory", "runs")), raw.get("features", False))
    if not isinstance(outputs.features, bool):
        problems.append("outputs.features must be true or false")

    if params is not None and not problems:
        if pressure == COEXISTENCE:
            params = params.with_pressure(coexistence_pressure(params))
        elif params.p < critical_pressure(params)[0]:
            problems.append(
                f"params.p = {params.p:g} is below the critical pressure "
                f"{critical_pressure(params)[0]:.6g}; no fluid-rich phase to connect to"
            )
    if problems:
        raise ValidationError(problems)
    return ScenarioConfig(params, grid, regime, ic, transient, outputs, pressure)


def load_config(path) -> ScenarioConfig:
    """Read and validate a JSON scenario file.

    Raises ParseError (with line and column) on malformed JSON and
    ValidationError listing every violated invariant otherwise.
    """
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(data, base_dir=path.parent)


def write_config(config: ScenarioConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    return path


def default_config(**overrides) -> ScenarioConfig:
    """The reference scenario: default material constants at coexistence."""
    params = ModelParams()
    params = params.with_pressure(coexistence_pressure(params))
    return ScenarioConfig(params=params, **overrides)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, (int, np.integer)) else str(v) for v in row])
    return path


def write_profile_csv(path, grid: Grid, state: FieldState, v: np.ndarray | None = None) -> Path:
    """Columns X_s, eps, m, plus v when a velocity is given."""
    if v is None:
        return write_csv(path, SNAPSHOT_COLUMNS[:3], zip(grid.x, state.eps, state.m))
    return write_csv(path, SNAPSHOT_COLUMNS, zip(grid.x, state.eps, state.m, v))


def read_profile_csv(path) -> tuple[np.ndarray, FieldState]:
    """Read X_s, eps, m (and ignore any further columns) from a profile CSV."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0][:3]] != list(SNAPSHOT_COLUMNS[:3]):
        raise ParseError(f"{path}:1: expected header starting with {','.join(SNAPSHOT_COLUMNS[:3])}")
    try:
        arr = np.array([[float(c) for c in r[:3]] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if arr.ndim != 2 or arr.shape[0] < 5:
        raise ParseError(f"{path}: need at least 5 data rows")
    return arr[:, 0], FieldState(arr[:, 1], arr[:, 2])


def run_log_rows(records):
    return [(r.t, r.dt, int(r.newton_iters), r.F, r.dF) for r in records]
