"""Versioned JSON run configuration.

User documents are deep-merged over the packaged ``default.json`` and then
validated section by section; any key that the schema does not know about is
rejected with its full path.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

from .cloth import ClothParams, IntegratorConfig
from .driving import STRATEGIES, PerturbationConfig, StrategyParams, strategy_from_dict, strategy_to_dict, with_revolutions
from .simulation import MeshConfig, Scenario

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is a dotted path, ``line`` a 1-based source line when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = ""
        if key:
            where += f" [{key}]"
        if line:
            where += f" (line {line})"
        super().__init__(message + where)
        self.key, self.line = key, line


@dataclass(frozen=True)
class AnalysisOptions:
    steady_start: float = 5.0  # s; statistics use t >= max(this, ramp end)
    unfold_threshold: float = 0.9
    fixed_point_tol: float = 0.05
    fd_eps: float = 1e-6
    margin: float = 0.05
    min_periods: int = 5
    harmonic_threshold: float = 0.05

    def __post_init__(self):
        if not (self.steady_start >= 0 and self.fixed_point_tol > 0 and self.fd_eps > 0):
            raise ValueError("steady_start >= 0, fixed_point_tol > 0 and fd_eps > 0 required")
        if not 0 <= self.margin < 1:
            raise ValueError("margin must be in [0, 1)")
        if self.min_periods < 1:
            raise ValueError("min_periods must be >= 1")


@dataclass(frozen=True)
class WristConfig:
    D: float = 40.0  # mm
    w: float = 20.0  # mm
    theta_deg: float = 45.0


@dataclass(frozen=True)
class ControllerOptions:
    alpha_rate: float = 0.1  # rad/s
    beta_deg: float = 12.0
    spin_rate: float = 4 * math.pi  # rad/s
    duration: float = 5.0  # s
    ramp_time: float = 1.0  # s
    step: float = 0.005  # s
    tau: float = 0.02  # s
    tau_grid: tuple = (0.0, 0.005, 0.01, 0.02, 0.05, 0.1)
    extension: float = 60.0  # mm
    wrist: WristConfig = WristConfig()


@dataclass(frozen=True)
class WristProfileOptions:
    h_o: float = 8.0  # mm
    w_c: float = 35.0
    h_c: float = 47.0
    n_samples: int = 1000
    sweep: dict | None = None  # {"h_o": [lo, hi], "w_c": [...], "h_c": [...], "resolution": n}


@dataclass(frozen=True)
class RunConfig:
    schema_version: int
    seed: int
    output_dir: str
    duration: float
    strategy: str
    compare: tuple
    strategies: dict  # name -> StrategyParams
    mesh: MeshConfig
    cloth: ClothParams
    integrator: IntegratorConfig
    perturbation: PerturbationConfig
    analysis: AnalysisOptions = AnalysisOptions()
    controller: ControllerOptions = ControllerOptions()
    wrist_profile: WristProfileOptions = WristProfileOptions()

    def scenario(self, name: str | None = None) -> Scenario:
        name = name or self.strategy
        if name not in self.strategies:
            raise ConfigError(f"strategy {name!r} is not configured", "strategies")
        return Scenario(self.strategies[name], self.mesh, self.cloth, self.integrator, self.perturbation, self.duration)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "duration": self.duration,
            "strategy": self.strategy,
            "compare": list(self.compare),
            "strategies": {k: _strategy_entry(v) for k, v in self.strategies.items()},
            "mesh": {**asdict(self.mesh), "drive_offset": list(self.mesh.drive_offset)},
            "cloth": asdict(self.cloth),
            "integrator": {"dt": self.integrator.dt, "substeps": self.integrator.substeps},
            "perturbation": {"amplitude": self.perturbation.amplitude},
            "analysis": asdict(self.analysis),
            "controller": {**asdict(self.controller), "tau_grid": list(self.controller.tau_grid)},
            "wrist_profile": asdict(self.wrist_profile),
        }


def _strategy_entry(s: StrategyParams) -> dict:
    d = strategy_to_dict(s)
    d.pop("type")
    return d


# -- loading ------------------------------------------------------------------

def default_dict() -> dict:
    text = resources.files("handspin").joinpath("default.json").read_text()
    return json.loads(text)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _section(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError("expected an object", path)
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", f"{path}.{unknown[0]}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from exc


def _strategy(name: str, data, path: str) -> StrategyParams:
    if name not in STRATEGIES:
        raise ConfigError(f"unknown strategy {name!r}; expected one of {sorted(STRATEGIES)}", path)
    if not isinstance(data, dict):
        raise ConfigError("expected an object", path)
    d = dict(data)
    n_rev = d.pop("ramp_revolutions", None)
    if n_rev is not None:
        if "T_k" in d:
            raise ConfigError("give either T_k or ramp_revolutions, not both", path)
        d["T_k"] = 1.0  # placeholder, replaced below
    try:
        s = strategy_from_dict({"type": name, **d})
        if n_rev is not None:
            s = with_revolutions(s, float(n_rev))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from exc
    return s


def from_dict(raw: dict, base: dict | None = None) -> RunConfig:
    """Merge ``raw`` over the defaults (or ``base``) and validate."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    defaults = copy.deepcopy(default_dict() if base is None else base)
    # a rise time given one way replaces the default given the other way
    for name, entry in (raw.get("strategies") or {}).items():
        dflt = defaults.get("strategies", {}).get(name)
        if isinstance(entry, dict) and isinstance(dflt, dict):
            if "T_k" in entry:
                dflt.pop("ramp_revolutions", None)
            if "ramp_revolutions" in entry:
                dflt.pop("T_k", None)
    d = _merge(defaults, raw)
    top = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(d) - top)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", unknown[0])
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {d.get('schema_version')!r}; expected {SCHEMA_VERSION}", "schema_version")
    seed = d["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer", "seed")
    if not isinstance(d["duration"], (int, float)) or not d["duration"] >= 0:
        raise ConfigError("duration must be >= 0", "duration")

    strategies = {name: _strategy(name, v, f"strategies.{name}") for name, v in d["strategies"].items()}
    if d["strategy"] not in strategies:
        raise ConfigError(f"selected strategy {d['strategy']!r} is not configured", "strategy")
    compare = tuple(d["compare"])
    for name in compare:
        if name not in strategies:
            raise ConfigError(f"compared strategy {name!r} is not configured", "compare")

    mesh_d = dict(d["mesh"])
    if "drive_offset" in mesh_d:
        mesh_d["drive_offset"] = tuple(float(x) for x in mesh_d["drive_offset"])
    for sec in ("integrator", "perturbation"):
        if not isinstance(d[sec], dict):
            raise ConfigError("expected an object", sec)
        if "seed" in d[sec]:
            raise ConfigError("seed belongs at the top level", f"{sec}.seed")
    ctrl = dict(d["controller"])
    if "tau_grid" in ctrl:
        ctrl["tau_grid"] = tuple(float(x) for x in ctrl["tau_grid"])
    if "wrist" in ctrl:
        ctrl["wrist"] = _section(WristConfig, ctrl["wrist"], "controller.wrist")
    return RunConfig(
        schema_version=SCHEMA_VERSION,
        seed=seed,
        output_dir=str(d["output_dir"]),
        duration=float(d["duration"]),
        strategy=d["strategy"],
        compare=compare,
        strategies=strategies,
        mesh=_section(MeshConfig, mesh_d, "mesh"),
        cloth=_section(ClothParams, d["cloth"], "cloth"),
        integrator=_section(IntegratorConfig, {**d["integrator"], "seed": seed}, "integrator"),
        perturbation=_section(PerturbationConfig, {**d["perturbation"], "seed": seed}, "perturbation"),
        analysis=_section(AnalysisOptions, d["analysis"], "analysis"),
        controller=_section(ControllerOptions, ctrl, "controller"),
        wrist_profile=_section(WristProfileOptions, d["wrist_profile"], "wrist_profile"),
    )


def _line_of(text: str, key: str | None) -> int | None:
    if not key:
        return None
    leaf = key.rsplit(".", 1)[-1]
    for n, line in enumerate(text.splitlines(), 1):
        if f'"{leaf}"' in line:
            return n
    return None


def load(path: str | Path | None = None, seed: int | None = None, output_dir: str | None = None) -> RunConfig:
    """Load a config file (or just the defaults) with optional CLI overrides."""
    raw, text = {}, ""
    if path is not None:
        text = Path(path).read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    if seed is not None:
        raw = {**raw, "seed": seed}
    if output_dir is not None:
        raw = {**raw, "output_dir": output_dir}
    try:
        return from_dict(raw)
    except ConfigError as exc:
        if exc.line is None and text:
            line = _line_of(text, exc.key)
            if line:
                raise ConfigError(str(exc), line=line) from exc
        raise
