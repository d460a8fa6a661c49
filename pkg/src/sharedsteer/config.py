"""Layered INI configuration for the vehicle, design and solver settings.

Layers are applied in order: built-in defaults, then each configuration file,
then ``section.key=value`` overrides. Floats are written with ``repr`` so a
written file reads back bit-exactly.

Scenario files use the same format::

    [scenario]
    name = test1
    duration = 100.0
    dt = 0.001
    x0 = 0, 0, 0, 0, 0, 0

    [profiles]
    v_x = hold: 0 15
    wind = hold: 0 0, 70 1200, 76 0
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field

from .driver import ActivityParams, WeightingParams
from .sdp import SolverOptions
from .sim import Profile, Scenario
from .synthesis import DesignSpec
from .ts import SchedulingBounds, TsModel, build_ts_model
from .vehicle import DriverGains, VehicleParams, state_constraint_rows

ENV_VAR = "DSAS_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DesignSettings:
    """User-facing design knobs; ``f_w_max`` sets ``R = 1 / f_w_max**2``."""

    u_max: float = 15.0
    f_w_max: float = 1200.0
    rho: float = 1.0
    tau_1: float = 0.3
    objective: str = "maximize_tau1"
    tau1_min: float = 1e-3
    tau1_max: float = 5.0
    tau1_rel_width: float = 0.05
    eps: float = 1e-6


SECTIONS = {
    "vehicle": VehicleParams,
    "driver": DriverGains,
    "weighting": WeightingParams,
    "activity": ActivityParams,
    "bounds": SchedulingBounds,
    "design": DesignSettings,
    "solver": SolverOptions,
}


@dataclass(frozen=True)
class Config:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    driver: DriverGains = field(default_factory=DriverGains)
    weighting: WeightingParams = field(default_factory=WeightingParams)
    activity: ActivityParams = field(default_factory=ActivityParams)
    bounds: SchedulingBounds = field(default_factory=SchedulingBounds)
    design: DesignSettings = field(default_factory=DesignSettings)
    solver: SolverOptions = field(default_factory=SolverOptions)

    def ts_model(self) -> TsModel:
        return build_ts_model(self.vehicle, self.driver, self.bounds)

    def design_spec(self) -> DesignSpec:
        d = self.design
        if d.f_w_max <= 0:
            raise ConfigError("design.f_w_max must be positive")
        return DesignSpec(
            u_max=(d.u_max,), tau_1=d.tau_1, rho=d.rho, R=((1.0 / d.f_w_max**2,),),
            h_rows=tuple(tuple(h) for h in state_constraint_rows(self.vehicle)),
            objective=d.objective, eps=d.eps, tau1_bracket=(d.tau1_min, d.tau1_max),
            tau1_rel_width=d.tau1_rel_width,
        )

    def to_ini(self) -> str:
        lines = []
        for sec in SECTIONS:
            obj = getattr(self, sec)
            lines.append(f"[{sec}]")
            for f in dataclasses.fields(obj):
                lines.append(f"{f.name} = {getattr(obj, f.name)!r}".replace("'", ""))
            lines.append("")
        return "\n".join(lines)


def _convert(cls, key, raw):
    default = {f.name: f for f in dataclasses.fields(cls)}[key].default
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{cls.__name__}.{key}: cannot parse {raw!r}") from exc
    return raw.strip()


def config_from_parser(cp: configparser.ConfigParser, base: Config | None = None) -> Config:
    base = base or Config()
    parts = {}
    for sec, cls in SECTIONS.items():
        current = getattr(base, sec)
        if not cp.has_section(sec):
            parts[sec] = current
            continue
        known = {f.name for f in dataclasses.fields(cls)}
        values = {}
        for key, raw in cp.items(sec):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            values[key] = _convert(cls, key, raw)
        try:
            parts[sec] = dataclasses.replace(current, **values)
        except ValueError as exc:
            raise ConfigError(f"[{sec}]: {exc}") from exc
    extra = set(cp.sections()) - set(SECTIONS)
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(extra))}")
    return Config(**parts)


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys such as M, I_z are case-sensitive
    return cp


def load_config(paths=(), overrides=(), use_env: bool = True) -> Config:
    """Build a :class:`Config` from defaults, files and ``section.key=value`` overrides.

    When no path is given and ``use_env`` is set, the file named by the
    ``DSAS_CONFIG`` environment variable is used if present.
    """
    paths = list(paths)
    if not paths and use_env and os.environ.get(ENV_VAR):
        paths = [os.environ[ENV_VAR]]
    cfg = Config()
    for path in paths:
        if not os.path.isfile(path):
            raise FileNotFoundError(f"configuration file not found: {path}")
        cp = _parser()
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        cfg = config_from_parser(cp, cfg)
    if overrides:
        cp = _parser()
        for item in overrides:
            key, sep, value = item.partition("=")
            sec, dot, name = key.strip().partition(".")
            if not sep or not dot:
                raise ConfigError(f"override {item!r} is not of the form section.key=value")
            if not cp.has_section(sec):
                cp.add_section(sec)
            cp.set(sec, name, value.strip())
        cfg = config_from_parser(cp, cfg)
    return cfg


def loads_config(text: str) -> Config:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_parser(cp)


# -- scenarios ----------------------------------------------------------------

PROFILE_KEYS = ("v_x", "wind", "curvature", "ds", "override")


def scenario_to_ini(sc: Scenario) -> str:
    lines = ["[scenario]", f"name = {sc.name}", f"duration = {sc.duration!r}", f"dt = {sc.dt!r}",
             "x0 = " + ", ".join(repr(float(v)) for v in sc.x0), "", "[profiles]"]
    for key in PROFILE_KEYS:
        lines.append(f"{key} = {getattr(sc, key).to_text()}")
    return "\n".join(lines) + "\n"


def loads_scenario(text: str) -> Scenario:
    cp = _parser()
    try:
        cp.read_string(text)
        s = cp["scenario"]
        kw = {"name": s.get("name", "custom"), "duration": float(s["duration"])}
        if "dt" in s:
            kw["dt"] = float(s["dt"])
        if "x0" in s:
            kw["x0"] = tuple(float(v) for v in s["x0"].split(","))
        if cp.has_section("profiles"):
            for key, raw in cp.items("profiles"):
                if key not in PROFILE_KEYS:
                    raise ConfigError(f"unknown profile {key!r}")
                kw[key] = Profile.from_text(raw)
        return Scenario(**kw)
    except (configparser.Error, KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid scenario: {exc}") from exc


def load_scenario(path) -> Scenario:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"scenario file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return loads_scenario(fh.read())
