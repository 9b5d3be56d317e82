"""JSON run configuration.

Every field is optional. Powers are unit-tagged: ``p_max_mw`` or ``p_max_w``,
``rho_mw`` or ``rho_w``, ``noise_w`` or ``noise_mw``. SINR thresholds are given
in dB and converted to linear once, here.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .model import DEFAULT_BS_DENSITY, SystemParams
from .simulation import ESTIMATORS, WEIGHTINGS, SimConfig

METHODS = ("proposed", "beta", "gilpelaez", "mc")
KERNELS = ("pgfl-exact", "paper-literal")

# acceptance tolerances, max |method - mc|
DEFAULT_TOLERANCES = {"proposed": 0.05, "beta": 0.05, "gilpelaez": 0.05}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"
    csv: str = "results.csv"
    svg: bool = True
    report: str = "validation.json"
    dump_realizations: int = 0


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams = field(default_factory=SystemParams)
    theta_db: tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0, 10.0)
    gamma: tuple[float, ...] = tuple(round(0.1 * k, 1) for k in range(1, 10))
    epsilon: tuple[float, ...] = (0.4,)
    methods: tuple[str, ...] = ("proposed", "beta", "mc")
    kernel: str = "pgfl-exact"
    b_list: tuple[float, ...] = (0.0, 1.0, 2.0)
    sim: SimConfig = field(default_factory=SimConfig)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    workers: int = 1
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def theta_linear(self) -> tuple[float, ...]:
        return tuple(10.0 ** (t / 10.0) for t in self.theta_db)

    def params_for(self, eps: float) -> SystemParams:
        return self.params.replace(compensation=eps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = asdict(self.params)
        d["sim"] = asdict(self.sim)
        return d


def _number(value, path, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if lo is not None and (value <= lo if lo_open else value < lo):
        raise ConfigError(path, f"must be {'>' if lo_open else '>='} {lo}, got {value}")
    if hi is not None and (value >= hi if hi_open else value > hi):
        raise ConfigError(path, f"must be {'<' if hi_open else '<='} {hi}, got {value}")
    return int(value) if integer else float(value)


def _number_list(value, path, **kw):
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list")
    if not value:
        raise ConfigError(path, "must not be empty")
    return tuple(_number(v, f"{path}[{i}]", **kw) for i, v in enumerate(value))


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}" if path else k, "unknown field")


def _power(obj, stem, default_w, path):
    keys = [k for k in (f"{stem}_w", f"{stem}_mw") if k in obj]
    if len(keys) > 1:
        raise ConfigError(f"{path}.{stem}_w", f"give either {stem}_w or {stem}_mw, not both")
    if not keys:
        return default_w
    k = keys[0]
    v = _number(obj[k], f"{path}.{k}", lo=0.0)
    return v * 1e-3 if k.endswith("_mw") else v


def _params(obj) -> SystemParams:
    path = "params"
    allowed = {"bs_density", "path_loss", "compensation", "p_max_w", "p_max_mw",
               "rho_w", "rho_mw", "noise_w", "noise_mw"}
    _check_keys(obj, allowed, path)
    d = SystemParams()
    kw: dict[str, Any] = dict(
        bs_density=_number(obj.get("bs_density", DEFAULT_BS_DENSITY), f"{path}.bs_density", lo=0.0, lo_open=True),
        path_loss=_number(obj.get("path_loss", d.path_loss), f"{path}.path_loss", lo=2.0, lo_open=True),
        compensation=_number(obj.get("compensation", d.compensation), f"{path}.compensation",
                             lo=0.0, hi=1.0, lo_open=True),
        max_power=_power(obj, "p_max", d.max_power, path),
        power_control=_power(obj, "rho", d.power_control, path),
        noise=_power(obj, "noise", d.noise, path),
    )
    if kw["max_power"] <= 0:
        raise ConfigError(f"{path}.p_max_w", "must be > 0")
    if kw["power_control"] <= 0:
        raise ConfigError(f"{path}.rho_w", "must be > 0")
    return SystemParams(**kw)


def _sim(obj) -> SimConfig:
    path = "sim"
    allowed = {"n_realizations", "window_radius", "seed", "estimator", "fading_draws",
               "guard_margin", "typical_radius", "link_weighting", "workers"}
    _check_keys(obj, allowed, path)
    kw: dict[str, Any] = {}
    if "n_realizations" in obj:
        kw["n_realizations"] = _number(obj["n_realizations"], f"{path}.n_realizations", lo=1, integer=True)
    if obj.get("window_radius") is not None:
        kw["window_radius"] = _number(obj["window_radius"], f"{path}.window_radius", lo=0.0, lo_open=True)
    if "seed" in obj:
        kw["seed"] = _number(obj["seed"], f"{path}.seed", lo=0, hi=2**64 - 1, integer=True)
    if "estimator" in obj:
        if obj["estimator"] not in ESTIMATORS:
            raise ConfigError(f"{path}.estimator", f"must be one of {list(ESTIMATORS)}")
        kw["estimator"] = obj["estimator"]
    if "fading_draws" in obj:
        kw["fading_draws"] = _number(obj["fading_draws"], f"{path}.fading_draws", lo=1, integer=True)
    if "guard_margin" in obj:
        kw["guard_margin"] = _number(obj["guard_margin"], f"{path}.guard_margin", lo=0.0)
    if obj.get("typical_radius") is not None:
        kw["typical_radius"] = _number(obj["typical_radius"], f"{path}.typical_radius", lo=0.0)
    if "link_weighting" in obj:
        if obj["link_weighting"] not in WEIGHTINGS:
            raise ConfigError(f"{path}.link_weighting", f"must be one of {list(WEIGHTINGS)}")
        kw["link_weighting"] = obj["link_weighting"]
    if "workers" in obj:
        kw["workers"] = _number(obj["workers"], f"{path}.workers", lo=1, integer=True)
    return SimConfig(**kw)


def _output(obj) -> OutputConfig:
    path = "output"
    _check_keys(obj, {"directory", "csv", "svg", "report", "dump_realizations"}, path)
    kw: dict[str, Any] = {}
    for k in ("directory", "csv", "report"):
        if k in obj:
            if not isinstance(obj[k], str) or not obj[k]:
                raise ConfigError(f"{path}.{k}", "expected a non-empty string")
            kw[k] = obj[k]
    if "svg" in obj:
        if not isinstance(obj["svg"], bool):
            raise ConfigError(f"{path}.svg", "expected true or false")
        kw["svg"] = obj["svg"]
    if "dump_realizations" in obj:
        kw["dump_realizations"] = _number(obj["dump_realizations"], f"{path}.dump_realizations", lo=0, integer=True)
    return OutputConfig(**kw)


def parse_config(obj: dict) -> RunConfig:
    """Validate a decoded JSON object and build a :class:`RunConfig`."""
    allowed = {"params", "theta_db", "gamma", "epsilon", "methods", "kernel", "b_list",
               "sim", "tolerances", "workers", "output"}
    _check_keys(obj, allowed, "")
    d = RunConfig()
    kw: dict[str, Any] = {}
    kw["params"] = _params(obj.get("params", {}))
    if "theta_db" in obj:
        kw["theta_db"] = _number_list(obj["theta_db"], "theta_db")
    if "gamma" in obj:
        kw["gamma"] = _number_list(obj["gamma"], "gamma", lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    if "epsilon" in obj:
        kw["epsilon"] = _number_list(obj["epsilon"], "epsilon", lo=0.0, hi=1.0, lo_open=True)
    else:
        kw["epsilon"] = (kw["params"].compensation,) if "compensation" in obj.get("params", {}) else d.epsilon
    if "methods" in obj:
        m = obj["methods"]
        if not isinstance(m, list):
            raise ConfigError("methods", "expected a list")
        if not m:
            raise ConfigError("methods", "must name at least one method")
        for i, name in enumerate(m):
            if name not in METHODS:
                raise ConfigError(f"methods[{i}]", f"unknown method {name!r}; choose from {list(METHODS)}")
        if len(set(m)) != len(m):
            raise ConfigError("methods", "duplicate method")
        kw["methods"] = tuple(name for name in METHODS if name in m)
    if "kernel" in obj:
        if obj["kernel"] not in KERNELS:
            raise ConfigError("kernel", f"must be one of {list(KERNELS)}")
        kw["kernel"] = obj["kernel"]
    if "b_list" in obj:
        kw["b_list"] = _number_list(obj["b_list"], "b_list", lo=0.0)
    kw["sim"] = _sim(obj.get("sim", {}))
    if "tolerances" in obj:
        tol = obj["tolerances"]
        _check_keys(tol, set(DEFAULT_TOLERANCES), "tolerances")
        merged = dict(DEFAULT_TOLERANCES)
        for k, v in tol.items():
            merged[k] = _number(v, f"tolerances.{k}", lo=0.0)
        kw["tolerances"] = merged
    if "workers" in obj:
        kw["workers"] = _number(obj["workers"], "workers", lo=1, integer=True)
    kw["output"] = _output(obj.get("output", {}))
    cfg = RunConfig(**kw)
    try:
        for e in cfg.epsilon:
            cfg.sim.resolved(cfg.params_for(e))
    except ValueError as exc:
        raise ConfigError("sim.window_radius", str(exc)) from None
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return parse_config(obj)
