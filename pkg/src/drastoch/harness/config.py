"""Run configuration: loading, validation with field paths, hashing."""

import hashlib
import json
import os
from dataclasses import dataclass, field, replace

from ..errors import ConfigError
from ..sim import COMBINED, Module, PolicyConfig, WorldSpec, reference_policy, reference_world, tiny_policy, tiny_world

MODES = ("evaluate", "simulate", "ablate", "decompose", "mitigate", "aggregate")
ORACLES = ("exact", "normalized", "judge")
FIXTURE_PREFIX = "fixture:"

_WORLDS = {"reference": (reference_world, reference_policy), "tiny": (tiny_world, tiny_policy)}


@dataclass(frozen=True)
class JudgeSettings:
    endpoint: str = None
    model: str = "judge"
    timeout: float = 60.0
    max_retries: int = 3
    max_in_flight: int = 4
    mock: bool = None

    def use_mock(self):
        return self.mock if self.mock is not None else not self.endpoint


@dataclass(frozen=True)
class RunConfig:
    mode: str
    seed: int = 0
    n_runs: int = 10
    out: str = "results"
    world: object = "reference"
    policy: object = None
    temperatures: dict = None
    reports: str = None
    oracle: str = "judge"
    judge: JudgeSettings = field(default_factory=JudgeSettings)
    modules: tuple = ("query", "sum", "update")
    steps: tuple = (1, 2, 3, COMBINED)
    lambdas: tuple = (0.5, 1.0)
    step: int = 1
    method: str = "exact"
    n_outer: int = 500
    n_inner: int = 500
    gamma: float = 0.5
    n0: int = 3
    structured: bool = True
    ensemble: bool = True
    mitigation_lambda: float = 1.0
    input: str = None
    group_by: tuple = ()

    def resolved_world(self):
        if isinstance(self.world, str):
            return _WORLDS[self.world][0]()
        return WorldSpec.from_dict(self.world)

    def resolved_policy(self):
        if self.policy is None:
            name = self.world if isinstance(self.world, str) else "reference"
            cfg = _WORLDS[name][1]()
        elif isinstance(self.policy, str):
            cfg = _WORLDS[self.policy][1]()
        else:
            cfg = PolicyConfig.from_dict(self.policy)
        cfg = replace(cfg, seed=self.seed)
        if self.temperatures is not None:
            cfg = cfg.with_temperatures(self.temperatures)
        return cfg

    def to_dict(self):
        d = {}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            if isinstance(v, JudgeSettings):
                v = {j: getattr(v, j) for j in v.__dataclass_fields__}
            elif isinstance(v, tuple):
                v = list(v)
            d[k] = v
        return d

    def hashable(self):
        """Everything that determines outputs; the output root and judge
        transport details are excluded."""
        d = self.to_dict()
        d.pop("out")
        d["judge"] = {"model": self.judge.model, "mock": self.judge.use_mock()}
        return d

    def config_hash(self):
        blob = json.dumps(self.hashable(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _int(d, key, path, minimum=None):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, "expected an integer")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return v


def _num(d, key, path, lo=None, hi=None):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, "expected a number")
    v = float(v)
    if lo is not None and v < lo or hi is not None and v > hi:
        raise ConfigError(path, f"must be within [{lo}, {hi}]")
    return v


def _bool(d, key, path):
    if not isinstance(d[key], bool):
        raise ConfigError(path, "expected true or false")
    return d[key]


def _str(d, key, path, choices=None):
    v = d[key]
    if not isinstance(v, str):
        raise ConfigError(path, "expected a string")
    if choices is not None and v not in choices:
        raise ConfigError(path, f"must be one of {', '.join(choices)}")
    return v


def _world(v, path):
    if isinstance(v, str):
        if v not in _WORLDS:
            raise ConfigError(path, f"unknown built-in world {v!r}; known: {', '.join(_WORLDS)}")
        return v
    if not isinstance(v, dict):
        raise ConfigError(path, "expected a built-in name or an object")
    try:
        WorldSpec.from_dict(v)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(path, f"invalid world: {exc}") from None
    return v


def _policy(v, path):
    if v is None or isinstance(v, str):
        return _world(v, path) if isinstance(v, str) else None
    if not isinstance(v, dict):
        raise ConfigError(path, "expected a built-in name or an object")
    try:
        PolicyConfig.from_dict(v)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(path, f"invalid policy: {exc}") from None
    return v


def _temperatures(v, path):
    if v is None:
        return None
    if not isinstance(v, dict):
        raise ConfigError(path, "expected an object mapping module to a list")
    out = {}
    for k, lams in v.items():
        if k not in [m.value for m in Module]:
            raise ConfigError(f"{path}.{k}", "unknown module")
        if not isinstance(lams, list):
            raise ConfigError(f"{path}.{k}", "expected a list of temperatures")
        for i, lam in enumerate(lams):
            if isinstance(lam, bool) or not isinstance(lam, (int, float)) or lam < 0:
                raise ConfigError(f"{path}.{k}[{i}]", "expected a non-negative number")
        out[k] = [float(x) for x in lams]
    return out


def from_dict(d, mode=None, check_paths=True):
    """Validate a raw config mapping; ``mode`` (from the subcommand) must agree
    with any ``mode`` in the file."""
    if not isinstance(d, dict):
        raise ConfigError("$", "config must be an object")
    d = dict(d)
    if mode is not None:
        if "mode" in d and d["mode"] != mode:
            raise ConfigError("mode", f"config is for {d['mode']!r}, command is {mode!r}")
        d["mode"] = mode
    if "mode" not in d:
        raise ConfigError("mode", "missing required field")
    known = set(RunConfig.__dataclass_fields__)
    for k in d:
        if k not in known:
            raise ConfigError(k, "unknown field")
    kw = {"mode": _str(d, "mode", "mode", MODES)}
    if "seed" in d:
        kw["seed"] = _int(d, "seed", "seed", 0)
        if kw["seed"] >= 2 ** 64:
            raise ConfigError("seed", "must fit in 64 bits")
    if "n_runs" in d:
        kw["n_runs"] = _int(d, "n_runs", "n_runs", 2)
    if "out" in d:
        kw["out"] = _str(d, "out", "out")
    if "world" in d:
        kw["world"] = _world(d["world"], "world")
    if "policy" in d:
        kw["policy"] = _policy(d["policy"], "policy")
    if "temperatures" in d:
        kw["temperatures"] = _temperatures(d["temperatures"], "temperatures")
    if "reports" in d and d["reports"] is not None:
        kw["reports"] = _str(d, "reports", "reports")
    if "oracle" in d:
        kw["oracle"] = _str(d, "oracle", "oracle", ORACLES)
    if "judge" in d:
        j = d["judge"]
        if not isinstance(j, dict):
            raise ConfigError("judge", "expected an object")
        jk = {}
        for k in j:
            if k not in JudgeSettings.__dataclass_fields__:
                raise ConfigError(f"judge.{k}", "unknown field")
        if j.get("endpoint") is not None:
            jk["endpoint"] = _str(j, "endpoint", "judge.endpoint")
        if "model" in j:
            jk["model"] = _str(j, "model", "judge.model")
        if "timeout" in j:
            jk["timeout"] = _num(j, "timeout", "judge.timeout", 0.0)
        if "max_retries" in j:
            jk["max_retries"] = _int(j, "max_retries", "judge.max_retries", 0)
        if "max_in_flight" in j:
            jk["max_in_flight"] = _int(j, "max_in_flight", "judge.max_in_flight", 1)
        if j.get("mock") is not None:
            jk["mock"] = _bool(j, "mock", "judge.mock")
        kw["judge"] = JudgeSettings(**jk)
    if "modules" in d:
        mods = d["modules"]
        if not isinstance(mods, list) or not mods:
            raise ConfigError("modules", "expected a non-empty list")
        for i, m in enumerate(mods):
            if m not in [x.value for x in Module]:
                raise ConfigError(f"modules[{i}]", "unknown module")
        kw["modules"] = tuple(mods)
    if "steps" in d:
        steps = d["steps"]
        if not isinstance(steps, list) or not steps:
            raise ConfigError("steps", "expected a non-empty list")
        for i, s in enumerate(steps):
            if s != COMBINED and (isinstance(s, bool) or not isinstance(s, int) or s < 1):
                raise ConfigError(f"steps[{i}]", f"expected a step >= 1 or {COMBINED!r}")
        kw["steps"] = tuple(steps)
    if "lambdas" in d:
        lams = d["lambdas"]
        if not isinstance(lams, list) or not lams:
            raise ConfigError("lambdas", "expected a non-empty list")
        for i, lam in enumerate(lams):
            if isinstance(lam, bool) or not isinstance(lam, (int, float)) or lam < 0:
                raise ConfigError(f"lambdas[{i}]", "expected a non-negative number")
        kw["lambdas"] = tuple(float(x) for x in lams)
    if "step" in d:
        kw["step"] = _int(d, "step", "step", 1)
    if "method" in d:
        kw["method"] = _str(d, "method", "method", ("exact", "mc"))
    if "n_outer" in d:
        kw["n_outer"] = _int(d, "n_outer", "n_outer", 3)
    if "n_inner" in d:
        kw["n_inner"] = _int(d, "n_inner", "n_inner", 2)
    if "gamma" in d:
        kw["gamma"] = _num(d, "gamma", "gamma", 0.0, 1.0)
        if kw["gamma"] == 0.0:
            raise ConfigError("gamma", "must be > 0")
    if "n0" in d:
        kw["n0"] = _int(d, "n0", "n0", 1)
    if "structured" in d:
        kw["structured"] = _bool(d, "structured", "structured")
    if "ensemble" in d:
        kw["ensemble"] = _bool(d, "ensemble", "ensemble")
    if "mitigation_lambda" in d:
        kw["mitigation_lambda"] = _num(d, "mitigation_lambda", "mitigation_lambda", 0.0)
    if "input" in d and d["input"] is not None:
        kw["input"] = _str(d, "input", "input")
    if "group_by" in d:
        g = d["group_by"]
        if not isinstance(g, list) or any(not isinstance(x, str) for x in g):
            raise ConfigError("group_by", "expected a list of column names")
        kw["group_by"] = tuple(g)
    cfg = RunConfig(**kw)
    _check_mode(cfg, check_paths)
    return cfg


def _check_mode(cfg, check_paths):
    world = cfg.resolved_world()
    if cfg.mode == "evaluate":
        if not cfg.reports:
            raise ConfigError("reports", "evaluate needs a reports file")
        if check_paths and not os.path.isfile(cfg.reports):
            raise ConfigError("reports", f"no such file: {cfg.reports}")
    if cfg.mode == "aggregate":
        if not cfg.input:
            raise ConfigError("input", "aggregate needs an input table")
        if check_paths and not cfg.input.startswith(FIXTURE_PREFIX) and not os.path.isfile(cfg.input):
            raise ConfigError("input", f"no such file: {cfg.input}")
    if cfg.mode == "decompose" and not 1 <= cfg.step <= world.horizon:
        raise ConfigError("step", f"must be within 1..{world.horizon}")
    if cfg.mode == "ablate":
        for i, s in enumerate(cfg.steps):
            if s != COMBINED and s > world.horizon:
                raise ConfigError(f"steps[{i}]", f"beyond horizon {world.horizon}")
    if cfg.mode == "mitigate" and cfg.n0 > cfg.resolved_policy().max_proposals:
        raise ConfigError("n0", "exceeds the policy's max_proposals")


def load(path, mode=None, overrides=None, check_paths=True):
    """Read a JSON config file (or start empty when ``path`` is None) and apply
    command-line ``overrides`` before validation."""
    d = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except FileNotFoundError:
            raise ConfigError("--config", f"no such file: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("--config", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    d = dict(d)
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k == "judge_endpoint":
            judge = dict(d.get("judge") or {})
            judge["endpoint"] = v
            d["judge"] = judge
        else:
            d[k] = v
    return from_dict(d, mode, check_paths)
