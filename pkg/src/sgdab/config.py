"""JSON experiment configuration with validation.

The schema is documented in ``docs/config.schema.json``. Unknown keys are
rejected so that typos do not silently fall back to defaults.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

__all__ = [
    "ConfigError",
    "ProblemParams",
    "SolverParams",
    "NoiseParams",
    "BaselineParams",
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
    "EXPERIMENTS",
    "METHODS",
]

EXPERIMENTS = ("bilinear", "bilinear-wcmc", "dro-synthetic", "dro-libsvm")
METHODS = ("sgdab", "sgdab-budgeted", "gda", "agda", "tiada")


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


@dataclass
class ProblemParams:
    m: int = 30
    n: int = 30
    L_target: Any = 5.0  # a number or a list (one run per value)
    mu_y: float = 1.0
    D_y: float = 10.0
    x_radius: float = 1.0
    n_data: int = 200
    d: int = 20
    separation: float = 1.0
    mu_reg: float = 0.01
    model: str = "mlp"
    hidden: int = 16
    data_seed: int = 0
    path: Optional[str] = None


@dataclass
class SolverParams:
    epsilon: float = 1.0
    epsilon_tilde: float = 1e-4
    p: float = 0.125
    gamma: float = 0.9
    K: int = 10000
    M: int = 10
    max_backtracks: int = 200
    max_oracle_calls: Optional[int] = None
    inner: str = "jacobi"
    trace_stride: int = 100
    init_batch: int = 100
    sigma_x2: Optional[float] = None
    sigma_y2: Optional[float] = None
    workers: int = 1


@dataclass
class NoiseParams:
    sigma: float = 1.0
    scaling: str = "coordinate"
    noise: str = "gaussian"
    estimate_samples: int = 1000


@dataclass
class BaselineParams:
    iterations: int = 30000
    record_every: int = 100
    tiada_grid: tuple = (100.0, 10.0, 1.0, 0.1, 0.01)
    L_input: Optional[float] = None
    kappa_input: Optional[float] = None


@dataclass
class ExperimentConfig:
    experiment: str
    methods: list
    seeds: list
    out: str = "out"
    problem: ProblemParams = field(default_factory=ProblemParams)
    solver: SolverParams = field(default_factory=SolverParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    baselines: BaselineParams = field(default_factory=BaselineParams)
    x0: Any = "auto"
    wall_clock: bool = False
    source: Optional[str] = None

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not isinstance(self.methods, list) or not self.methods:
            raise ConfigError("methods must be a non-empty list")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if not isinstance(self.seeds, list) or not self.seeds:
            raise ConfigError("seeds must be a non-empty list of integers")
        if not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in self.seeds):
            raise ConfigError("seeds must be nonnegative integers")
        s = self.solver
        if not _num(s.epsilon) or not s.epsilon > 0:
            raise ConfigError(f"solver.epsilon must be > 0, got {s.epsilon}")
        if not _num(s.epsilon_tilde) or not s.epsilon_tilde > 0:
            raise ConfigError(f"solver.epsilon_tilde must be > 0, got {s.epsilon_tilde}")
        if not _num(s.gamma) or not 0 < s.gamma < 1:
            raise ConfigError(f"solver.gamma must lie in (0, 1), got {s.gamma}")
        if not _num(s.p) or not 0 <= s.p < 1:
            raise ConfigError(f"solver.p must lie in [0, 1), got {s.p}")
        if s.inner not in ("jacobi", "gauss-seidel"):
            raise ConfigError(f"solver.inner must be 'jacobi' or 'gauss-seidel', got {s.inner!r}")
        for name in ("K", "M", "max_backtracks", "trace_stride", "init_batch", "workers"):
            v = getattr(s, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"solver.{name} must be a positive integer, got {v!r}")
        n = self.noise
        if not _num(n.sigma) or n.sigma < 0:
            raise ConfigError(f"noise.sigma must be >= 0, got {n.sigma}")
        if n.scaling not in ("assumption", "coordinate"):
            raise ConfigError(f"noise.scaling must be 'assumption' or 'coordinate', got {n.scaling!r}")
        if n.noise not in ("gaussian", "deterministic", "minibatch"):
            raise ConfigError(f"noise.noise must be gaussian, deterministic or minibatch, got {n.noise!r}")
        b = self.baselines
        if not isinstance(b.iterations, int) or b.iterations < 1:
            raise ConfigError("baselines.iterations must be a positive integer")
        if not isinstance(b.record_every, int) or b.record_every < 1:
            raise ConfigError("baselines.record_every must be a positive integer")
        if not b.tiada_grid or not all(_num(v) and v > 0 for v in b.tiada_grid):
            raise ConfigError("baselines.tiada_grid must be a non-empty list of positive numbers")
        pr = self.problem
        Ls = pr.L_target if isinstance(pr.L_target, list) else [pr.L_target]
        if not Ls or not all(_num(v) and v > 0 for v in Ls):
            raise ConfigError("problem.L_target must be a positive number or a non-empty list of them")
        if pr.model not in ("linear", "mlp"):
            raise ConfigError(f"problem.model must be 'linear' or 'mlp', got {pr.model!r}")
        if self.experiment == "dro-libsvm":
            if not pr.path:
                raise ConfigError("dro-libsvm needs problem.path")
            p = Path(pr.path)
            if not p.is_absolute() and self.source:
                p = Path(self.source).parent / p
            if not p.is_file():
                raise ConfigError(f"dataset file not found: {pr.path}")
            pr.path = str(p)
        if self.experiment.startswith("dro") and n.noise == "gaussian":
            n.noise = "minibatch"
        return self


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {unknown}")
    kw = dict(data)
    if "tiada_grid" in kw and isinstance(kw["tiada_grid"], list):
        kw["tiada_grid"] = tuple(kw["tiada_grid"])
    return cls(**kw)


def config_from_dict(data: dict, source: Optional[str] = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    top = {"experiment", "methods", "seeds", "out", "problem", "solver", "noise", "baselines",
           "x0", "wall_clock"}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {unknown}")
    for req in ("experiment", "methods", "seeds"):
        if req not in data:
            raise ConfigError(f"missing required key {req!r}")
    cfg = ExperimentConfig(
        experiment=data["experiment"],
        methods=data["methods"],
        seeds=data["seeds"],
        out=data.get("out", "out"),
        problem=_section(ProblemParams, data.get("problem"), "problem"),
        solver=_section(SolverParams, data.get("solver"), "solver"),
        noise=_section(NoiseParams, data.get("noise"), "noise"),
        baselines=_section(BaselineParams, data.get("baselines"), "baselines"),
        x0=data.get("x0", "auto"),
        wall_clock=bool(data.get("wall_clock", False)),
        source=source,
    )
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    except TypeError as e:
        raise ConfigError(f"{path}: {e}") from e
    try:
        return config_from_dict(data, source=str(path))
    except TypeError as e:
        raise ConfigError(f"{path}: {e}") from e
