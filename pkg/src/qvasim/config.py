"""Run configuration: an INI file with ``[run]``, ``[problem]``, ``[optimizer]``
and ``[output]`` sections.

Unknown sections or keys are rejected so typos fail loudly. Relative paths
are kept as written and resolved against the config file's directory when
the run starts.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field, fields, replace

from .optimizer import GRADIENT_MODES, METHODS, PARALLEL_MODES, OptimizerConfig, _canonical

ALGORITHMS = ("qaoa", "exqaoa", "qaoaz", "qwoa")
PROBLEMS = ("maxcut", "portfolio")
PROBLEM_OF = {"qaoa": "maxcut", "exqaoa": "maxcut", "qaoaz": "portfolio", "qwoa": "portfolio"}
LOG_MODES = {"append": "a", "overwrite": "w"}


class ConfigError(ValueError):
    pass


def parse_depths(text: str) -> tuple[int, int]:
    """``"3"`` -> ``(3, 3)``; ``"1..5"`` -> ``(1, 5)``."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split("..", 1))
        else:
            lo = hi = int(text)
    except ValueError:
        raise ConfigError(f"depth must be an integer or a range 'A..B', got {text!r}") from None
    if lo < 1 or hi < lo:
        raise ConfigError(f"invalid depth range {text!r}")
    return lo, hi


@dataclass
class RunConfig:
    algorithm: str = "qaoa"
    label: str = ""
    seed: int = 0
    workers: int | None = None
    depths: tuple[int, int] = (1, 1)
    repeats: int = 1
    param_persist: bool = False

    problem: str = "maxcut"
    graph: str = ""
    prices: str = ""
    omega: float = 0.5
    net: int = 2

    method: str = "bfgs"
    gradient: str = "forward"
    step: float | None = None
    tol: float = 1e-5
    max_evaluations: int = 10000
    parallel: str = "global"
    nodes: int = 1

    log: str = ""
    log_mode: str = "append"
    state: str = ""
    probabilities: str = ""

    base_dir: str = field(default=".", compare=False, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        if PROBLEM_OF[self.algorithm] != self.problem:
            raise ConfigError(f"{self.algorithm} solves {PROBLEM_OF[self.algorithm]} problems")
        if self.problem == "maxcut" and (not self.graph or self.prices):
            raise ConfigError("a maxcut problem needs 'graph' and no 'prices'")
        if self.problem == "portfolio" and (not self.prices or self.graph):
            raise ConfigError("a portfolio problem needs 'prices' and no 'graph'")
        if not 0.0 <= self.omega <= 1.0:
            raise ConfigError("omega must lie in [0, 1]")
        if (self.workers is not None and self.workers < 1) or self.repeats < 1 or self.nodes < 1:
            raise ConfigError("workers, repeats and nodes must be positive")
        lo, hi = self.depths
        if lo < 1 or hi < lo:
            raise ConfigError(f"invalid depth range {self.depths}")
        if self.log_mode not in LOG_MODES:
            raise ConfigError("log_mode must be 'append' or 'overwrite'")
        try:
            self.method = _canonical(self.method, METHODS, "method")
            self.gradient = _canonical(self.gradient, GRADIENT_MODES, "gradient")
            self.parallel = _canonical(self.parallel, PARALLEL_MODES, "parallel mode")
            self.optimizer_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def worker_count(self) -> int:
        """Configured workers, else ``QVA_WORKERS``, else 1."""
        if self.workers is not None:
            return self.workers
        env = os.environ.get("QVA_WORKERS", "").strip()
        if not env:
            return 1
        try:
            count = int(env)
        except ValueError:
            raise ConfigError(f"QVA_WORKERS must be an integer, got {env!r}") from None
        if count < 1:
            raise ConfigError("QVA_WORKERS must be positive")
        return count

    @property
    def depth_list(self) -> list[int]:
        return list(range(self.depths[0], self.depths[1] + 1))

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            method=self.method,
            gradient_mode=self.gradient,
            step_h=self.step,
            tol=self.tol,
            max_evaluations=self.max_evaluations,
            parallel_mode=self.parallel,
            nodes=self.nodes,
        )

    def path(self, value: str) -> str:
        if not value:
            return ""
        value = os.path.expanduser(value)
        return value if os.path.isabs(value) else os.path.join(self.base_dir, value)

    def override(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self


# section -> ordered (key, attribute, kind)
_LAYOUT = {
    "run": [
        ("algorithm", "algorithm", str),
        ("label", "label", str),
        ("seed", "seed", int),
        ("workers", "workers", "optint"),
        ("depths", "depths", "depths"),
        ("repeats", "repeats", int),
        ("param_persist", "param_persist", bool),
    ],
    "problem": [
        ("type", "problem", str),
        ("graph", "graph", str),
        ("prices", "prices", str),
        ("omega", "omega", float),
        ("net", "net", int),
    ],
    "optimizer": [
        ("method", "method", str),
        ("gradient", "gradient", str),
        ("step", "step", "optfloat"),
        ("tol", "tol", float),
        ("max_evaluations", "max_evaluations", int),
        ("parallel", "parallel", str),
        ("nodes", "nodes", int),
    ],
    "output": [
        ("log", "log", str),
        ("log_mode", "log_mode", str),
        ("state", "state", str),
        ("probabilities", "probabilities", str),
    ],
}
_ALIASES = {("run", "depth"): "depths"}


def _convert(parser, section, key, kind):
    raw = parser.get(section, key)
    try:
        if kind == "depths":
            return parse_depths(raw)
        if kind in ("optfloat", "optint"):
            if raw.strip().lower() in ("", "auto", "none"):
                return None
            return float(raw) if kind == "optfloat" else int(raw)
        if kind is bool:
            return parser.getboolean(section, key)
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    values = {}
    for section in parser.sections():
        if section not in _LAYOUT:
            raise ConfigError(f"unknown section [{section}]")
        known = {key: (attr, kind) for key, attr, kind in _LAYOUT[section]}
        for key in parser.options(section):
            name = _ALIASES.get((section, key), key)
            if name not in known:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            attr, kind = known[name]
            if attr in values:
                raise ConfigError(f"[{section}] sets '{name}' twice")
            values[attr] = _convert(parser, section, key, kind)
    return RunConfig(base_dir=base_dir, **values)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def _format(value, kind) -> str:
    if kind == "depths":
        lo, hi = value
        return str(lo) if lo == hi else f"{lo}..{hi}"
    if kind in ("optfloat", "optint"):
        if value is None:
            return "auto"
        return repr(float(value)) if kind == "optfloat" else str(int(value))
    if kind is bool:
        return "true" if value else "false"
    if kind is float:
        return repr(float(value))
    return str(value)


def serialize_config(config: RunConfig) -> str:
    """Canonical text: every key, fixed order, normalised values."""
    parser = configparser.ConfigParser(interpolation=None)
    for section, keys in _LAYOUT.items():
        parser[section] = {key: _format(getattr(config, attr), kind) for key, attr, kind in keys}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def config_fields() -> list[str]:
    return [f.name for f in fields(RunConfig) if f.name != "base_dir"]
