"""Experiment configuration.

Config files are JSON objects; every section maps onto a frozen dataclass and
unknown keys are rejected. Example::

    {
      "instance": "instances/wedge.json",
      "algorithms": ["alg-nmc", "alg-mc"],
      "t_grid": [4096, 16384, 65536],
      "reps": 400,
      "seed": 7,
      "out": "results"
    }

``instance`` may instead be a generator object (see GeneratorSpec).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from hcb.errors import ConfigError

DEFAULT_SEED = 7
QUICK_FACTOR = 10

# acceptance defaults
WEDGE_T_GRID = (1024, 4096, 16384)
WEDGE_REPS = 400
SCALING_T_GRID = tuple(2**k for k in range(10, 17))
CONCENTRATION_T_PRIME = 2000
CONCENTRATION_REPS = 20000
REGIME2_N = 64
REGIME2_BIAS = 0.001
REGIME2_T = 1000


@dataclass(frozen=True)
class GeneratorSpec:
    """Random instance recipe.

    Conditionals are drawn uniformly from (low, high); ``biased`` entries of the
    S=1 row are set to ``biased_value``. With ``sorted_p`` the S=1 row is sorted
    ascending and must stay <= 1/2.
    """

    N: int
    K: int = 2
    alpha: float | tuple[float, ...] | None = None
    low: float = 0.3
    high: float = 0.7
    biased: int = 0
    biased_value: float = 0.001
    sorted_p: bool = False
    reward: str = "constant-half"
    epsilon: float = 0.1

    def __post_init__(self) -> None:
        if self.N < 1 or self.K < 1:
            raise ConfigError(f"generator needs N >= 1 and K >= 1, got N={self.N}, K={self.K}")
        if not (0.0 < self.low < self.high < 1.0):
            raise ConfigError(f"conditional range must satisfy 0 < low < high < 1, got ({self.low}, {self.high})")
        if not (0 <= self.biased <= self.N):
            raise ConfigError(f"biased count must lie in [0, N], got {self.biased}")
        if not (0.0 < self.biased_value < 1.0):
            raise ConfigError(f"biased value must lie in (0, 1), got {self.biased_value}")
        if self.sorted_p and (self.high > 0.5 or self.biased_value > 0.5):
            raise ConfigError("sorted-p families need every p entry <= 1/2")
        if self.reward not in ("constant-half", "dense", "target-bump"):
            raise ConfigError(f"unknown reward family {self.reward!r}")
        if isinstance(self.alpha, (list, tuple)):
            object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
            if len(self.alpha) != self.K:
                raise ConfigError(f"alpha has {len(self.alpha)} entries, K={self.K}")


@dataclass(frozen=True)
class AdversarySettings:
    shape: str = "auto"  # isolated | coordinate | auto (follow the lower-bound regime)
    lead: int = 1
    policy: str = "alg-nmc"
    t_grid: tuple[int, ...] = WEDGE_T_GRID
    reps: int = WEDGE_REPS
    members: str = "hard"  # hard | all

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_grid", tuple(int(t) for t in self.t_grid))
        if self.shape not in ("isolated", "coordinate", "auto"):
            raise ConfigError(f"unknown family shape {self.shape!r}")
        if self.lead not in (0, 1):
            raise ConfigError(f"lead context must be 0 or 1, got {self.lead}")
        if self.members not in ("hard", "all"):
            raise ConfigError(f"members must be 'hard' or 'all', got {self.members!r}")
        _check_grid(self.t_grid, self.reps)


@dataclass(frozen=True)
class ExperimentConfig:
    instance: str | GeneratorSpec
    algorithms: tuple[str, ...] = ("alg-nmc",)
    t_grid: tuple[int, ...] = (4096, 16384, 65536)
    reps: int = 200
    seed: int = DEFAULT_SEED
    mode: str | None = None
    adversary: AdversarySettings | None = None
    out: str | None = None
    workers: int = 1
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "t_grid", tuple(int(t) for t in self.t_grid))
        if not self.algorithms:
            raise ConfigError("config lists no algorithms")
        if self.mode not in (None, "nmc", "mc"):
            raise ConfigError(f"mode must be 'nmc' or 'mc', got {self.mode!r}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        _check_grid(self.t_grid, self.reps)

    def instance_path(self) -> Path:
        if not isinstance(self.instance, str):
            raise ConfigError("config uses a generated instance, not a file")
        path = Path(self.instance)
        return path if path.is_absolute() else self.base_dir / path

    def scaled(self, factor: int) -> "ExperimentConfig":
        """Copy with replication counts divided by ``factor`` (never below 2)."""
        adversary = self.adversary
        if adversary is not None:
            adversary = _replace(adversary, reps=max(2, adversary.reps // factor))
        return _replace(self, reps=max(2, self.reps // factor), adversary=adversary)


def _replace(obj, **changes):
    values = {f.name: getattr(obj, f.name) for f in fields(obj)}
    values.update(changes)
    return type(obj)(**values)


def _check_grid(grid: tuple[int, ...], reps: int) -> None:
    if not grid:
        raise ConfigError("T grid is empty")
    if any(t < 1 for t in grid):
        raise ConfigError(f"T grid entries must be >= 1, got {grid}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"T grid must be strictly ascending, got {grid}")
    if reps < 2:
        raise ConfigError(f"replications must be >= 2, got {reps}")


def _build(cls, data: Any, where: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name for f in fields(cls) if f.name != "base_dir"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad {where}: {exc}") from None


def generator_from_dict(data: Mapping[str, Any]) -> GeneratorSpec:
    return _build(GeneratorSpec, data, "generator")


def config_from_dict(data: Mapping[str, Any], base_dir: Path | str = ".") -> ExperimentConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    if "instance" not in data:
        raise ConfigError("config needs an 'instance' (file path or generator object)")
    if isinstance(data["instance"], Mapping):
        data["instance"] = generator_from_dict(data["instance"])
    elif not isinstance(data["instance"], str):
        raise ConfigError("'instance' must be a path or a generator object")
    if data.get("adversary") is not None:
        data["adversary"] = _build(AdversarySettings, data["adversary"], "adversary")
    config = _build(ExperimentConfig, data, "config")
    return _replace(config, base_dir=Path(base_dir))


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(data, base_dir=path.parent)


def wedge_generator() -> GeneratorSpec:
    """N = 8, alpha = 1/2, S=1 row sorted in (0.3, 0.5): both family shapes apply."""
    return GeneratorSpec(N=8, K=2, alpha=0.5, low=0.3, high=0.5, sorted_p=True)


def regime2_generator() -> GeneratorSpec:
    return GeneratorSpec(
        N=REGIME2_N, K=2, alpha=0.5, low=0.3, high=0.5, biased=REGIME2_N, biased_value=REGIME2_BIAS, sorted_p=True
    )


def concentration_generator() -> GeneratorSpec:
    return GeneratorSpec(N=5, K=2, alpha=0.5, low=0.3, high=0.7)
