"""Experiment configuration: TOML in, validated dataclasses out, TOML back."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np
import tomli
import tomli_w

from glpd.energy import Params
from glpd.mesh import GridSpec
from glpd.serialize import read_field


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field, e.g. ``params.K``."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


PROFILES = ("zero", "constant", "bump", "file")


@dataclass
class GridConfig:
    interior_counts: List[int] = field(default_factory=lambda: [63])
    dimension: Optional[int] = None


@dataclass
class ParamsConfig:
    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 10.0
    epsilon: float = 1e-2
    K: Optional[float] = None


@dataclass
class SourceConfig:
    """``value`` is the level for ``constant`` and the amplitude for ``bump``."""

    kind: str = "zero"
    value: float = 1.0
    path: Optional[str] = None


@dataclass
class SolverConfig:
    tol: float = 1e-12
    max_iter: int = 50
    seed: int = 0
    n_starts: int = 16
    init: str = "bump"
    init_value: float = 1.0
    init_path: Optional[str] = None


@dataclass
class SweepConfig:
    eps_list: Optional[List[float]] = None


@dataclass
class ScanConfig:
    n_directions: Optional[int] = None
    t_max: Optional[float] = None


SECTIONS = {
    "grid": GridConfig,
    "params": ParamsConfig,
    "source": SourceConfig,
    "solver": SolverConfig,
    "sweep": SweepConfig,
    "scan": ScanConfig,
}


@dataclass
class ExperimentConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    params: ParamsConfig = field(default_factory=ParamsConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    # -- loading ------------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path = Path(".")) -> "ExperimentConfig":
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown section")
        sections = {}
        for name, kind in SECTIONS.items():
            raw = data.get(name, {})
            if not isinstance(raw, dict):
                raise ConfigError(name, "expected a table")
            known = {f.name: f for f in fields(kind)}
            for key in raw:
                if key not in known:
                    raise ConfigError(f"{name}.{key}", "unknown key")
            sections[name] = kind(**{k: _coerce(f"{name}.{k}", v, known[k].type) for k, v in raw.items()})
        cfg = cls(**sections, base_dir=Path(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                data = tomli.load(fh)
        except (OSError, tomli.TOMLDecodeError) as exc:
            raise ConfigError("<file>", str(exc)) from exc
        return cls.from_dict(data, base_dir=path.parent)

    # -- saving -------------------------------------------------------------

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            section = {k: v for k, v in asdict(getattr(self, name)).items() if v is not None}
            out[name] = section
        return out

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    # -- validation and construction ----------------------------------------

    def validate(self) -> None:
        g = self.grid
        if not 1 <= len(g.interior_counts) <= 3:
            raise ConfigError("grid.interior_counts", "need 1 to 3 axis counts")
        if any(n < 1 for n in g.interior_counts):
            raise ConfigError("grid.interior_counts", "counts must be >= 1")
        if g.dimension is not None and g.dimension != len(g.interior_counts):
            raise ConfigError("grid.dimension", "does not match the number of interior counts")
        pr = self.params
        for name in ("gamma", "alpha", "beta", "epsilon"):
            value = getattr(pr, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"params.{name}", f"must be positive and finite, got {value}")
        if pr.K is not None and not pr.K > pr.beta + pr.epsilon:
            raise ConfigError("params.K", f"must exceed beta + epsilon = {pr.beta + pr.epsilon}")
        if self.source.kind not in PROFILES:
            raise ConfigError("source.kind", f"must be one of {PROFILES}")
        if self.source.kind == "file" and not self.source.path:
            raise ConfigError("source.path", "required when kind = 'file'")
        s = self.solver
        if s.init not in PROFILES:
            raise ConfigError("solver.init", f"must be one of {PROFILES}")
        if s.init == "file" and not s.init_path:
            raise ConfigError("solver.init_path", "required when init = 'file'")
        if not s.tol > 0:
            raise ConfigError("solver.tol", "must be positive")
        if s.max_iter < 1:
            raise ConfigError("solver.max_iter", "must be >= 1")
        if s.n_starts < 0:
            raise ConfigError("solver.n_starts", "must be >= 0")
        if self.sweep.eps_list is not None:
            if not self.sweep.eps_list:
                raise ConfigError("sweep.eps_list", "must be nonempty")
            if any(not e > 0 for e in self.sweep.eps_list):
                raise ConfigError("sweep.eps_list", "entries must be positive")
        sc = self.scan
        if sc.n_directions is not None and sc.n_directions < 1:
            raise ConfigError("scan.n_directions", "must be >= 1")
        if sc.t_max is not None and sc.t_max < 0:
            raise ConfigError("scan.t_max", "must be >= 0")

    def grid_spec(self) -> GridSpec:
        return GridSpec(tuple(self.grid.interior_counts))

    def _profile(self, grid: GridSpec, kind: str, value: float, path: Optional[str], path_key: str):
        if kind == "zero":
            return grid.zeros()
        if kind == "constant":
            return grid.full(value)
        if kind == "bump":
            return value * grid.bump()
        try:
            return read_field(self.base_dir / path, grid)
        except (OSError, ValueError) as exc:
            raise ConfigError(path_key, str(exc)) from exc

    def build_params(self) -> Params:
        grid = self.grid_spec()
        src = self.source
        f = self._profile(grid, src.kind, src.value, src.path, "source.path")
        pr = self.params
        try:
            return Params(grid, pr.gamma, pr.alpha, pr.beta, pr.epsilon, pr.K, f)
        except ValueError as exc:
            raise ConfigError("params", str(exc)) from exc

    def initial_field(self) -> np.ndarray:
        s = self.solver
        return self._profile(self.grid_spec(), s.init, s.init_value, s.init_path, "solver.init_path")


def _coerce(path: str, value, annotation):
    """Type-check a raw TOML value against a (string) dataclass annotation."""
    ann = str(annotation)
    if ann.startswith("Optional["):
        if value is None:
            return None
        ann = ann[len("Optional["):-1]
    if ann == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if ann == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if ann == "str":
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if ann.startswith("List["):
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {value!r}")
        inner = ann[len("List["):-1]
        return [_coerce(f"{path}[{i}]", v, inner) for i, v in enumerate(value)]
    raise ConfigError(path, f"unsupported field type {ann}")
