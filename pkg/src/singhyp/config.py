"""Run configuration: one TOML file fully determines a run."""

from __future__ import annotations

import copy
import sys
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np
import tomli_w

from .errors import DomainError
from .flow import ATOL, RTOL, VectorFieldSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_TOLERANCES = {
    "rtol": RTOL,
    "atol": ATOL,
    "margin": 0.1,
}


@dataclass
class RunConfig:
    """Everything a run needs: field, orbits, horizons, splitting and output.

    ``initial`` lists explicit initial conditions; ``random_count`` more are
    drawn uniformly from ``random_box`` (one ``[lo, hi]`` pair per
    coordinate) with generator seed ``seed``.
    """
    field: dict
    initial: list = dc_field(default_factory=list)
    random_count: int = 0
    random_box: list = dc_field(default_factory=list)
    seed: int = 0
    T: float = 100.0
    dt: float = 0.01
    transient: float = 0.0
    tau: float = 0.5
    d_E: int = 1
    p: list = dc_field(default_factory=lambda: [2])
    window: float = 10.0
    adapt_horizon: float = 10.0
    grid: list = dc_field(default_factory=lambda: [1.0, 2.0, 5.0, 10.0, 20.0])
    singularity_seeds: list = dc_field(default_factory=list)
    tolerances: dict = dc_field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out: str = "out"
    workers: int = 1
    jlab_trials: int = 1000

    def __post_init__(self):
        self.tolerances = {**DEFAULT_TOLERANCES, **(self.tolerances or {})}
        self.validate()

    @property
    def vector_field(self) -> VectorFieldSpec:
        return VectorFieldSpec.from_dict(self.field)

    def validate(self) -> None:
        n = self.vector_field.n
        for name, v in self.tolerances.items():
            if not isinstance(v, (int, float)) or not v > 0:
                raise DomainError(f"tolerance {name} must be positive, got {v!r}")
        if self.T <= 0 or self.dt <= 0 or self.tau <= 0 or self.transient < 0:
            raise DomainError("T, dt and tau must be positive and transient non-negative")
        for name in ("T", "tau"):
            k = getattr(self, name) / self.dt
            if abs(k - round(k)) > 1e-9 * max(1.0, k):
                raise DomainError(f"{name}={getattr(self, name)} is not a multiple of dt={self.dt}")
        if not 1 <= self.d_E <= n - 1:
            raise DomainError(f"d_E={self.d_E} outside 1..{n - 1}")
        for p in self.p:
            if not 2 <= p <= n - self.d_E:
                raise DomainError(f"p={p} outside 2..{n - self.d_E}")
        for x in self.initial:
            if len(x) != n:
                raise DomainError(f"initial condition {x} does not have length {n}")
        if self.random_count < 0:
            raise DomainError("random_count must be non-negative")
        if self.random_count and len(self.random_box) != n:
            raise DomainError(f"random_box needs {n} [lo, hi] pairs")
        if not self.initial and not self.random_count:
            raise DomainError("no initial conditions configured")
        if self.workers < 1:
            raise DomainError("workers must be at least 1")

    def initial_conditions(self) -> np.ndarray:
        rows = [np.asarray(x, dtype=float) for x in self.initial]
        if self.random_count:
            rng = np.random.default_rng(self.seed)
            box = np.asarray(self.random_box, dtype=float)
            rows += list(rng.uniform(box[:, 0], box[:, 1], size=(self.random_count, len(box))))
        return np.array(rows)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {
            "field": d["field"],
            "orbits": {"initial": d["initial"], "random_count": d["random_count"],
                       "random_box": d["random_box"], "seed": d["seed"],
                       "singularity_seeds": d["singularity_seeds"]},
            "time": {"T": d["T"], "dt": d["dt"], "transient": d["transient"], "tau": d["tau"]},
            "splitting": {"d_E": d["d_E"], "p": d["p"], "window": d["window"],
                          "adapt_horizon": d["adapt_horizon"], "grid": d["grid"]},
            "tolerances": d["tolerances"],
            "run": {"out": d["out"], "workers": d["workers"], "jlab_trials": d["jlab_trials"]},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = copy.deepcopy(d)
        known = {"field", "orbits", "time", "splitting", "tolerances", "run"}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown config sections {sorted(unknown)}")
        if "field" not in d:
            raise DomainError("config needs a [field] section")
        flat = {"field": d["field"], "tolerances": d.get("tolerances", {})}
        for sec in ("orbits", "time", "splitting", "run"):
            flat.update(d.get(sec, {}))
        names = set(cls.__dataclass_fields__)
        bad = set(flat) - names
        if bad:
            raise DomainError(f"unknown config keys {sorted(bad)}")
        return cls(**flat)

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        return cls.from_dict(tomllib.loads(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_toml())


def lorenz_config(**overrides) -> RunConfig:
    """Lorenz attractor at the classical parameters: 1 + 4 orbits, T = 2000."""
    base = dict(field={"kind": "lorenz", "sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0},
                initial=[[1.0, 1.0, 1.0]], random_count=4,
                random_box=[[-15.0, 15.0], [-20.0, 20.0], [5.0, 45.0]], seed=0,
                T=2000.0, dt=0.01, transient=50.0, tau=0.5, d_E=1, p=[2],
                singularity_seeds=[[0.0, 0.0, 0.0], [8.0, 8.0, 27.0], [-8.0, -8.0, 27.0]])
    base.update(overrides)
    return RunConfig(**base)
