"""System configuration and seeded random streams."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = ["SystemConfig", "trial_rng", "db_to_linear"]


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def _pair(value, name):
    if np.isscalar(value):
        value = (value, value)
    value = tuple(float(v) for v in value)
    if len(value) != 2:
        raise ConfigError(f"{name} needs one value per source node, got {len(value)}")
    return value


@dataclass(frozen=True)
class SystemConfig:
    """Parameters of one two-way relay training experiment.

    Per-node quantities (``sigma2_h_ir``, ``sigma2_h_ri``, ``sigma2_i``) are
    pairs indexed by source node; a scalar is broadcast to both nodes. All
    powers are linear (not dB). ``L`` defaults to the shortest admissible
    stage-2 length ``N1 + N2``.

    The relay always has a single antenna, see :attr:`Nr`.
    """

    N1: int = 4
    N2: int = 4
    Lr: int = 6
    L: int | None = None
    sigma2_h_ir: tuple[float, float] = (1.0, 1.0)
    sigma2_h_ri: tuple[float, float] = (1.0, 1.0)
    sigma2_i: tuple[float, float] = (1.0, 1.0)
    sigma2_r: float = 1.0
    Pr: float = 100.0
    P1: float = 100.0
    P2: float = 100.0
    seed: int = 0

    def __post_init__(self):
        for name in ("N1", "N2", "Lr"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        L = self.N1 + self.N2 if self.L is None else self.L
        if int(L) != L or L < self.N1 + self.N2:
            raise ConfigError(f"L must be an integer >= N1 + N2 = {self.N1 + self.N2}, got {L!r}")
        object.__setattr__(self, "L", int(L))
        for name in ("sigma2_h_ir", "sigma2_h_ri", "sigma2_i"):
            object.__setattr__(self, name, _pair(getattr(self, name), name))
        for name in ("sigma2_h_ir", "sigma2_h_ri", "sigma2_i", "sigma2_r", "Pr", "P1", "P2"):
            values = np.atleast_1d(getattr(self, name))
            if not np.all(np.isfinite(values)) or np.any(values <= 0):
                raise ConfigError(f"{name} must be finite and strictly positive, got {getattr(self, name)!r}")
        object.__setattr__(self, "sigma2_r", float(self.sigma2_r))
        for name in ("Pr", "P1", "P2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def Nr(self) -> int:
        return 1

    @property
    def N(self) -> tuple[int, int]:
        return (self.N1, self.N2)

    @property
    def budgets(self) -> tuple[float, float]:
        return (self.P1, self.P2)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "SystemConfig":
        """Load a JSON object whose keys are field names of this class."""
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based stream for one work item.

    The stream depends only on ``seed`` and ``key`` (typically the trial
    index), so results do not depend on which worker runs the trial or in
    what order.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
