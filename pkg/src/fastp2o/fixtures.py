"""JSON-described LTI test problems.

A fixture file looks like::

    {"name": "advdiff_small", "kind": "advection_diffusion",
     "n_u": 60, "n_m": 4, "n_d": 3, "n_t": 64, "seed": 0, "snr": null}

``kind`` is ``"advection_diffusion"`` (extra keys ``velocity``,
``diffusivity``) or ``"random"`` (extra key ``radius``).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .lti import LTISystemSpec, advection_diffusion_system, random_stable_system


@dataclass(frozen=True)
class FixtureConfig:
    name: str
    n_u: int
    n_m: int
    n_d: int
    n_t: int
    kind: str = "advection_diffusion"
    seed: int = 0
    snr: float | None = None
    velocity: float = 0.5
    diffusivity: float = 0.2
    radius: float = 0.9

    @classmethod
    def load(cls, path) -> "FixtureConfig":
        return cls(**json.loads(Path(path).read_text()))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def build(self) -> LTISystemSpec:
        if self.kind == "advection_diffusion":
            return advection_diffusion_system(self.n_u, self.n_m, self.n_d, self.n_t,
                                              velocity=self.velocity, diffusivity=self.diffusivity)
        if self.kind == "random":
            return random_stable_system(self.n_u, self.n_m, self.n_d, self.n_t, self.rng(0), self.radius)
        raise ValueError(f"unknown fixture kind {self.kind!r}")


BUILTIN = [
    FixtureConfig("advdiff_small", n_u=40, n_m=3, n_d=2, n_t=32),
    FixtureConfig("advdiff_wide", n_u=200, n_m=8, n_d=3, n_t=256, seed=1),
    FixtureConfig("random_dense", n_u=24, n_m=5, n_d=4, n_t=64, kind="random", seed=2),
]
