"""Reproducible random streams for trials and experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Identifier of the bit generator backing every stream; recorded in run
#: metadata so outputs can be tied to the exact RNG algorithm.
RNG_ALGORITHM = "philox4x64"


@dataclass(frozen=True)
class SeedPolicy:
    """Derives one independent, reproducible stream per trial index.

    The per-trial stream is obtained by hashing ``(master_seed, trial)``
    through :class:`numpy.random.SeedSequence` spawn keys, so distinct
    trials never share state and any trial can be regenerated in
    isolation (e.g. by a worker process).
    """

    master_seed: int
    algorithm: str = RNG_ALGORITHM

    def __post_init__(self) -> None:
        if not isinstance(self.master_seed, (int, np.integer)):
            raise ValueError(f"master_seed must be an integer, got {self.master_seed!r}")
        if self.algorithm != RNG_ALGORITHM:
            raise ValueError(f"unsupported RNG algorithm {self.algorithm!r}")

    def seed_for(self, trial: int = 0) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=(trial,))

    def generator(self, trial: int = 0) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed_for(trial)))

    def to_dict(self) -> dict:
        return {"master_seed": int(self.master_seed), "algorithm": self.algorithm}

    @classmethod
    def from_dict(cls, d: dict) -> "SeedPolicy":
        return cls(master_seed=int(d["master_seed"]), algorithm=d.get("algorithm", RNG_ALGORITHM))


def as_seed_policy(seed: "SeedPolicy | int") -> SeedPolicy:
    """Accept either a ready policy or a bare master seed."""
    if isinstance(seed, SeedPolicy):
        return seed
    return SeedPolicy(master_seed=int(seed))
