"""Periodic one-hot environment signal.

The signal is an arbitrary integer sequence cycling through ``cardinality``
values, emitted as a one-hot vector. Each episode starts at a random offset
so no particular value is aligned with episode starts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SignalSource:
    cardinality: int
    episode_offset: int = 0

    def __post_init__(self):
        if self.cardinality < 1:
            raise ValueError(f"cardinality must be >= 1, got {self.cardinality}")
        if self.episode_offset < 0:
            raise ValueError(f"episode_offset must be >= 0, got {self.episode_offset}")


def hot_index(t: int, source: SignalSource) -> int:
    # Python % is already the nonnegative (mathematical) modulus, so this is
    # well defined even for t < episode_offset.
    return (t - source.episode_offset) % source.cardinality


def one_hot(t: int, source: SignalSource) -> np.ndarray:
    vec = np.zeros(source.cardinality)
    vec[hot_index(t, source)] = 1.0
    return vec


def new_episode_offset(rng: np.random.Generator, cardinality: int) -> int:
    """Uniform offset in [0, cardinality)."""
    if cardinality < 1:
        raise ValueError(f"cardinality must be >= 1, got {cardinality}")
    return int(rng.integers(0, cardinality))
