"""Reproducible, substreamed random variate generation.

Streams are counter-based (Philox keyed through a seed sequence), so distinct
(seed, stream_index) pairs give statistically independent streams while the
same pair always reproduces the identical sequence.  Parallel work is split
by stream index instead of sharing one mutable generator, which makes results
independent of worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U64_MAX = 2 ** 64


@dataclass(frozen=True)
class StreamKey:
    """Address of one random substream."""

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_index"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer")
            if not 0 <= value < _U64_MAX:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer")

    def seed_sequence(self, *lanes: int) -> np.random.SeedSequence:
        return np.random.SeedSequence((self.seed, self.stream_index, *lanes))

    def generator(self, *lanes: int) -> np.random.Generator:
        """Fresh generator for this stream, optionally on a numbered sub-lane."""
        return np.random.Generator(np.random.Philox(self.seed_sequence(*lanes)))


def std_normal(rng: np.random.Generator, size=None):
    """Standard normal draws from ``rng``."""
    return rng.standard_normal(size)


def chi_square(df, rng: np.random.Generator, size=None):
    """Chi-square draws with integer degrees of freedom >= 1.

    ``df`` may be a scalar or an array that broadcasts against ``size`` (one
    degrees-of-freedom per column, say).  Draws are strictly positive, which
    downstream code relies on since they appear in denominators.
    """
    df_arr = np.asarray(df)
    if df_arr.size == 0:
        raise ValueError("df must be nonempty")
    if np.any(df_arr != np.floor(df_arr)) or np.any(df_arr < 1):
        raise ValueError("df must be integer and >= 1")
    return rng.chisquare(df, size)
