"""Splittable counter-based random stream.

A stream is a single uint64 counter advanced by the splitmix64 recipe.
Every stochastic draw in the package consumes from an explicitly passed
stream, so a trajectory is reproducible from (master seed, trial index)
alone, on either execution path.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

_MASK = (1 << 64) - 1


def _mix(x: int) -> int:
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


class Stream:
    """Stateful view over a length-1 uint64 array (shareable with kernels)."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = np.array([seed & _MASK], dtype=np.uint64)

    def next_u64(self) -> int:
        return int(_kernels.next_u64(self.state))

    def next_unit(self) -> float:
        return float(_kernels.next_unit(self.state))

    def randint_below(self, bound: int) -> int:
        """Uniform integer in [0, bound); modulo bias is < bound / 2**64."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound

    def copy(self) -> "Stream":
        return Stream(int(self.state[0]))


def split(master_seed: int, index: int) -> Stream:
    """Derive the independent stream for one trial of an experiment."""
    return Stream(_mix(_mix(master_seed & _MASK) ^ _mix((index + 1) & _MASK)))
