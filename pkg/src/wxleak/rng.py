"""Portable seeded random numbers for reproducible experiments.

Observation noise and initial-condition perturbations must be byte-identical
across runs and reimplementable in other languages, so the generator is
spelled out here instead of delegating to a library whose stream is an
implementation detail.

Algorithm (all arithmetic modulo 2**64):

* State update: ``s = s + 0x9E3779B97F4A7C15`` per draw (SplitMix64).
* Output scramble of the updated state::

      z = s
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB
      z = z ^ (z >> 31)

* Uniform double in (0, 1]: ``((z >> 11) + 1) * 2**-53``. The +1 keeps the
  value strictly positive so logarithms are always defined.
* Gaussian draw (Box-Muller): each call consumes exactly two uniforms u1, u2
  (in that order) and returns ``sqrt(-2 ln u1) * cos(2 pi u2)``. The sine
  partner is discarded; no state is cached between calls.

Seed derivation for independent substreams hashes each index into the base
seed with one scramble step (see ``derive_seed``).
"""

from __future__ import annotations

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 2.0 ** -53


def _scramble(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, *indices: int) -> int:
    """Derive a child seed from ``base`` and a sequence of stream indices.

    Deterministic and documented so sweeps can hand every (level, member)
    pair its own independent stream: each index is folded in as
    ``s = scramble(s ^ index) + GOLDEN``.
    """
    s = base & _MASK64
    for index in indices:
        s = (_scramble(s ^ (index & _MASK64)) + _GOLDEN) & _MASK64
    return s


class SeededRng:
    """SplitMix64 stream with uniform and Gaussian draws as documented above."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _scramble(self._state)

    def uniform(self) -> float:
        """Uniform double in (0, 1]."""
        return ((self.next_u64() >> 11) + 1) * _INV_2_53

    def normal(self, mean: float = 0.0, stddev: float = 1.0) -> float:
        """One Gaussian draw; consumes exactly two uniforms."""
        u1 = self.uniform()
        u2 = self.uniform()
        return mean + stddev * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, n: int, mean: float = 0.0, stddev: float = 1.0) -> list[float]:
        return [self.normal(mean, stddev) for _ in range(n)]
