"""Portable seeded random number generation.

Every stochastic piece of the toolkit draws from this generator so that a
(seed, stream) pair reproduces the same values bit-exactly on any platform,
and so that the stream can be replicated from the update equations alone.

State initialization (splitmix64, two scrambles of ``seed XOR stream*PHI``):

    z = (x + 0x9E3779B97F4A7C15) mod 2^64
    z = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2^64
    z = (z XOR (z >> 27)) * 0x94D049BB133111EB mod 2^64
    z = z XOR (z >> 31)

Core generator (xorshift64*), state s != 0:

    s = s XOR (s >> 12)
    s = s XOR (s << 25) mod 2^64
    s = s XOR (s >> 27)
    output = s * 0x2545F4914F6CDD1D mod 2^64

Derived variates, in fixed call order:

    uniform()      = (output >> 11) * 2^-53                  in [0, 1)
    normal(m, s)   = m + s*sqrt(-2 ln(1-u1))*cos(2 pi u2)    u1 then u2
    unit_vector3() = z = 1 - 2*u1; phi = 2 pi u2;
                     (sqrt(1-z^2) cos phi, sqrt(1-z^2) sin phi, z)
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_PHI64 = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    z = (x + _PHI64) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """xorshift64* generator with splitmix64 seeding.

    ``stream`` selects an independent substream of the same seed; the
    simulator uses one stream per corruption stage so each stage is a pure
    function of (config, seed) regardless of call order.
    """

    def __init__(self, seed: int, stream: int = 0):
        x = (seed & _MASK64) ^ ((stream * _PHI64) & _MASK64)
        state = _splitmix64(_splitmix64(x))
        # xorshift has a fixed point at zero state
        self._state = state if state != 0 else _PHI64

    def next_u64(self) -> int:
        s = self._state
        s ^= s >> 12
        s = (s ^ (s << 25)) & _MASK64
        s ^= s >> 27
        self._state = s
        return (s * 0x2545F4914F6CDD1D) & _MASK64

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        z = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
        return mu + sigma * z

    def normals(self, n: int, mu: float = 0.0, sigma: float = 1.0) -> list[float]:
        return [self.normal(mu, sigma) for _ in range(n)]

    def unit_vector3(self) -> tuple[float, float, float]:
        z = 1.0 - 2.0 * self.uniform()
        phi = 2.0 * math.pi * self.uniform()
        s = math.sqrt(max(0.0, 1.0 - z * z))
        return (s * math.cos(phi), s * math.sin(phi), z)
