"""Seeded random streams.

Each logical randomness source (arrivals, service times, steering) gets its
own stream so changing one source never perturbs another.  Streams use the
Philox counter-based generator keyed on (seed, stream_id): the algorithm is
fully specified and produces identical sequences on every platform, unlike
platform-default generators.

Samples are drawn from numpy in blocks and handed out one at a time, which
keeps per-sample cost low inside the event loop.
"""

import numpy as np

_BLOCK = 8192

# Conventional stream ids, one per randomness source per application.
STREAM_ARRIVAL = 0
STREAM_SERVICE = 1
STREAM_STEERING = 2


class RngStream:
    __slots__ = ("seed", "stream_id", "_gen", "_exp", "_uni", "_i_exp", "_i_uni")

    def __init__(self, seed, stream_id):
        self.seed = seed
        self.stream_id = stream_id
        self._gen = np.random.Generator(np.random.Philox(key=[seed, stream_id]))
        self._exp = None
        self._uni = None
        self._i_exp = 0
        self._i_uni = 0

    def _next_exp(self):
        if self._exp is None or self._i_exp >= _BLOCK:
            self._exp = self._gen.standard_exponential(_BLOCK)
            self._i_exp = 0
        v = self._exp[self._i_exp]
        self._i_exp += 1
        return v

    def _next_uni(self):
        if self._uni is None or self._i_uni >= _BLOCK:
            self._uni = self._gen.random(_BLOCK)
            self._i_uni = 0
        v = self._uni[self._i_uni]
        self._i_uni += 1
        return v

    def exponential_ns(self, mean_ns):
        """Exponential sample with the given mean, rounded to integer ns."""
        if mean_ns <= 0:
            raise ValueError(f"exponential mean must be > 0, got {mean_ns}")
        return int(self._next_exp() * mean_ns + 0.5)

    def uniform_ns(self, lo_ns, hi_ns):
        """Uniform sample on [lo, hi] in integer ns."""
        if lo_ns > hi_ns:
            raise ValueError(f"uniform bounds reversed: {lo_ns} > {hi_ns}")
        return lo_ns + int(self._next_uni() * (hi_ns - lo_ns) + 0.5)

    def bernoulli(self, p):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"bernoulli p must be in [0, 1], got {p}")
        return self._next_uni() < p

    def uniform_index(self, n):
        """Uniform integer in [0, n)."""
        i = int(self._next_uni() * n)
        return n - 1 if i >= n else i

    def weighted_index(self, cumulative):
        """Index sampled by weight; `cumulative` is a normalized cumsum array."""
        return int(np.searchsorted(cumulative, self._next_uni(), side="right"))
