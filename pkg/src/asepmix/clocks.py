"""Seeded Poisson clock streams shared by coupled processes.

Each lattice edge (x, x+1) carries one Poisson stream of rate 1 + q whose
points are marked as rate-1 events with probability 1/(1+q) and rate-q events
otherwise -- an exact superposition of the two independent clock families of
the basic coupling.  Streams for distinct edges are independent, keyed by
``mix64(seed, edge_key(x))``, so enlarging a window leaves existing edges'
clocks untouched.

Event times come from the same jitted routine the simulation kernels use, so
a materialized stream is bit-for-bit the sequence a kernel run consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from asepmix.configs import Interval
from asepmix.errors import InvalidInputError
from asepmix.rng import edge_key, mix64

RATE_1 = 0  # tag values stored per event
RATE_Q = 1


@dataclass(frozen=True)
class ClockStream:
    """Per-edge, time-sorted Poisson events over [0, horizon].

    ``times[x]`` and ``tags[x]`` describe the stream of edge (x, x+1) for x
    in ``edges``.
    """

    edges: Interval
    q: float
    horizon: float
    seed: int
    times: dict[int, np.ndarray]
    tags: dict[int, np.ndarray]

    def events_for(self, x: int) -> tuple[np.ndarray, np.ndarray]:
        if x not in self.edges:
            raise InvalidInputError(f"edge ({x}, {x + 1}) not in this stream")
        return self.times[x], self.tags[x]

    def merged(self) -> list[tuple[float, int, int]]:
        """All events as (time, edge, tag), sorted by (time, edge)."""
        out: list[tuple[float, int, int]] = []
        for x in self.edges.sites():
            ts, gs = self.times[x], self.tags[x]
            out.extend((float(t), x, int(g)) for t, g in zip(ts, gs))
        out.sort(key=lambda ev: (ev[0], ev[1]))
        return out

    def rate_q_count(self) -> int:
        return sum(int(g.sum()) for g in self.tags.values())


def gen_clocks(edges: Interval, q: float | Fraction, horizon: float, seed: int) -> ClockStream:
    """Materialize the clock streams for every edge left-endpoint in ``edges``."""
    from asepmix._kernels import edge_event_list

    qf = float(q)
    if not 0.0 <= qf < 1.0:
        raise InvalidInputError(f"q must lie in [0, 1), got {q}")
    if not horizon > 0:
        raise InvalidInputError("horizon must be positive")
    times: dict[int, np.ndarray] = {}
    tags: dict[int, np.ndarray] = {}
    for x in edges.sites():
        ts, gs = edge_event_list(np.uint64(mix64(seed, edge_key(x))), qf, float(horizon))
        times[x] = ts
        tags[x] = gs
    return ClockStream(edges, qf, float(horizon), seed, times, tags)
