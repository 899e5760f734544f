"""Coalescing and meeting random walks, the duality partner of the voter model.

Walks carry the same 1/2 laziness as the voter rounds; without it the
distributional duality with consensus times would not hold on bipartite
graphs. Pebbles co-located at the end of a round merge, the lowest-index
pebble surviving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graphs import Graph
from .rng import make_rng


@dataclass
class PebbleSet:
    """Multiset of pebble positions; merged pebbles are marked with -1."""

    positions: np.ndarray

    @classmethod
    def on_all_nodes(cls, g: Graph) -> "PebbleSet":
        return cls(np.arange(g.n, dtype=np.int64))

    @classmethod
    def at(cls, nodes) -> "PebbleSet":
        return cls(np.asarray(nodes, dtype=np.int64))

    @property
    def alive_count(self) -> int:
        return int((self.positions >= 0).sum())


def coalescing_round(g: Graph, pebbles: PebbleSet, rng) -> PebbleSet:
    """One lazy round: each pebble stays put w.p. 1/2, else moves to a
    uniform neighbour; co-located pebbles merge."""
    pos = pebbles.positions.copy()
    occ = np.full(g.n, -1, dtype=np.int64)
    block = rng.random((1, pos.shape[0]))
    kernels.coalescing_batch(
        g.indptr, g.indices, g.degrees, pos, pebbles.alive_count, occ, block
    )
    return PebbleSet(pos)


def _run_to_single(g: Graph, pos: np.ndarray, rng, max_rounds: int, batch: int = 512):
    alive = int((pos >= 0).sum())
    total = 0
    r = 64
    while alive > 1 and total < max_rounds:
        r = min(r, max_rounds - total)
        occ = np.full(g.n, -1, dtype=np.int64)
        block = rng.random((r, pos.shape[0]))
        consumed, alive = kernels.coalescing_batch(
            g.indptr, g.indices, g.degrees, pos, alive, occ, block
        )
        total += consumed
        r = min(r * 2, batch)
    return total if alive == 1 else math.inf


def coalescing_time(g: Graph, rng=None, seed: int | None = None, max_rounds: int = 10**9):
    """Rounds until the pebbles started on every node merge into one.

    Returns inf if the cap is hit.
    """
    if rng is None:
        rng = make_rng(seed if seed is not None else 0)
    if g.n == 1:
        return 0
    return _run_to_single(g, np.arange(g.n, dtype=np.int64), rng, max_rounds)


def meeting_time(
    g: Graph, u: int, v: int, rng=None, seed: int | None = None, max_rounds: int = 10**9
):
    """Rounds until lazy walks from u and v first co-locate (inf if capped)."""
    if rng is None:
        rng = make_rng(seed if seed is not None else 0)
    if u == v:
        return 0
    pos = np.array([u, v], dtype=np.int64)
    return _run_to_single(g, pos, rng, max_rounds)
