"""Graph providers: the per-round graph source seen by a simulation.

A provider owns the dynamic-graph contract: given the round index and the
full opinion history it yields the graph for the next round together with
the conductance bound the schedule assigns to it. Degree sequences stay
fixed over time for every provider except the degree-changing one, which is
flagged accordingly. Provider instances are stateful and belong to a single
trial.
"""

from __future__ import annotations

import numpy as np

from .graphs import (
    EXACT_CONDUCTANCE_MAX_N,
    Graph,
    InvalidParams,
    build_graph,
    complete_graph,
    conductance,
    generate_cut_graph,
    path_graph,
    relabel_regular,
)
from .rng import make_rng


class GraphProvider:
    """Behavioral contract: ``next(t, history) -> (graph, phi)``."""

    degree_sequence: np.ndarray
    preserves_degrees: bool = True
    is_static: bool = False

    def next(self, t: int, history) -> tuple[Graph, float]:
        raise NotImplementedError


class StaticProvider(GraphProvider):
    """Yields the same graph forever; phi is its measured conductance."""

    def __init__(self, g: Graph, phi: float | None = None):
        if not g.is_connected():
            raise InvalidParams("static provider needs a connected graph")
        self.graph = g
        self.degree_sequence = g.degrees
        self.is_static = True
        if phi is None:
            phi = conductance(g).value  # exact if small, Cheeger lower bound if not
        self.phi = float(phi)

    def next(self, t: int, history) -> tuple[Graph, float]:
        return self.graph, self.phi


def static_provider(g: Graph, phi: float | None = None) -> StaticProvider:
    return StaticProvider(g, phi)


class AdaptiveCutAdversary(GraphProvider):
    """Rebuilds the graph each round to pinch the cut around the minority.

    While the smaller opinion holds at least gamma * n nodes, the round's
    graph is a two-circulant construction whose cut across the current
    opinion partition is at most c * phi_t * d * n; once the minority drops
    below gamma * n the graph freezes. Requires two opinions and even d >= 6.
    """

    def __init__(self, n: int, d: int, phi_schedule, gamma: float = 0.125, c: float = 1.0):
        if d < 6 or d % 2:
            raise InvalidParams("cut adversary needs even d >= 6")
        self.n = n
        self.d = d
        self.gamma = gamma
        self.c = c
        self.degree_sequence = np.full(n, d, dtype=np.int64)
        self._phi_schedule = phi_schedule
        self._last: Graph | None = None
        self._base_cache: dict[tuple[int, float], Graph] = {}

    def phi_at(self, t: int) -> float:
        if np.isscalar(self._phi_schedule):
            return float(self._phi_schedule)
        return float(self._phi_schedule[t])

    def next(self, t: int, history) -> tuple[Graph, float]:
        assignment = np.asarray(history[-1])
        phi = self.phi_at(t)
        ones = int((assignment == 1).sum())
        zeros = self.n - ones
        minority_opinion = 0 if zeros <= ones else 1
        minority = np.flatnonzero(assignment == minority_opinion)
        # the circulant construction needs more than d nodes per side, so at
        # small n the freeze threshold is the constructibility floor
        floor = max(self.gamma * self.n, self.d + 1)
        if minority.shape[0] < floor:
            if self._last is None:
                raise InvalidParams(
                    "cut adversary started below the gamma * n minority size"
                )
            return self._last, phi
        g = self._build(minority, phi)
        self._last = g
        return g, phi

    def _build(self, minority: np.ndarray, phi: float) -> Graph:
        key = (int(minority.shape[0]), float(phi))
        base = self._base_cache.get(key)
        if base is None:
            base, s = generate_cut_graph(self.n, minority.shape[0], self.d, phi)
            inside = np.zeros(self.n, dtype=bool)
            inside[s] = True
            cut = int((inside[base.indices] != np.repeat(inside, base.degrees)).sum()) // 2
            limit = self.c * phi * self.d * self.n
            if cut > limit:
                raise InvalidParams(
                    f"constructed cut {cut} exceeds c*phi*d*n = {limit:.3g}"
                )
            self._base_cache[key] = base
        # relabel: construction ids 0..n'-1 become the minority nodes (in id
        # order), the rest become the complement
        rest = np.setdiff1d(np.arange(self.n), minority, assume_unique=True)
        relabel = np.empty(self.n, dtype=np.int64)
        relabel[: minority.shape[0]] = minority
        relabel[minority.shape[0] :] = rest
        return relabel_regular(base, relabel)


def adaptive_cut_adversary(
    n: int, d: int, phi_schedule, gamma: float = 0.125, c: float = 1.0
) -> AdaptiveCutAdversary:
    return AdaptiveCutAdversary(n, d, phi_schedule, gamma, c)


class DegreeChangingAdversary(GraphProvider):
    """The degree-changing construction: minority clique behind one edge.

    Starts from a line. Whenever the opinions are unbalanced, the smaller
    side becomes a clique whose lowest-id node holds the single cut edge;
    the larger side is a clique on all but its lowest-id node b, with b
    attached to the cut edge and to one clique node, so b flips with
    constant probability while the minority's gatekeeper flips with
    probability 1/(2 * minority size). Degrees change over time.
    """

    preserves_degrees = False

    def __init__(self, n: int):
        if n < 4:
            raise InvalidParams("degree-changing adversary needs n >= 4")
        self.n = n
        self.degree_sequence = path_graph(n).degrees
        self._last = path_graph(n)

    def next(self, t: int, history) -> tuple[Graph, float]:
        assignment = np.asarray(history[-1])
        ones = int((assignment == 1).sum())
        zeros = self.n - ones
        if ones == zeros:
            g = self._last
        else:
            minority_opinion = 0 if zeros < ones else 1
            minority = np.flatnonzero(assignment == minority_opinion)
            majority = np.flatnonzero(assignment != minority_opinion)
            g = build_minority_clique_graph(self.n, minority, majority)
            self._last = g
        phi = self._phi_witness(g, assignment)
        return g, phi

    @staticmethod
    def _phi_witness(g: Graph, assignment) -> float:
        if g.n <= EXACT_CONDUCTANCE_MAX_N:
            return conductance(g).value
        inside = assignment == assignment[0]
        vol = int(g.degrees[inside].sum())
        vol = min(vol, 2 * g.m - vol)
        return 1.0 / max(vol, 1)  # cut of one edge over the smaller volume


def build_minority_clique_graph(
    n: int, minority: np.ndarray, majority: np.ndarray
) -> Graph:
    """Clique + clique-with-pendant joined by exactly one edge."""
    a = int(minority.min())
    b = int(majority.min())
    core = [int(u) for u in majority if u != b]
    edges = [(int(u), int(v)) for i, u in enumerate(minority) for v in minority[i + 1 :]]
    edges += [(u, v) for i, u in enumerate(core) for v in core[i + 1 :]]
    edges.append((min(a, b), max(a, b)))
    if core:
        edges.append((min(b, core[0]), max(b, core[0])))
    return build_graph(edges, n)


def degree_changing_adversary(n: int) -> DegreeChangingAdversary:
    return DegreeChangingAdversary(n)


class ScheduleProvider(GraphProvider):
    """Fresh degree-preserving graph each round tracking a phi schedule.

    Each round builds the two-circulant cut construction for the scheduled
    phi and applies a seeded node relabelling, so the topology is fresh but
    the degree histogram never moves.
    """

    def __init__(self, family: str, phi_schedule, seed: int, *, n: int, d: int, n_prime: int | None = None):
        if family != "cut":
            raise InvalidParams(f"unknown schedule family {family!r}")
        self.n = n
        self.d = d
        self.n_prime = n_prime if n_prime is not None else n // 2
        self.degree_sequence = np.full(n, d, dtype=np.int64)
        self._phi_schedule = phi_schedule
        self._rng = make_rng(seed)
        self._base_cache: dict[float, Graph] = {}

    def phi_at(self, t: int) -> float:
        if np.isscalar(self._phi_schedule):
            return float(self._phi_schedule)
        return float(self._phi_schedule[t])

    def next(self, t: int, history) -> tuple[Graph, float]:
        phi = self.phi_at(t)
        key = float(phi)
        base = self._base_cache.get(key)
        if base is None:
            base, _ = generate_cut_graph(self.n, self.n_prime, self.d, phi)
            self._base_cache[key] = base
        relabel = self._rng.permutation(self.n).astype(np.int64)
        return relabel_regular(base, relabel), phi


def schedule_provider(
    family: str, phi_schedule, seed: int, *, n: int, d: int, n_prime: int | None = None
) -> ScheduleProvider:
    return ScheduleProvider(family, phi_schedule, seed, n=n, d=d, n_prime=n_prime)


def complete_provider(n: int) -> StaticProvider:
    return StaticProvider(complete_graph(n))
