"""Graph representation, generators, and conductance computation.

Graphs are simple, undirected, and stored in CSR form (``indptr``,
``indices``) with per-node ascending neighbour lists. Generators cover the
families used throughout: circulants, random regular graphs via the
configuration model, the two-circulant construction with a prescribed cut,
and the subdivided expander with long paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .rng import make_rng

EXACT_CONDUCTANCE_MAX_N = 26


class GraphError(Exception):
    """Base class for graph construction and analysis errors."""


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class NodeOutOfRange(GraphError):
    pass


class Disconnected(GraphError):
    pass


class InvalidParams(GraphError):
    pass


class InfeasibleDegree(GraphError):
    pass


class GenerationFailed(GraphError):
    pass


class InfeasibleParams(GraphError):
    pass


class TooLargeForExact(GraphError):
    pass


class NoConvergence(GraphError):
    pass


@dataclass(frozen=True)
class Graph:
    """Immutable simple undirected graph in CSR form.

    ``indices[indptr[u]:indptr[u+1]]`` are u's neighbours in ascending order;
    ``m`` is the edge count (half the degree sum). Instances are safe to
    share across concurrent trials.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    degrees: np.ndarray
    m: int

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def edge_array(self) -> np.ndarray:
        """Edges as an (m, 2) array with u < v, lexicographically sorted."""
        src = np.repeat(np.arange(self.n), self.degrees)
        keep = src < self.indices
        return np.column_stack([src[keep], self.indices[keep]])

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        if self.m == 0:
            return False
        seen = np.zeros(self.n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for v in self.neighbors(u):
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        return bool(seen.all())

    def is_regular(self) -> bool:
        return self.n == 0 or bool((self.degrees == self.degrees[0]).all())

    def adjacency_csr(self) -> sp.csr_array:
        data = np.ones(self.indices.shape[0], dtype=np.float64)
        return sp.csr_array((data, self.indices, self.indptr), shape=(self.n, self.n))


@dataclass(frozen=True)
class ConductanceResult:
    """Conductance value with provenance.

    ``mode`` is "exact" (value, witness set, and its cut/vol attained by full
    subset enumeration) or "cheeger-bounds" (value is the certified lower
    bound; the true conductance lies in [lower, upper]).
    """

    value: float
    mode: str
    lower: float
    upper: float
    witness_set: frozenset | None = None
    cut: int | None = None
    vol: int | None = None


def build_graph(edge_list, n: int, require_connected: bool = False) -> Graph:
    """Validate an edge list and assemble a Graph.

    Offending edges are collected so the error message names every self-loop
    or duplicate rather than the first one found.
    """
    if n < 1:
        raise InvalidParams(f"node count must be positive, got {n}")
    edges = [(int(u), int(v)) for u, v in edge_list]
    bad = [(u, v) for u, v in edges if not (0 <= u < n and 0 <= v < n)]
    if bad:
        raise NodeOutOfRange(f"node ids outside [0, {n}): {bad}")
    loops = [(u, v) for u, v in edges if u == v]
    if loops:
        raise SelfLoop(f"self-loops not allowed: {loops}")
    canon = [(min(u, v), max(u, v)) for u, v in edges]
    seen: set[tuple[int, int]] = set()
    dups = []
    for e in canon:
        if e in seen:
            dups.append(e)
        seen.add(e)
    if dups:
        raise DuplicateEdge(f"duplicate edges: {sorted(set(dups))}")
    g = _from_canonical_edges(canon, n)
    if require_connected and not g.is_connected():
        raise Disconnected("graph is not connected")
    return g


def _from_canonical_edges(canon, n: int) -> Graph:
    m = len(canon)
    if m == 0:
        indptr = np.zeros(n + 1, dtype=np.int64)
        return Graph(
            n, indptr, np.empty(0, dtype=np.int64), np.zeros(n, dtype=np.int64), 0
        )
    arr = np.asarray(canon, dtype=np.int64)
    src = np.concatenate([arr[:, 0], arr[:, 1]])
    dst = np.concatenate([arr[:, 1], arr[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    degrees = np.bincount(src, minlength=n).astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    return Graph(n, indptr, dst, degrees, m)


def generate_circulant(n: int, k: int) -> Graph:
    """Circulant graph: node i adjacent to i +- 1, ..., i +- k modulo n."""
    if k < 1 or n <= 2 * k:
        raise InvalidParams(f"need n > 2k >= 2, got n={n}, k={k}")
    edges = []
    for i in range(n):
        for off in range(1, k + 1):
            j = (i + off) % n
            edges.append((min(i, j), max(i, j)))
    return _from_canonical_edges(sorted(set(edges)), n)


def generate_random_regular(
    n: int, d: int, seed: int, max_retries: int = 1000
) -> Graph:
    """Random d-regular simple connected graph via the configuration model.

    Stub pairings with loops or multi-edges are rejected wholesale, as are
    disconnected outcomes; deterministic given the seed.
    """
    if n * d % 2 != 0 or not 0 < d < n:
        raise InfeasibleDegree(f"no d-regular graph on n nodes for n={n}, d={d}")
    rng = make_rng(seed)
    for _ in range(max_retries):
        edges = _configuration_attempt(n, d, rng)
        if edges is None:
            continue
        g = _from_canonical_edges(sorted(edges), n)
        if g.is_connected():
            return g
    raise GenerationFailed(
        f"no simple connected d-regular graph found in {max_retries} attempts"
    )


def _configuration_attempt(n: int, d: int, rng) -> set | None:
    """One configuration-model pass: pair stubs, keep the simple pairs, and
    re-shuffle only the colliding stubs until none remain or progress stops."""
    edges: set[tuple[int, int]] = set()
    stubs = np.repeat(np.arange(n, dtype=np.int64), d)
    while stubs.size:
        rng.shuffle(stubs)
        u, v = stubs[0::2], stubs[1::2]
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        leftover = []
        progress = False
        for a, b in zip(lo.tolist(), hi.tolist()):
            if a == b or (a, b) in edges:
                leftover.extend((a, b))
            else:
                edges.add((a, b))
                progress = True
        if not progress and leftover:
            return None
        stubs = np.asarray(leftover, dtype=np.int64)
    return edges


def generate_cut_graph(
    n: int, n_prime: int, d: int, phi: float, gamma: float = 0.125
) -> tuple[Graph, np.ndarray]:
    """d-regular graph with a planted sparse cut around a set S of n_prime nodes.

    Two circulants C_{n'}^{d/2} and C_{n-n'}^{d/2} lose the ring edges among
    their first k nodes and are stitched by 2k-2 cross edges, k chosen as
    ceil(phi * d * n') and clamped below n'/2. At least n'/2 nodes of S end
    up with no cut edge. Returns the graph and the sorted node array S
    (ids 0..n'-1).
    """
    if d < 6 or d % 2 != 0:
        raise InvalidParams(f"need even d >= 6, got d={d}")
    if not 0.0 < phi <= 1.0:
        raise InvalidParams(f"need 0 < phi <= 1, got phi={phi}")
    if not (gamma * n <= n_prime <= n / 2):
        raise InvalidParams(
            f"need gamma*n <= n_prime <= n/2, got n_prime={n_prime} (gamma={gamma})"
        )
    half = d // 2
    if n_prime <= 2 * half or (n - n_prime) <= 2 * half:
        raise InvalidParams("circulant sides need more than d nodes each")
    k_target = phi * d * n_prime
    k = int(np.ceil(k_target))
    if k < 2:
        raise InfeasibleParams(
            f"target cut too small: k={k} < 2 for phi={phi}, d={d}, n_prime={n_prime}"
        )
    k_max = (n_prime - 1) // 2
    if k_max < 2:
        raise InfeasibleParams(f"n_prime={n_prime} leaves no room for a cut")
    k = min(k, k_max)
    achieved = 2 * k - 2
    # above phi = 1/d the construction saturates at k_max and the achieved
    # cut is simply reported; below it the factor-4 window is enforced
    if phi <= 1.0 / d and not (k_target <= achieved <= 4 * k_target):
        raise InfeasibleParams(
            f"no k in [2, n_prime/2) puts the cut within a factor-4 window "
            f"of {k_target:.3g} (closest: {achieved})"
        )

    side_a = generate_circulant(n_prime, half)
    side_b = generate_circulant(n - n_prime, half)
    edges = set(map(tuple, side_a.edge_array().tolist()))
    for u, v in side_b.edge_array():
        edges.add((int(u) + n_prime, int(v) + n_prime))
    for i in range(k - 1):
        edges.discard((i, i + 1))
        edges.discard((n_prime + i, n_prime + i + 1))
    # degree-deficient stubs in id order: endpoints of the opened ring arc
    # once, interior nodes twice; rotate one side by a slot so the pairing
    # never repeats an (a, b) pair
    stubs = [0] + [i for i in range(1, k - 1) for _ in range(2)] + [k - 1]
    rotated = stubs[1:] + stubs[:1]
    for a, b in zip(stubs, rotated):
        edges.add((a, n_prime + b))
    g = _from_canonical_edges(sorted(edges), n)
    if not (g.degrees == d).all():
        raise GenerationFailed("internal error: cut construction not d-regular")
    return g, np.arange(n_prime, dtype=np.int64)


def generate_subdivided_expander(n_prime: int, d: int, ell: int, seed: int) -> Graph:
    """d-regular graph of ~n' * ell nodes built by stretching an expander.

    Every edge of a random d-regular base graph becomes a path of length ell,
    and ell(d-2)/d balancing nodes per path absorb the spare degree: the
    d-2 spare stubs of each path node are organised in layers, each layer
    served by ell/d balancing nodes covering short runs of adjacent path
    nodes (so no balancing node shortcuts the path by more than a constant).
    The one leftover stub per layer is chained to the next layer, or to the
    next gadget's leftover when d is odd.
    """
    if d < 3:
        raise InvalidParams(f"need d >= 3, got d={d}")
    if ell % d != 0 or ell < d:
        raise InvalidParams(f"need ell a positive multiple of d, got ell={ell}, d={d}")
    base = generate_random_regular(n_prime, d, seed)
    base_edges = base.edge_array()
    n_gadgets = base_edges.shape[0]
    if d % 2 == 1 and n_gadgets % 2 == 1:
        raise InvalidParams(
            "odd d needs an even number of base edges to pair leftover stubs"
        )
    q = ell // d  # balancing nodes per layer
    n_layers = d - 2
    edges: list[tuple[int, int]] = []
    next_id = n_prime
    gadget_leftover: list[int] = []
    for u, v in base_edges:
        path = [int(u)] + list(range(next_id, next_id + ell - 1)) + [int(v)]
        next_id += ell - 1
        for a, b in zip(path[:-1], path[1:]):
            edges.append((min(a, b), max(a, b)))
        internal = path[1:-1]
        leftovers: list[int] = []
        for _layer in range(n_layers):
            extras = list(range(next_id, next_id + q))
            next_id += q
            # spread ell-1 internal nodes over q extras in adjacent runs:
            # the first q-1 extras take d nodes each, the last takes the
            # remaining d-1 and keeps the layer's one spare stub
            bounds = [t * d for t in range(q)] + [ell - 1]
            for t, x in enumerate(extras):
                for p in internal[bounds[t] : bounds[t + 1]]:
                    edges.append((min(p, x), max(p, x)))
            leftovers.append(extras[-1])
        for a, b in zip(leftovers[0::2], leftovers[1::2]):
            edges.append((min(a, b), max(a, b)))
        if n_layers % 2 == 1:
            gadget_leftover.append(leftovers[-1])
    for a, b in zip(gadget_leftover[0::2], gadget_leftover[1::2]):
        edges.append((min(a, b), max(a, b)))
    g = _from_canonical_edges(sorted(set(edges)), next_id)
    if len(set(edges)) != len(edges) or not (g.degrees == d).all():
        raise GenerationFailed("internal error: subdivision not d-regular")
    return g


def relabel_regular(g: Graph, relabel: np.ndarray) -> Graph:
    """Apply a node relabelling to a regular graph in O(m) array work.

    ``relabel[i]`` is the new id of construction node i; regularity keeps the
    CSR row pointers unchanged.
    """
    d = int(g.degrees[0])
    mapped = relabel[g.indices.reshape(g.n, d)]
    rows = np.empty((g.n, d), dtype=np.int64)
    rows[relabel] = mapped
    rows.sort(axis=1)
    return Graph(g.n, g.indptr, rows.reshape(-1), g.degrees, g.m)


def volume(g: Graph, s) -> int:
    """Sum of degrees over the node set s."""
    ids = _node_array(g, s)
    return int(g.degrees[ids].sum())


def cut_size(g: Graph, s) -> int:
    """Number of edges between s and its complement."""
    ids = _node_array(g, s)
    inside = np.zeros(g.n, dtype=bool)
    inside[ids] = True
    crossing = inside[g.indices] != np.repeat(inside, g.degrees)
    return int(crossing.sum()) // 2


def _node_array(g: Graph, s) -> np.ndarray:
    ids = np.unique(np.asarray([int(u) for u in s], dtype=np.int64))
    if ids.size and (ids[0] < 0 or ids[-1] >= g.n):
        raise NodeOutOfRange(f"node ids outside [0, {g.n})")
    return ids


def conductance_exact(g: Graph) -> ConductanceResult:
    """Exact conductance: min over subsets with 0 < vol <= m of cut/vol.

    Full enumeration with Gray-code incremental updates; rejected above
    n = 26 nodes.
    """
    if g.n > EXACT_CONDUCTANCE_MAX_N:
        raise TooLargeForExact(
            f"exact conductance enumerates 2^n subsets; n={g.n} > {EXACT_CONDUCTANCE_MAX_N}"
        )
    if g.n < 2:
        raise InvalidParams("conductance needs at least 2 nodes")
    if not g.is_connected():
        raise Disconnected("conductance of a disconnected graph is 0")
    cut, vol, mask = kernels.conductance_enumerate(g.indptr, g.indices, g.degrees)
    witness = frozenset(u for u in range(g.n) if (int(mask) >> u) & 1)
    value = float(cut) / float(vol)
    return ConductanceResult(
        value=value,
        mode="exact",
        lower=value,
        upper=value,
        witness_set=witness,
        cut=int(cut),
        vol=int(vol),
    )


def lazy_second_eigenvalue(
    g: Graph, tol: float = 1e-9, max_iter: int = 10**6
) -> float:
    """Second-largest eigenvalue of the lazy walk matrix (I + P)/2.

    Deflated power iteration on the symmetrised matrix; laziness makes the
    spectrum non-negative so the iteration cannot lock onto a negative
    extreme eigenvalue.
    """
    if g.n < 2:
        raise InvalidParams("need at least 2 nodes")
    a = g.adjacency_csr()
    inv_sqrt_d = 1.0 / np.sqrt(g.degrees.astype(np.float64))
    w1 = np.sqrt(g.degrees / (2.0 * g.m))

    def apply_s(x):
        y = inv_sqrt_d * (a @ (inv_sqrt_d * x))
        return 0.5 * (x + y)

    rng = make_rng(0x5EED)
    x = rng.standard_normal(g.n)
    x -= (w1 @ x) * w1
    norm = np.linalg.norm(x)
    if norm == 0:
        x = np.ones(g.n) / np.sqrt(g.n)
        x -= (w1 @ x) * w1
        norm = np.linalg.norm(x)
    x /= norm
    lam = 0.0
    for _ in range(max_iter):
        y = apply_s(x)
        y -= (w1 @ y) * w1
        norm = np.linalg.norm(y)
        if norm < 1e-300:
            return 0.0
        x_new = y / norm
        lam = float(x_new @ apply_s(x_new))
        residual = np.linalg.norm(apply_s(x_new) - lam * x_new - ((w1 @ apply_s(x_new)) * w1))
        x = x_new
        if residual <= tol:
            return min(max(lam, 0.0), 1.0)
    raise NoConvergence(f"power iteration did not reach tol={tol} in {max_iter} steps")


def conductance_cheeger_bounds(
    g: Graph, tol: float = 1e-9, max_iter: int = 10**6
) -> ConductanceResult:
    """Certified conductance interval from the spectral gap.

    With lam2 the second eigenvalue of the plain walk matrix (recovered from
    the lazy iteration as 2*lam2_lazy - 1), the conductance lies in
    [(1 - lam2)/2, sqrt(1 - lam2)].
    """
    if not g.is_connected():
        raise Disconnected("Cheeger bounds need a connected graph")
    lam2_lazy = lazy_second_eigenvalue(g, tol=tol, max_iter=max_iter)
    gap = 2.0 * (1.0 - lam2_lazy)  # 1 - lam2 of the plain walk
    lower = gap / 2.0
    upper = float(np.sqrt(gap))
    return ConductanceResult(
        value=lower, mode="cheeger-bounds", lower=lower, upper=upper
    )


def conductance(g: Graph, tol: float = 1e-9) -> ConductanceResult:
    """Exact conductance when enumeration is affordable, Cheeger bounds otherwise."""
    if g.n <= EXACT_CONDUCTANCE_MAX_N:
        return conductance_exact(g)
    return conductance_cheeger_bounds(g, tol=tol)


def write_edge_list(g: Graph, path) -> None:
    """Serialize as text: header "n m", then one "u v" line per edge, u < v."""
    edges = g.edge_array()
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v in edges:
            fh.write(f"{u} {v}\n")


def read_edge_list(path) -> Graph:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise InvalidParams("expected header line 'n m'")
        n, m = int(header[0]), int(header[1])
        edges = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u, v = line.split()
            edges.append((int(u), int(v)))
    if len(edges) != m:
        raise InvalidParams(f"header promises {m} edges, file has {len(edges)}")
    return build_graph(edges, n)


def petersen_graph() -> Graph:
    """The Petersen graph (outer 5-cycle, inner pentagram, spokes)."""
    edges = [(i, (i + 1) % 5) for i in range(5)]
    edges += [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    edges += [(i, i + 5) for i in range(5)]
    return build_graph(edges, 10)


def complete_graph(n: int) -> Graph:
    if n < 2:
        raise InvalidParams("complete graph needs n >= 2")
    return _from_canonical_edges(
        [(i, j) for i in range(n) for j in range(i + 1, n)], n
    )


def star_graph(n: int) -> Graph:
    """Star on n nodes: node 0 is the hub."""
    if n < 2:
        raise InvalidParams("star needs n >= 2")
    return _from_canonical_edges([(0, i) for i in range(1, n)], n)


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise InvalidParams("cycle needs n >= 3")
    return generate_circulant(n, 1)


def path_graph(n: int) -> Graph:
    if n < 2:
        raise InvalidParams("path needs n >= 2")
    return _from_canonical_edges([(i, i + 1) for i in range(n - 1)], n)
