"""Exact small-instance computations used as ground truth.

Everything here is enumeration or linear algebra over the full Markov chain
of the lazy standard voter model: absorption probabilities and expected
absorption times from the fundamental-matrix equations, the exact one-step
law of the minority volume by convolving independent per-node increments,
drift certificates against the analytic one-step bounds, and brute-force
checks of the third-moment identity and the concave replacement inequality.

Opinion-permutation symmetry is deliberately not exploited; at oracle scale
correctness beats speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as iter_product

import gmpy2
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graphs import Graph

FIXATION_MAX_N = 14
CONSENSUS_TIME_MAX_N = 12
BOUNDARY_MAX = 30
RATIONAL_MAX_N = 8
RATIONAL_MAX_TRANSIENT = 64
TRANSITION_BUDGET = 20_000_000
FLOAT_RESIDUAL_TOL = 1e-10


class OracleError(Exception):
    pass


class TooLarge(OracleError):
    pass


class BoundaryTooLarge(OracleError):
    pass


class PreconditionCutTooLarge(OracleError):
    pass


class SupportTooLarge(OracleError):
    pass


class NonzeroMean(OracleError):
    pass


@dataclass
class ChainSolution:
    """Absorption data for one start state of the full opinion chain."""

    absorption_probabilities: dict[int, float] | None
    expected_absorption_time: float
    state_space_size: int
    exact: bool
    residual: float | None = None


@dataclass
class OneStepDistribution:
    """Exact law of the tracked side's volume after one lazy standard round."""

    support: np.ndarray
    pmf: np.ndarray
    mean_volume: float
    expected_psi: float
    tracked_opinion: int
    current_volume: int
    m: int

    def psi(self) -> float:
        return float(np.sqrt(self.current_volume))


@dataclass
class DriftCertificate:
    """One-state comparison of the exact drift against an analytic bound."""

    kind: str
    state_bits: int
    psi: float
    exact_expected_psi_next: float
    bound: float
    satisfied: bool
    details: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "state_bits": self.state_bits,
            "exact": self.exact_expected_psi_next,
            "bound": self.bound,
            "satisfied": self.satisfied,
        }


def _as_state(assignment) -> np.ndarray:
    return np.asarray(assignment, dtype=np.int64)


def _lambda(g: Graph, state: np.ndarray) -> np.ndarray:
    diff = state[g.indices] != np.repeat(state, g.degrees)
    return np.add.reduceat(diff, g.indptr[:-1]).astype(np.int64)


def _node_options(g: Graph, state: np.ndarray):
    """Per-node list of (new opinion, numerator) with denominator 2*d_u.

    Staying put has numerator d_u + (#neighbours sharing the opinion); each
    other opinion o present in the neighbourhood has numerator count(o).
    """
    options = []
    for u in range(g.n):
        cur = int(state[u])
        nbr_ops, counts = np.unique(state[g.neighbors(u)], return_counts=True)
        d = int(g.degrees[u])
        stay = d
        lst = []
        for o, c in zip(nbr_ops.tolist(), counts.tolist()):
            if o == cur:
                stay += c
            else:
                lst.append((o, c))
        lst.append((cur, stay))
        options.append((lst, 2 * d))
    return options


def _successors(g: Graph, state: np.ndarray, rational: bool):
    """All reachable next states with exact transition probabilities."""
    options = _node_options(g, state)
    var_nodes = [u for u, (lst, _) in enumerate(options) if len(lst) > 1]
    out = []
    choice_lists = [options[u][0] for u in var_nodes]
    dens = [options[u][1] for u in var_nodes]
    for combo in iter_product(*choice_lists):
        nxt = state.copy()
        if rational:
            p = gmpy2.mpq(1)
            for (o, num), den in zip(combo, dens):
                p *= gmpy2.mpq(num, den)
        else:
            p = 1.0
            for (o, num), den in zip(combo, dens):
                p *= num / den
        for u, (o, _) in zip(var_nodes, combo):
            nxt[u] = o
        out.append((nxt, p))
    return out


def _transition_count(g: Graph, state: np.ndarray) -> int:
    count = 1
    for lst, _ in _node_options(g, state):
        count *= len(lst)
        if count > TRANSITION_BUDGET:
            return count
    return count


def _reachable(g: Graph, init: np.ndarray, rational: bool):
    """BFS over reachable states; returns ordered keys and successor table."""
    key0 = bytes(init.astype(np.int8))
    frontier = [init]
    index = {key0: 0}
    states = [init.copy()]
    succs = []
    budget = 0
    pos = 0
    while pos < len(frontier):
        state = frontier[pos]
        pos += 1
        if len(np.unique(state)) == 1:
            succs.append(None)  # absorbing
            continue
        budget += _transition_count(g, state)
        if budget > TRANSITION_BUDGET:
            raise TooLarge(
                f"transition budget exceeded ({budget} > {TRANSITION_BUDGET})"
            )
        rows = []
        for nxt, p in _successors(g, state, rational):
            k = bytes(nxt.astype(np.int8))
            j = index.get(k)
            if j is None:
                j = len(states)
                index[k] = j
                states.append(nxt.copy())
                frontier.append(states[-1])
            rows.append((j, p))
        succs.append(rows)
    return states, succs


def _solve_rational(n_states, succs, transient, targets, want_time):
    """Gaussian elimination over exact rationals for (I - Q) x = b."""
    t_index = {s: i for i, s in enumerate(transient)}
    nt = len(transient)
    ncols = len(targets) + (1 if want_time else 0)
    aug = [
        [gmpy2.mpq(0) for _ in range(nt + ncols)] for _ in range(nt)
    ]
    for i, s in enumerate(transient):
        aug[i][i] = gmpy2.mpq(1)
        for j, p in succs[s]:
            tj = t_index.get(j)
            if tj is not None:
                aug[i][tj] -= p
            else:
                for c, target_set in enumerate(targets):
                    if j in target_set:
                        aug[i][nt + c] += p
        if want_time:
            aug[i][nt + len(targets)] = gmpy2.mpq(1)
    for col in range(nt):
        piv = next(r for r in range(col, nt) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(nt):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return aug, t_index


def _solve_float(n_states, succs, transient, targets, want_time):
    t_index = {s: i for i, s in enumerate(transient)}
    nt = len(transient)
    rows, cols, vals = [], [], []
    ncols = len(targets) + (1 if want_time else 0)
    b = np.zeros((nt, ncols))
    for i, s in enumerate(transient):
        rows.append(i)
        cols.append(i)
        vals.append(1.0)
        for j, p in succs[s]:
            tj = t_index.get(j)
            if tj is not None:
                rows.append(i)
                cols.append(tj)
                vals.append(-p)
            else:
                for c, target_set in enumerate(targets):
                    if j in target_set:
                        b[i, c] += p
        if want_time:
            b[i, len(targets)] = 1.0
    a = sp.csr_matrix((vals, (rows, cols)), shape=(nt, nt))
    x = spla.spsolve(a.tocsc(), b)
    x = np.atleast_2d(x)
    if x.shape[0] != nt:
        x = x.T
    residual = float(np.abs(a @ x - b).max())
    if residual > FLOAT_RESIDUAL_TOL:
        raise ArithmeticError(f"linear solve residual {residual} above tolerance")
    return x, t_index, residual


def exact_fixation_probability(
    g: Graph, assignment, mode: str = "auto"
) -> ChainSolution:
    """Probability that opinion 0 prevails, by solving the absorption system.

    Two opinions only; exact rationals up to n = 8, certified doubles up to
    n = 14.
    """
    state = _as_state(assignment)
    if g.n > FIXATION_MAX_N:
        raise TooLarge(f"fixation solve capped at n = {FIXATION_MAX_N}")
    ops = set(np.unique(state).tolist())
    if not ops <= {0, 1}:
        raise ValueError("fixation solver is for two opinions labelled 0 and 1")
    # auto: rationals only while Gaussian elimination over exact fractions
    # stays cheap; dense chains near the cap fall back to certified doubles
    rational = mode == "exact" or (
        mode == "auto"
        and g.n <= RATIONAL_MAX_N
        and 2 ** g.n - 2 <= RATIONAL_MAX_TRANSIENT
    )
    states, succs = _reachable(g, state, rational)
    absorbing0 = {
        i for i, s in enumerate(states) if (s == 0).all()
    }
    absorbing1 = {i for i, s in enumerate(states) if (s == 1).all()}
    transient = [i for i, s in enumerate(succs) if s is not None]
    if not transient:
        p0 = 1.0 if (state == 0).all() else 0.0
        return ChainSolution({0: p0, 1: 1.0 - p0}, 0.0, len(states), True, 0.0)
    if rational:
        aug, t_index = _solve_rational(
            len(states), succs, transient, [absorbing0, absorbing1], True
        )
        i = t_index[0]
        nt = len(transient)
        p0 = float(aug[i][nt])
        p1 = float(aug[i][nt + 1])
        t = float(aug[i][nt + 2])
        return ChainSolution({0: p0, 1: p1}, t, len(states), True, 0.0)
    x, t_index, residual = _solve_float(
        len(states), succs, transient, [absorbing0, absorbing1], True
    )
    i = t_index[0]
    return ChainSolution(
        {0: float(x[i, 0]), 1: float(x[i, 1])}, float(x[i, 2]), len(states), False, residual
    )


def exact_expected_consensus_time(g: Graph, assignment) -> ChainSolution:
    """Exact E[consensus time] by block-triangular fundamental-matrix solves.

    Any number of opinions; states are grouped by their surviving opinion
    set (which never grows), so each group yields a modest dense solve.
    """
    state = _as_state(assignment)
    if g.n > CONSENSUS_TIME_MAX_N:
        raise TooLarge(f"consensus-time solve capped at n = {CONSENSUS_TIME_MAX_N}")
    states, succs = _reachable(g, state, rational=False)
    groups: dict[tuple, list[int]] = {}
    for i, s in enumerate(states):
        key = tuple(sorted(np.unique(s).tolist()))
        groups.setdefault(key, []).append(i)
    expected = np.zeros(len(states))
    order = sorted(groups.keys(), key=lambda k: (len(k), k))
    worst_residual = 0.0
    for key in order:
        members = groups[key]
        if len(key) == 1:
            continue  # consensus states: E[T] = 0
        local = {s: i for i, s in enumerate(members)}
        nl = len(members)
        rows, cols, vals = [], [], []
        b = np.ones(nl)
        for li, s in enumerate(members):
            rows.append(li)
            cols.append(li)
            vals.append(1.0)
            for j, p in succs[s]:
                lj = local.get(j)
                if lj is not None:
                    rows.append(li)
                    cols.append(lj)
                    vals.append(-p)
                else:
                    b[li] += p * expected[j]
        a = sp.csr_matrix((vals, (rows, cols)), shape=(nl, nl))
        x = spla.spsolve(a.tocsc(), b)
        x = np.atleast_1d(x)
        worst_residual = max(worst_residual, float(np.abs(a @ x - b).max()))
        if worst_residual > FLOAT_RESIDUAL_TOL:
            raise ArithmeticError(
                f"linear solve residual {worst_residual} above tolerance"
            )
        for li, s in enumerate(members):
            expected[s] = x[li]
    return ChainSolution(None, float(expected[0]), len(states), False, worst_residual)


def drift_variable_laws(g: Graph, assignment):
    """The per-node increment laws from the one-step drift decomposition.

    X_u is +-d_u with probability lam/(2 d_u) (sign by side, minority
    negative); Y_u replaces the outside +d_u jump by +lam_u with probability
    1/2, preserving |E| while shrinking the upside. Interior nodes are
    omitted (their laws are point masses at 0). Returns (x_laws, y_laws,
    tracked volume).
    """
    state = _as_state(assignment)
    lam = _lambda(g, state)
    vol0 = int(g.degrees[state == 0].sum())
    vol1 = int(2 * g.m - vol0)
    tracked = 0 if vol0 <= vol1 else 1
    vol = min(vol0, vol1)
    x_laws, y_laws = [], []
    for u in np.flatnonzero(lam > 0):
        d = int(g.degrees[u])
        p = lam[u] / (2.0 * d)
        if state[u] == tracked:
            x_laws.append((np.array([-d, 0.0]), np.array([p, 1 - p])))
            y_laws.append((np.array([-d, 0.0]), np.array([p, 1 - p])))
        else:
            x_laws.append((np.array([float(d), 0.0]), np.array([p, 1 - p])))
            y_laws.append(
                (np.array([float(lam[u]), 0.0]), np.array([0.5, 0.5]))
            )
    return x_laws, y_laws, vol


def exact_one_step_distribution(g: Graph, assignment) -> OneStepDistribution:
    """Exact pmf of the tracked side's next volume (two opinions).

    The next volume is the current one plus a sum of independent per-node
    increments, so its law is the convolution of the boundary nodes' laws;
    the expected potential applies the min(vol, 2m - vol) flip exactly.
    """
    state = _as_state(assignment)
    ops = set(np.unique(state).tolist())
    if not ops <= {0, 1}:
        raise ValueError("one-step law is for two opinions labelled 0 and 1")
    lam = _lambda(g, state)
    boundary = np.flatnonzero(lam > 0)
    if boundary.shape[0] > BOUNDARY_MAX:
        raise BoundaryTooLarge(
            f"boundary of {boundary.shape[0]} nodes exceeds {BOUNDARY_MAX}"
        )
    vol0 = int(g.degrees[state == 0].sum())
    vol1 = int(2 * g.m - vol0)
    tracked = 0 if vol0 <= vol1 else 1
    vol = min(vol0, vol1)
    neg = int(sum(g.degrees[u] for u in boundary if state[u] == tracked))
    pos = int(sum(g.degrees[u] for u in boundary if state[u] != tracked))
    pmf = np.zeros(neg + pos + 1)
    pmf[neg] = 1.0  # index = offset + neg
    for u in boundary:
        d = int(g.degrees[u])
        p = lam[u] / (2.0 * d)
        nxt = pmf * (1 - p)
        if state[u] == tracked:
            nxt[: pmf.shape[0] - d] += p * pmf[d:]
        else:
            nxt[d:] += p * pmf[: pmf.shape[0] - d]
        pmf = nxt
    support = vol + np.arange(-neg, pos + 1)
    keep = pmf > 0
    support, pmf = support[keep], pmf[keep]
    mean_volume = float(support @ pmf)
    flipped = np.minimum(support, 2 * g.m - support)
    expected_psi = float(np.sqrt(np.maximum(flipped, 0)) @ pmf)
    return OneStepDistribution(
        support=support,
        pmf=pmf,
        mean_volume=mean_volume,
        expected_psi=expected_psi,
        tracked_opinion=tracked,
        current_volume=vol,
        m=g.m,
    )


def _state_bits(state: np.ndarray, opinion: int) -> int:
    bits = 0
    for u in np.flatnonzero(state == opinion):
        bits |= 1 << int(u)
    return bits


def verify_drift_upper(g: Graph, assignment) -> DriftCertificate:
    """Certify E[psi'] <= psi - sum_{u in minority} lam_u d_u / (32 psi^3).

    The certified drop term sums over the minority side (the form the
    one-step analysis actually establishes); the all-nodes variant is
    reported alongside but not asserted.
    """
    state = _as_state(assignment)
    dist = exact_one_step_distribution(g, state)
    if dist.current_volume == 0:
        raise ValueError("drift bound needs a nonempty minority side")
    lam = _lambda(g, state)
    psi = dist.psi()
    minority = state == dist.tracked_opinion
    drop_minority = float((lam[minority] * g.degrees[minority]).sum())
    drop_all = float((lam * g.degrees).sum())
    bound = psi - drop_minority / (32.0 * psi**3)
    bound_all = psi - drop_all / (32.0 * psi**3)
    satisfied = dist.expected_psi <= bound + 1e-12
    return DriftCertificate(
        kind="upper",
        state_bits=_state_bits(state, dist.tracked_opinion),
        psi=psi,
        exact_expected_psi_next=dist.expected_psi,
        bound=bound,
        satisfied=satisfied,
        details={
            "bound_all_nodes": bound_all,
            "satisfied_all_nodes": dist.expected_psi <= bound_all + 1e-12,
        },
    )


def verify_drift_lower(g: Graph, assignment, c: float, phi: float) -> DriftCertificate:
    """Certify E[psi'] >= psi - c * phi * d / psi under a small-cut state."""
    state = _as_state(assignment)
    if not g.is_regular():
        raise ValueError("lower drift bound assumes a regular graph")
    d = int(g.degrees[0])
    lam = _lambda(g, state)
    cut = int(lam[state == 0].sum())
    if cut > c * phi * d * g.n:
        raise PreconditionCutTooLarge(
            f"cut {cut} exceeds c*phi*d*n = {c * phi * d * g.n:.3g}"
        )
    dist = exact_one_step_distribution(g, state)
    if dist.current_volume == 0:
        raise ValueError("drift bound needs a nonempty minority side")
    psi = dist.psi()
    bound = psi - c * phi * d / psi
    satisfied = dist.expected_psi >= bound - 1e-12
    return DriftCertificate(
        kind="lower",
        state_bits=_state_bits(state, dist.tracked_opinion),
        psi=psi,
        exact_expected_psi_next=dist.expected_psi,
        bound=bound,
        satisfied=satisfied,
        details={"cut": cut},
    )


def _joint_sum(laws):
    size = 1
    for values, _ in laws:
        size *= len(values)
        if size > 1_000_000:
            raise SupportTooLarge(f"joint support of {size} atoms exceeds 1e6")
    sums = np.zeros(1)
    probs = np.ones(1)
    for values, p in laws:
        sums = (sums[:, None] + np.asarray(values)[None, :]).ravel()
        probs = (probs[:, None] * np.asarray(p)[None, :]).ravel()
    return sums, probs


@dataclass
class MomentReport:
    brute_force: float
    formula: float
    max_abs_deviation: float
    atoms: int


def third_moment_identity(dists) -> MomentReport:
    """Compare brute-force E[(sum Z_i)^3] against the componentwise formula.

    Requires independent laws with zero total mean; the joint product space
    is enumerated exactly.
    """
    laws = [(np.asarray(v, dtype=float), np.asarray(p, dtype=float)) for v, p in dists]
    for values, p in laws:
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("law probabilities must sum to 1")
    total_mean = sum(float(v @ p) for v, p in laws)
    if abs(total_mean) > 1e-12:
        raise NonzeroMean(f"sum of means is {total_mean}, identity needs 0")
    sums, probs = _joint_sum(laws)
    brute = float((sums**3) @ probs)
    formula = 0.0
    for v, p in laws:
        e1 = float(v @ p)
        e2 = float((v**2) @ p)
        e3 = float((v**3) @ p)
        formula += e3 - 3.0 * e2 * e1 + 2.0 * e1**3
    return MomentReport(
        brute_force=brute,
        formula=formula,
        max_abs_deviation=abs(brute - formula),
        atoms=len(sums),
    )


@dataclass
class DominanceReport:
    name: str
    expectation_x: float
    expectation_y: float
    holds: bool
    concave: bool


def default_concave_tests(vol: int, cap: float = 1.0):
    """The three concave test functions used for the replacement inequality."""
    k = float(cap)
    return [
        ("sqrt_vol_plus_x", lambda x: np.sqrt(np.maximum(vol + x, 0.0))),
        ("neg_square", lambda x: -(x**2)),
        ("min_x_cap", lambda x: np.minimum(x, k)),
    ]


def concave_dominance_check(x_laws, y_laws, fs) -> list[DominanceReport]:
    """Verify E[f(sum X)] <= E[f(sum Y)] for each concave test function.

    Both joint laws are enumerated exactly; a test function failing a
    second-difference concavity scan on the joint support is flagged instead
    of asserted.
    """
    xs, xp = _joint_sum(x_laws)
    ys, yp = _joint_sum(y_laws)
    grid = np.unique(np.concatenate([xs, ys]))
    reports = []
    for name, f in fs:
        ex = float(f(xs) @ xp)
        ey = float(f(ys) @ yp)
        concave = True
        if grid.shape[0] >= 3:
            vals = f(grid)
            slopes = np.diff(vals) / np.diff(grid)
            concave = bool((np.diff(slopes) <= 1e-9).all())
        reports.append(
            DominanceReport(
                name=name,
                expectation_x=ex,
                expectation_y=ey,
                holds=bool(ex <= ey + 1e-12),
                concave=concave,
            )
        )
    return reports
