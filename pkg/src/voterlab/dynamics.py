"""Synchronous-round simulation of the standard and biased voter models.

A round is double-buffered: every node samples a neighbour and an adoption
coin against the start-of-round assignment, and all updates land at once.
The step machinery re-expresses a round as an ordered walk over the two
boundary sets, balancing the running cut-degree sums of the two sides to
within one degree; the good-sequence monitor and checkpoint schedule then
audit growth properties of the preferred opinion on such step traces.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .graphs import Graph
from .rng import make_rng

DEFAULT_B_TAU = 129.0
DEFAULT_B_TAU_PRIME = 96.0
DEFAULT_B_TAU_TRIPLE = 1.0
GOOD_SEQ_ELL_COEFF = 132.0
GOOD_SEQ_BETA_PRIME_COEFF = 600.0
DEFAULT_BETA = 8.0


class DynamicsError(Exception):
    pass


class InconsistentState(DynamicsError):
    pass


class NonRegularGraph(DynamicsError):
    pass


class NonRegularGraphWarning(UserWarning):
    pass


class ProviderDegreeMismatch(DynamicsError):
    pass


class BalanceViolation(DynamicsError):
    """The step schedule left the |Lambda - Lambda'| <= d corridor."""


class TraceTooShort(DynamicsError):
    pass


class ScheduleExhausted(DynamicsError):
    pass


@dataclass(frozen=True)
class BiasConfig:
    """Per-opinion popularity; opinion 0 is preferred with popularity 1."""

    alphas: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=np.float64)
        object.__setattr__(self, "alphas", a)
        if a.ndim != 1 or a.shape[0] < 2:
            raise ValueError("need popularity values for at least two opinions")
        if a[0] != 1.0:
            raise ValueError("the preferred opinion must have popularity 1")
        if a[1] >= 1.0:
            raise ValueError("the second opinion's popularity must be below 1")
        if (np.diff(a[1:]) > 0).any() or a[-1] < 0:
            raise ValueError("popularities must be non-increasing and non-negative")

    @property
    def epsilon(self) -> float:
        return 1.0 - float(self.alphas[1])

    @property
    def kappa(self) -> int:
        return int(self.alphas.shape[0])


@dataclass
class OpinionState:
    """Assignment of opinions to nodes with cached per-opinion aggregates.

    ``lam[u]`` counts u's neighbours holding a different opinion (for two
    opinions this equals the cut degree). A state is tied to the graph it
    was computed against only through n and the degree sequence.
    """

    assignment: np.ndarray
    kappa: int
    round: int
    counts: np.ndarray
    volumes: np.ndarray
    lam: np.ndarray

    @classmethod
    def from_assignment(
        cls, g: Graph, assignment, kappa: int | None = None, round: int = 0
    ) -> "OpinionState":
        a = np.asarray(assignment, dtype=np.int64)
        if a.shape != (g.n,):
            raise InconsistentState(f"assignment shape {a.shape} != ({g.n},)")
        if a.min(initial=0) < 0:
            raise InconsistentState("opinions must be non-negative")
        k = int(kappa if kappa is not None else a.max() + 1)
        if a.max(initial=0) >= k:
            raise InconsistentState(f"opinion ids must lie in [0, {k})")
        counts = np.bincount(a, minlength=k).astype(np.int64)
        volumes = np.bincount(a, weights=g.degrees, minlength=k).astype(np.int64)
        lam = np.zeros(g.n, dtype=np.int64)
        if g.n > 1:
            kernels.lambda_counts(g.indptr, g.indices, a, lam)
        return cls(a, k, round, counts, volumes, lam)

    @property
    def n(self) -> int:
        return int(self.assignment.shape[0])

    def is_consensus(self) -> bool:
        return bool((self.counts == self.n).any())

    def consensus_opinion(self) -> int | None:
        hits = np.flatnonzero(self.counts == self.n)
        return int(hits[0]) if hits.size else None

    def minority_volume(self) -> int:
        """vol(S_t): the smaller-volume side of a two-opinion split."""
        if self.kappa != 2:
            raise InconsistentState("minority volume is defined for two opinions")
        return int(self.volumes.min())

    def psi(self) -> float:
        return math.sqrt(self.minority_volume())

    def cut(self) -> int:
        """Edges joining differently-opinionated endpoints."""
        return int(self.lam.sum()) // 2

    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.lam > 0)

    def validate(self, g: Graph) -> None:
        if self.assignment.shape != (g.n,):
            raise InconsistentState("state does not match graph size")
        if int(self.volumes.sum()) != 2 * g.m:
            raise InconsistentState("cached volumes do not sum to 2m")


def make_initial_assignment(
    n: int, rule: str, kappa: int = 2, k: int = 1, rng=None, assignment=None
) -> np.ndarray:
    """Initial opinions: distinct per node, a balanced split, the preferred
    opinion on k random nodes, or an explicit vector."""
    if rule == "distinct":
        return np.arange(n, dtype=np.int64)
    if rule == "split":
        out = np.ones(n, dtype=np.int64)
        out[: n // 2] = 0
        return out
    if rule == "k-random":
        if rng is None:
            raise ValueError("k-random initial assignment needs an rng")
        out = np.ones(n, dtype=np.int64)
        chosen = rng.choice(n, size=k, replace=False)
        out[chosen] = 0
        return out
    if rule == "explicit":
        if assignment is None:
            raise ValueError("explicit rule needs an assignment")
        return np.asarray(assignment, dtype=np.int64)
    raise ValueError(f"unknown initial assignment rule {rule!r}")


def standard_voter_round(g: Graph, state: OpinionState, rng) -> OpinionState:
    """One synchronous lazy round: adopt a uniform neighbour's start-of-round
    opinion with probability 1/2."""
    state.validate(g)
    out = np.empty(g.n, dtype=np.int64)
    kernels.standard_round(
        g.indptr, g.indices, g.degrees, state.assignment, rng.random(g.n), out
    )
    return OpinionState.from_assignment(g, out, kappa=state.kappa, round=state.round + 1)


def biased_voter_round(
    g: Graph, state: OpinionState, bias: BiasConfig, rng, strict_regular: bool = False
) -> OpinionState:
    """One synchronous biased round: adopt the sampled neighbour's opinion i
    with probability alpha_i, keep otherwise."""
    state.validate(g)
    if not g.is_regular():
        if strict_regular:
            raise NonRegularGraph("biased rounds assume a regular graph")
        warnings.warn(
            "biased rounds on a non-regular graph", NonRegularGraphWarning, stacklevel=2
        )
    if bias.kappa < state.kappa:
        raise InconsistentState("bias config covers fewer opinions than the state")
    out = np.empty(g.n, dtype=np.int64)
    kernels.biased_round(
        g.indptr, g.indices, g.degrees, state.assignment, bias.alphas, rng.random(g.n), out
    )
    return OpinionState.from_assignment(g, out, kappa=state.kappa, round=state.round + 1)


@dataclass
class PotentialTracker:
    """Tracks psi, g(psi) = psi^2/(2cd), and Z = g(psi) + sum of phis."""

    c: float
    d: float
    psi: float = 0.0
    vol: int = 0
    phi_cumsum: float = 0.0

    def start(self, vol: int) -> None:
        self.vol = int(vol)
        self.psi = math.sqrt(vol)

    def update(self, vol: int, phi: float) -> None:
        self.vol = int(vol)
        self.psi = math.sqrt(vol)
        self.phi_cumsum += phi

    @property
    def g_value(self) -> float:
        return self.psi**2 / (2.0 * self.c * self.d)

    @property
    def z_value(self) -> float:
        return self.g_value + self.phi_cumsum

    def validate(self) -> None:
        if abs(self.psi**2 - self.vol) > 1e-9 * max(self.vol, 1):
            raise InconsistentState("psi^2 drifted away from the tracked volume")


@dataclass
class ThresholdConfig:
    """Constants b for the four cumulative-conductance stopping thresholds."""

    b_tau: float = DEFAULT_B_TAU
    b_tau_prime: float = DEFAULT_B_TAU_PRIME
    b_tau_double_prime: float | None = None  # defaults to 1/(18c)
    b_tau_triple_prime: float = DEFAULT_B_TAU_TRIPLE
    c: float = 1.0

    def targets(self, n: int, m: int, d_min: int) -> dict[str, float]:
        b_pp = (
            self.b_tau_double_prime
            if self.b_tau_double_prime is not None
            else 1.0 / (18.0 * self.c)
        )
        return {
            "tau": self.b_tau * m / d_min,  # sum of phi
            "tau_p": self.b_tau_prime * n * math.log(n),  # sum of phi^2
            "tau_pp": b_pp * n,  # sum of phi
            "tau_ppp": self.b_tau_triple_prime * math.log(n),  # sum of phi
        }


@dataclass
class TraceRecord:
    """Per-round observables plus stopping information for one run."""

    kappa: int
    rows: list = field(default_factory=list)
    phis: list = field(default_factory=list)
    T: int | None = None
    prevailing_opinion: int | None = None
    thresholds: dict = field(default_factory=dict)
    threshold_targets: dict = field(default_factory=dict)
    max_rounds: int = 0
    max_rounds_exceeded: bool = False
    seed: int | None = None
    steps: "StepTrace | None" = None
    good_sequence: "GoodSequenceReport | None" = None
    checkpoints: list | None = None

    def add_row(self, t, counts, vol_s, psi, cut, phi, consensus) -> None:
        self.rows.append(
            (t, tuple(int(c) for c in counts), vol_s, psi, cut, phi, consensus)
        )

    def to_csv(self, path) -> None:
        cols = ",".join(f"count{i}" for i in range(self.kappa))
        with open(path, "w") as fh:
            fh.write(f"t,{cols},volS,psi,cut,phi,consensus\n")
            for t, counts, vol_s, psi, cut, phi, consensus in self.rows:
                cstr = ",".join(str(c) for c in counts)
                fh.write(
                    f"{t},{cstr},{vol_s},{psi:.17g},{cut},{phi:.17g},{int(consensus)}\n"
                )

    def summary(self) -> dict:
        return {
            "T": self.T,
            "prevailing_opinion": self.prevailing_opinion,
            "thresholds": dict(self.thresholds),
            "threshold_targets": dict(self.threshold_targets),
            "max_rounds": self.max_rounds,
            "max_rounds_exceeded": self.max_rounds_exceeded,
            "seed": self.seed,
        }

    def write_summary(self, path, extra: dict | None = None) -> None:
        payload = self.summary()
        if extra:
            payload.update(extra)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


class _ThresholdTracker:
    def __init__(self, targets: dict[str, float]):
        self.targets = targets
        self.crossed: dict[str, int | None] = {k: None for k in targets}
        self.sum_phi = 0.0
        self.sum_phi_sq = 0.0

    def update(self, t: int, phi: float) -> None:
        self.sum_phi += phi
        self.sum_phi_sq += phi * phi
        for key, target in self.targets.items():
            if self.crossed[key] is None:
                acc = self.sum_phi_sq if key == "tau_p" else self.sum_phi
                if acc >= target:
                    self.crossed[key] = t


def run_until_consensus(
    provider,
    init,
    *,
    model: str = "standard",
    bias: BiasConfig | None = None,
    max_rounds: int,
    seed: int | None = None,
    rng=None,
    monitors: tuple = (),
    regeneration: bool = False,
    regeneration_node: int = 0,
    thresholds: ThresholdConfig | None = None,
    record_trace: bool = True,
    batch_rounds: int = 256,
) -> TraceRecord:
    """Drive a model against a graph provider until consensus or max_rounds.

    ``monitors`` may contain "balance" (hard step-schedule invariant check
    each round), "steps" (collect the full step trace), and "checkpoints".
    Regeneration re-seeds ``regeneration_node`` with the preferred opinion at
    the end of any round where it vanished. With no trace, no monitors, and a
    static provider, rounds run in batched kernels; results are identical to
    the general loop under the same seed.
    """
    if model not in ("standard", "biased"):
        raise ValueError(f"unknown model {model!r}")
    if model == "biased" and bias is None:
        raise ValueError("biased model needs a BiasConfig")
    if rng is None:
        rng = make_rng(seed if seed is not None else 0)
    degseq = provider.degree_sequence
    n = degseq.shape[0]
    m = int(degseq.sum()) // 2
    d_min = int(degseq.min()) if n else 0
    assignment = np.asarray(init, dtype=np.int64)
    kappa = bias.kappa if bias is not None else max(int(assignment.max()) + 1, 2)
    cfg = thresholds or ThresholdConfig()
    tracker = _ThresholdTracker(cfg.targets(n, m, d_min) if n > 1 else {})
    trace = TraceRecord(
        kappa=kappa, max_rounds=max_rounds, seed=seed, threshold_targets=tracker.targets
    )

    want_steps = "steps" in monitors or "good-sequence" in monitors
    want_balance = "balance" in monitors
    if int(assignment.max(initial=0)) >= kappa:
        raise InconsistentState("assignment uses opinion ids beyond kappa")
    fast_ok = (
        not record_trace
        and not want_steps
        and not want_balance
        and getattr(provider, "is_static", False)
    )
    if fast_ok:
        return _run_fast(
            provider, assignment, kappa, model, bias, max_rounds, rng, tracker,
            trace, regeneration, regeneration_node, batch_rounds,
        )

    state_assign = assignment.copy()
    counts = np.bincount(state_assign, minlength=kappa).astype(np.int64)
    step_builder = _StepTraceBuilder(n, kappa) if want_steps else None
    history = [state_assign.copy()]
    g = None
    alphas = bias.alphas if bias is not None else None
    t = 0
    consensus_at = None
    warned_irregular = False
    while True:
        volumes = np.bincount(state_assign, weights=degseq, minlength=kappa)
        vol_s = float(np.sort(volumes)[:-1].sum()) if kappa > 2 else float(volumes.min())
        psi = math.sqrt(max(vol_s, 0.0))
        consensus = bool((counts == n).any())
        if record_trace:
            if g is not None:
                lam = np.zeros(n, dtype=np.int64)
                kernels.lambda_counts(g.indptr, g.indices, state_assign, lam)
                cut = int(lam.sum()) // 2
            else:
                cut = 0
            phi_here = trace.phis[-1] if trace.phis else 0.0
            trace.add_row(t, counts, vol_s, psi, cut, phi_here, consensus)
        if consensus:
            consensus_at = t
            break
        if t >= max_rounds:
            trace.max_rounds_exceeded = True
            break
        g, phi = provider.next(t, history)
        if getattr(provider, "preserves_degrees", True) and not np.array_equal(
            g.degrees, degseq
        ):
            raise ProviderDegreeMismatch("provider changed the degree sequence")
        if model == "biased" and not g.is_regular() and not warned_irregular:
            warnings.warn(
                "biased rounds on a non-regular graph",
                NonRegularGraphWarning,
                stacklevel=2,
            )
            warned_irregular = True
        trace.phis.append(phi)
        tracker.update(t + 1, phi)
        rand_u = rng.random(n)
        new_assign = np.empty(n, dtype=np.int64)
        if model == "standard":
            kernels.standard_round(
                g.indptr, g.indices, g.degrees, state_assign, rand_u, new_assign
            )
        else:
            kernels.biased_round(
                g.indptr, g.indices, g.degrees, state_assign, alphas, rand_u, new_assign
            )
        if want_balance or want_steps:
            flipped = new_assign != state_assign
            schedule = decompose_round_into_steps(
                g,
                state_assign,
                preferred=0,
                flipped=flipped,
                start_sums=(step_builder.lam_total, step_builder.lam_prime_total)
                if step_builder
                else (0, 0),
            )
            if step_builder is not None:
                step_builder.extend(t + 1, schedule, state_assign, new_assign)
        state_assign = new_assign
        counts = np.bincount(state_assign, minlength=kappa).astype(np.int64)
        if regeneration and counts[0] == 0:
            counts[state_assign[regeneration_node]] -= 1
            state_assign[regeneration_node] = 0
            counts[0] += 1
        history.append(state_assign.copy())
        t += 1

    trace.T = consensus_at
    if consensus_at is not None:
        trace.prevailing_opinion = int(state_assign[0])
    trace.thresholds = tracker.crossed
    if step_builder is not None:
        d_val = int(degseq.max())
        trace.steps = step_builder.build(d_val, int(assignment.shape[0]))
        if "good-sequence" in monitors and bias is not None and len(trace.steps):
            try:
                trace.good_sequence = monitor_good_sequence(trace.steps, bias)
            except TraceTooShort:
                trace.good_sequence = None
    if "checkpoints" in monitors and bias is not None and record_trace and trace.phis:
        schedule = checkpoint_schedule(
            n, int(degseq.max()), bias, np.asarray(trace.phis),
            max_rounds=max_rounds, strict=False,
        )
        trace.checkpoints = []
        for t_j, zeta_j in schedule:
            if t_j is not None and t_j < len(trace.rows):
                observed = trace.rows[t_j][1][0]
                trace.checkpoints.append(
                    (t_j, zeta_j, int(observed), bool(observed >= zeta_j))
                )
            else:
                trace.checkpoints.append((t_j, zeta_j, None, None))
    return trace


def _run_fast(
    provider, assignment, kappa, model, bias, max_rounds, rng, tracker, trace,
    regeneration, regeneration_node, batch_rounds,
):
    g, phi = provider.next(0, [assignment])
    n = g.n
    opin = assignment.copy()
    counts = np.bincount(opin, minlength=kappa).astype(np.int64)
    lam = np.zeros(n, dtype=np.int64)
    kernels.lambda_counts(g.indptr, g.indices, opin, lam)
    total = 0
    done = counts.max() == n
    status = 0
    regen = regeneration_node if regeneration else -1
    batch = min(batch_rounds, 64)
    while not done and total < max_rounds:
        r = min(batch, max_rounds - total)
        block = rng.random((r, n))
        if model == "standard":
            consumed, finished = kernels.consensus_standard_batch(
                g.indptr, g.indices, g.degrees, opin, lam, counts, block
            )
            status = 1 if finished else 0
            done = bool(finished)
        else:
            consumed, status = kernels.consensus_biased_batch(
                g.indptr, g.indices, g.degrees, opin, lam, counts,
                bias.alphas, block, 0, regen,
            )
            done = status != 0
        total += consumed
        batch = min(batch * 2, batch_rounds)
    if done:
        trace.T = total
        trace.prevailing_opinion = int(opin[0])
    else:
        trace.max_rounds_exceeded = True
    # the schedule is constant, so crossings have a closed form
    for key, target in tracker.targets.items():
        acc = phi * phi if key == "tau_p" else phi
        if acc > 0:
            t_cross = int(math.ceil(target / acc))
            tracker.crossed[key] = t_cross if t_cross <= total else None
    trace.thresholds = tracker.crossed
    _ = status
    return trace


@dataclass
class StepSchedule:
    """One round decomposed into the balanced boundary-step order.

    ``sides[j]`` is 1 when the step's node holds the preferred opinion (a
    step of the preferred boundary) and 0 otherwise; ``lambda_sum`` and
    ``lambda_prime_sum`` carry the across-round running sums.
    """

    nodes: np.ndarray
    sides: np.ndarray
    lam: np.ndarray
    flipped: np.ndarray
    lambda_sum: np.ndarray
    lambda_prime_sum: np.ndarray
    start_lambda: int
    start_lambda_prime: int
    d_max: int

    def __len__(self) -> int:
        return int(self.nodes.shape[0])


def decompose_round_into_steps(
    g: Graph,
    assignment,
    preferred: int = 0,
    flipped=None,
    start_sums: tuple[int, int] = (0, 0),
) -> StepSchedule:
    """Order the boundary nodes of one round into balanced steps.

    Only nodes with at least one neighbour across the preferred/rest
    partition are scheduled (interior nodes cannot change sides and would
    contribute zero to either running sum). At every step the side whose
    running cut-degree sum is behind supplies its smallest-identifier
    unconsidered node, which keeps |Lambda - Lambda'| <= d; a violation
    raises BalanceViolation.
    """
    a = np.asarray(assignment, dtype=np.int64)
    pref = a == preferred
    cross = pref[g.indices] != np.repeat(pref, g.degrees)
    plam = np.add.reduceat(cross, g.indptr[:-1]).astype(np.int64) if g.m else np.zeros(
        g.n, dtype=np.int64
    )
    boundary = plam > 0
    side_pref = np.flatnonzero(boundary & pref)  # o = 1
    side_non = np.flatnonzero(boundary & ~pref)  # o = 0
    total = side_pref.shape[0] + side_non.shape[0]
    d_max = int(g.degrees.max()) if g.n else 0
    nodes = np.empty(total, dtype=np.int64)
    sides = np.empty(total, dtype=np.int8)
    lams = np.empty(total, dtype=np.int64)
    lsum = np.empty(total, dtype=np.int64)
    lpsum = np.empty(total, dtype=np.int64)
    big_l, big_lp = start_sums
    i0 = i1 = 0
    for j in range(total):
        take_non = big_l <= big_lp
        if take_non and i1 >= side_non.shape[0]:
            take_non = False
        if not take_non and i0 >= side_pref.shape[0]:
            take_non = True
        if take_non:
            u = int(side_non[i1])
            i1 += 1
            o = 0
            big_l += int(plam[u])
        else:
            u = int(side_pref[i0])
            i0 += 1
            o = 1
            big_lp += int(plam[u])
        if abs(big_l - big_lp) > d_max:
            raise BalanceViolation(
                f"|Lambda - Lambda'| = {abs(big_l - big_lp)} > d = {d_max} at step {j}"
            )
        nodes[j] = u
        sides[j] = o
        lams[j] = plam[u]
        lsum[j] = big_l
        lpsum[j] = big_lp
    flip_arr = (
        np.asarray(flipped, dtype=bool)[nodes] if flipped is not None
        else np.zeros(total, dtype=bool)
    )
    return StepSchedule(
        nodes=nodes,
        sides=sides,
        lam=lams,
        flipped=flip_arr,
        lambda_sum=lsum,
        lambda_prime_sum=lpsum,
        start_lambda=int(start_sums[0]),
        start_lambda_prime=int(start_sums[1]),
        d_max=d_max,
    )


class _StepTraceBuilder:
    def __init__(self, n: int, kappa: int):
        self.n = n
        self.kappa = kappa
        self.chunks: list = []
        self.lam_total = 0
        self.lam_prime_total = 0
        self.initial_pref_size: int | None = None

    def extend(self, round_id, schedule: StepSchedule, old_assign, new_assign):
        start_size = int((old_assign == 0).sum())
        if self.initial_pref_size is None:
            self.initial_pref_size = start_size
        nodes = schedule.nodes
        delta = np.zeros(len(schedule), dtype=np.int8)
        flips = schedule.flipped
        was_pref = old_assign[nodes] == 0
        now_pref = new_assign[nodes] == 0
        delta[flips & ~was_pref & now_pref] = 1
        delta[flips & was_pref] = -1
        # sizes are anchored on the actual start-of-round count so that
        # between-round regeneration bumps are reflected
        sizes = start_size + np.cumsum(delta.astype(np.int64))
        self.chunks.append(
            (
                nodes,
                schedule.sides,
                schedule.lam,
                flips,
                delta,
                np.full(len(schedule), round_id, dtype=np.int64),
                schedule.lambda_sum,
                schedule.lambda_prime_sum,
                sizes,
            )
        )
        self.lam_total = int(schedule.lambda_sum[-1]) if len(schedule) else self.lam_total
        self.lam_prime_total = (
            int(schedule.lambda_prime_sum[-1]) if len(schedule) else self.lam_prime_total
        )

    def build(self, d: int, n: int) -> "StepTrace":
        if not self.chunks:
            return StepTrace(
                nodes=np.empty(0, np.int64),
                sides=np.empty(0, np.int8),
                lam=np.empty(0, np.int64),
                flipped=np.empty(0, bool),
                delta=np.empty(0, np.int8),
                round_ids=np.empty(0, np.int64),
                lambda_sum=np.empty(0, np.int64),
                lambda_prime_sum=np.empty(0, np.int64),
                pref_sizes=np.empty(0, np.int64),
                initial_pref_size=self.initial_pref_size or 0,
                n=n,
                d=d,
            )
        cols = [np.concatenate([c[i] for c in self.chunks]) for i in range(9)]
        pref_sizes = cols[8]
        return StepTrace(
            nodes=cols[0],
            sides=cols[1],
            lam=cols[2],
            flipped=cols[3],
            delta=cols[4],
            round_ids=cols[5],
            lambda_sum=cols[6],
            lambda_prime_sum=cols[7],
            pref_sizes=pref_sizes,
            initial_pref_size=int(self.initial_pref_size or 0),
            n=n,
            d=d,
        )


@dataclass
class StepTrace:
    """Concatenated step schedules of a whole run, in step order."""

    nodes: np.ndarray
    sides: np.ndarray
    lam: np.ndarray
    flipped: np.ndarray
    delta: np.ndarray
    round_ids: np.ndarray
    lambda_sum: np.ndarray
    lambda_prime_sum: np.ndarray
    pref_sizes: np.ndarray
    initial_pref_size: int
    n: int
    d: int

    def __len__(self) -> int:
        return int(self.nodes.shape[0])

    def interval_end(self, i: int, k: int) -> int | None:
        """First step index j with Lambda(j) - Lambda(i) >= k, 1-based steps.

        ``i = 0`` addresses the state before the first step. Returns None if
        the trace ends first.
        """
        base = 0 if i == 0 else int(self.lambda_sum[i - 1])
        j = int(np.searchsorted(self.lambda_sum, base + k, side="left")) + 1
        return j if j <= len(self) else None


@dataclass
class GoodSequenceReport:
    """Audit of the growth properties of a step trace."""

    t_prime: int
    ell: float
    beta_prime: float
    violations: list
    prevailed_step: int | None
    y_stats: dict
    checkpoints: list | None = None

    @property
    def is_good(self) -> bool:
        return not self.violations


def good_sequence_parameters(
    n: int, d: int, bias: BiasConfig, beta: float = DEFAULT_BETA
) -> tuple[float, float, int]:
    """(ell, beta', T') for the good-sequence definitions."""
    a1 = float(bias.alphas[1])
    if not 0.0 < a1 < 1.0:
        raise ValueError("good-sequence parameters need 0 < alpha_1 < 1")
    ell = GOOD_SEQ_ELL_COEFF * beta * math.log(n) / (1.0 - a1) ** 2
    beta_prime = GOOD_SEQ_BETA_PRIME_COEFF * d / (a1 * (1.0 - a1) ** 2)
    t_prime = int(2 * beta_prime * n)
    return ell, beta_prime, t_prime


def monitor_good_sequence(
    trace: StepTrace,
    bias: BiasConfig,
    beta: float = DEFAULT_BETA,
    ell: float | None = None,
    beta_prime: float | None = None,
    gamma_values=None,
    checkpoints: list | None = None,
) -> GoodSequenceReport:
    """Evaluate the four good-sequence properties on a step trace.

    (a) the preferred opinion prevails within T' steps; (b) its size never
    drops to one node or fewer; (c) no window ever loses more than ell nodes
    (checked as the running drawdown at cut-degree-advancing steps); (d) a
    window of cut-degree budget gamma * beta' gains more than gamma nodes,
    over a geometric grid of gamma values. Requires a trace produced under
    regeneration so the process is defined throughout.
    """
    ell_def, bp_def, t_prime_def = good_sequence_parameters(
        trace.n, trace.d, bias, beta
    )
    ell = ell_def if ell is None else float(ell)
    beta_prime = bp_def if beta_prime is None else float(beta_prime)
    t_prime = int(2 * beta_prime * trace.n)
    length = len(trace)
    sizes = np.concatenate(
        [[trace.initial_pref_size], trace.pref_sizes]
    )  # sizes[j] = after step j
    lam_cum = np.concatenate([[0], trace.lambda_sum])
    horizon = min(length, t_prime)
    prevailed = np.flatnonzero(sizes == trace.n)
    prevailed_step = int(prevailed[0]) if prevailed.size else None
    violations: list = []
    if prevailed_step is None and length < t_prime:
        raise TraceTooShort(
            f"trace of {length} steps ended before prevailing and before T' = {t_prime}"
        )
    if prevailed_step is None or prevailed_step > t_prime:
        violations.append(("a", t_prime))
    weak = np.flatnonzero(sizes[: horizon + 1] <= 1)
    if weak.size:
        violations.append(("b", int(weak[0])))
    # (c): at every cut-degree-advancing step, compare against the best
    # earlier size whose window budget stays within T'
    advancing = np.flatnonzero(trace.sides[:horizon] == 0) + 1
    if advancing.size:
        run_max = np.maximum.accumulate(sizes)
        if lam_cum[advancing[-1]] <= t_prime:
            best_prior = run_max[advancing - 1]
        else:
            lo = np.searchsorted(lam_cum, lam_cum[advancing] - t_prime, side="left")
            best_prior = np.array(
                [
                    sizes[int(a) : int(b)].max()
                    for a, b in zip(lo, advancing)
                ]
            )
        drops = best_prior - sizes[advancing]
        bad = np.flatnonzero(drops > ell)
        if bad.size:
            violations.append(("c", int(advancing[bad[0]])))
    # (d): geometric grid of gamma values
    if gamma_values is None:
        gamma_values = []
        gval = ell
        while gval <= t_prime and gval > 0:
            gamma_values.append(gval)
            gval *= 2
    y_stats = {}
    for gval in gamma_values:
        k = gval * beta_prime
        starts = np.arange(0, horizon + 1)
        ends = np.searchsorted(lam_cum, lam_cum[starts] + k, side="left")
        ok = ends <= horizon
        if not ok.any():
            y_stats[float(gval)] = None
            continue
        y = sizes[ends[ok]] - sizes[starts[ok]]
        y_stats[float(gval)] = {
            "min": int(y.min()),
            "windows": int(ok.sum()),
        }
        bad = np.flatnonzero(y <= gval)
        if bad.size:
            violations.append(("d", int(starts[ok][bad[0]])))
    return GoodSequenceReport(
        t_prime=t_prime,
        ell=ell,
        beta_prime=beta_prime,
        violations=violations,
        prevailed_step=prevailed_step,
        y_stats=y_stats,
        checkpoints=checkpoints,
    )


def checkpoint_schedule(
    n: int,
    d: int,
    bias: BiasConfig,
    phi_schedule,
    beta: float = DEFAULT_BETA,
    max_rounds: int = 10**9,
    strict: bool = True,
    ell: float | None = None,
    beta_prime: float | None = None,
) -> list[tuple[int | None, float]]:
    """Rounds t_j and size targets zeta(j) for the doubling checkpoints.

    Phases are delimited by the cumulative conductance reaching 2i; the size
    targets double from 2*ell up to n/2, then shrink the complement
    symmetrically, ending at n. A scalar phi schedule admits the closed form
    tau(i) = ceil(2i/phi). The tabulated values are emitted verbatim even
    where the constants outgrow n (they do at desk scale).
    """
    ell_def, bp_def, _ = good_sequence_parameters(n, d, bias, beta)
    ell = ell_def if ell is None else float(ell)
    beta_prime = bp_def if beta_prime is None else float(beta_prime)
    log2n = math.log2(n)
    j_max = int(4 * log2n) + 1

    if np.isscalar(phi_schedule):
        phi = float(phi_schedule)

        def tau(i: float) -> int:
            if i <= 0:
                return 0
            t = int(math.ceil(2.0 * i / phi))
            if t > max_rounds:
                raise ScheduleExhausted(
                    f"phase {i} needs round {t} > max_rounds = {max_rounds}"
                )
            return t

    else:
        cumsum = np.cumsum(np.asarray(phi_schedule, dtype=np.float64))

        def tau(i: float) -> int:
            if i <= 0:
                return 0
            pos = int(np.searchsorted(cumsum, 2.0 * i, side="left")) + 1
            if pos > cumsum.shape[0] or pos > max_rounds:
                raise ScheduleExhausted(f"schedule never accumulates to {2.0 * i}")
            return pos

    def zeta(j: int) -> float:
        if j == 0:
            return 0.0
        if j == 1:
            return 2.0 * ell
        if j <= 2 * log2n:
            return min(2.0 * ell * 2.0 ** (j - 2), n / 2.0)
        if j < j_max:
            return min(n - 2.0 ** (log2n - 1 - (j - 2 * log2n)), n - 2.0 * ell)
        return float(n)

    out = []
    for j in range(j_max + 1):
        if j == 0:
            phase = 0.0
        elif j == 1:
            phase = 12.0 * ell * beta_prime / d
        elif j < j_max:
            phase = 12.0 * ell * beta_prime / d + (j - 1) * 24.0 * beta_prime / d
        else:
            phase = 24.0 * ell * beta_prime / d + (j_max - 1) * 24.0 * beta_prime / d
        try:
            t_j = tau(phase)
        except ScheduleExhausted:
            if strict:
                raise
            t_j = None
        out.append((t_j, zeta(j)))
    return out


def run_biased_with_steps(
    g: Graph,
    init,
    bias: BiasConfig,
    *,
    seed: int | None = None,
    rng=None,
    max_rounds: int,
    regeneration: bool = True,
    regeneration_node: int = 0,
    stop_at_prevail: bool = True,
    max_steps: int | None = None,
) -> tuple[StepTrace, int | None]:
    """Biased run on a fixed graph collecting the full step trace.

    Returns the trace and the round at which the preferred opinion prevailed
    (None if it never did within the limits).
    """
    if rng is None:
        rng = make_rng(seed if seed is not None else 0)
    assign = np.asarray(init, dtype=np.int64).copy()
    kappa = bias.kappa
    builder = _StepTraceBuilder(g.n, kappa)
    prevail_round = None
    new_assign = np.empty(g.n, dtype=np.int64)
    for t in range(max_rounds):
        kernels.biased_round(
            g.indptr, g.indices, g.degrees, assign, bias.alphas, rng.random(g.n), new_assign
        )
        flipped = new_assign != assign
        schedule = decompose_round_into_steps(
            g,
            assign,
            preferred=0,
            flipped=flipped,
            start_sums=(builder.lam_total, builder.lam_prime_total),
        )
        builder.extend(t + 1, schedule, assign, new_assign)
        assign[:] = new_assign
        if regeneration and (assign == 0).sum() == 0:
            assign[regeneration_node] = 0
        if (assign == 0).sum() == g.n:
            prevail_round = t + 1
            if stop_at_prevail:
                break
        if max_steps is not None and builder.lam_total >= 0:
            total_steps = sum(c[0].shape[0] for c in builder.chunks)
            if total_steps >= max_steps:
                break
    return builder.build(int(g.degrees.max()), g.n), prevail_round
