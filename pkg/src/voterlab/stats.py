"""Monte Carlo harness, estimators, scaling fits, and tail-bound validators.

Trials are deterministic functions of (config, base seed): trial i draws
from the Philox stream keyed by seed XOR i, and aggregation is
order-independent, so thread counts never change results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import kernels
from .graphs import Graph
from .rng import make_rng, trial_rng

MIN_TRIALS = 100


class StatsError(Exception):
    pass


class InsufficientSizes(StatsError):
    pass


class CertificateViolated(StatsError):
    pass


@dataclass
class Estimate:
    """Summary of one scalar metric over independent trials."""

    mean: float
    median: float
    variance: float
    trials: int
    ci_level: float
    ci_lo: float
    ci_hi: float
    base_seed: int
    n_unfinished: int = 0
    values: np.ndarray | None = None

    @classmethod
    def from_values(
        cls, values: np.ndarray, base_seed: int, ci_level: float = 0.99, keep: bool = True
    ) -> "Estimate":
        finite = values[np.isfinite(values)]
        n = finite.shape[0]
        mean = float(finite.mean()) if n else math.inf
        var = float(finite.var(ddof=1)) if n > 1 else 0.0
        z = sps.norm.ppf(0.5 + ci_level / 2)
        half = z * math.sqrt(var / n) if n else math.inf
        return cls(
            mean=mean,
            median=float(np.median(values)),
            variance=var,
            trials=int(values.shape[0]),
            ci_level=ci_level,
            ci_lo=mean - half,
            ci_hi=mean + half,
            base_seed=base_seed,
            n_unfinished=int(values.shape[0] - n),
            values=values if keep else None,
        )

    def median_ci(self) -> tuple[float, float]:
        """Order-statistic confidence interval for the median."""
        if self.values is None:
            raise StatsError("median CI needs the retained values")
        v = np.sort(self.values)
        n = v.shape[0]
        lo_k = int(sps.binom.ppf((1 - self.ci_level) / 2, n, 0.5))
        hi_k = int(sps.binom.isf((1 - self.ci_level) / 2, n, 0.5))
        return float(v[max(lo_k - 1, 0)]), float(v[min(hi_k, n - 1)])


def run_trials(
    trial_fn, trials: int, base_seed: int, threads: int | None = None, ci_level: float = 0.99
) -> Estimate:
    """Run ``trial_fn(trial_index, rng) -> float`` over independent streams.

    Deterministic given (trial_fn, trials, base_seed); the thread fan-out
    only changes wall time.
    """
    if trials < MIN_TRIALS:
        raise StatsError(f"need at least {MIN_TRIALS} trials, got {trials}")
    values = np.empty(trials, dtype=np.float64)

    def block(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            values[i] = trial_fn(i, trial_rng(base_seed, i))

    if threads is None or threads <= 1:
        block(0, trials)
    else:
        chunk = (trials + threads - 1) // threads
        with ThreadPoolExecutor(max_workers=threads) as tpe:
            futures = [
                tpe.submit(block, lo, min(lo + chunk, trials))
                for lo in range(0, trials, chunk)
            ]
            for f in futures:
                f.result()
    return Estimate.from_values(values, base_seed, ci_level)


@dataclass
class ScalingFit:
    """Log-log least-squares exponent across sizes."""

    sizes: list
    estimates: list
    exponent: float
    stderr: float
    metric: str = "median"

    def summary(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "metric": self.metric,
            "values": [
                getattr(e, self.metric) if isinstance(e, Estimate) else float(e)
                for e in self.estimates
            ],
            "exponent": self.exponent,
            "stderr": self.stderr,
        }


def fit_scaling(sizes, estimates, metric: str = "median") -> ScalingFit:
    """Fit value ~ size^exponent by least squares in log-log coordinates.

    Needs at least 4 sizes spanning a factor of 8.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 4:
        raise InsufficientSizes(f"need >= 4 sizes, got {len(sizes)}")
    if max(sizes) < 8 * min(sizes):
        raise InsufficientSizes("sizes must span at least a factor of 8")
    vals = [
        float(getattr(e, metric)) if isinstance(e, Estimate) else float(e)
        for e in estimates
    ]
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray(vals, dtype=float))
    res = sps.linregress(x, y)
    return ScalingFit(
        sizes=sizes,
        estimates=estimates,
        exponent=float(res.slope),
        stderr=float(res.stderr),
        metric=metric,
    )


def chernoff_upper_bound(b: float, delta: float) -> float:
    """(e^delta / (1+delta)^(1+delta))^b, the upper-tail bound."""
    if delta == 0:
        return 1.0
    return math.exp(b * (delta - (1 + delta) * math.log1p(delta)))


def chernoff_lower_bound(b: float, delta: float) -> float:
    """e^(-b delta^2 / 2), the lower-tail bound."""
    return math.exp(-b * delta * delta / 2.0)


@dataclass
class TailReport:
    """Empirical tail of a dependent binary-sum family against its bound."""

    family: str
    part: str
    b: float
    delta: float
    threshold: float
    empirical: float
    bound: float
    sigma_hat: float
    trials: int
    passed: bool

    def summary(self) -> dict:
        return self.__dict__.copy()


class SequenceFamily:
    """A source of binary sequences with a certified probability budget.

    ``sample_sums(trials, seed)`` returns (Z, B) arrays: the sequence sums
    and the realised sums of conditional probabilities. ``certificate`` is
    "upper" (B <= b a.s.), "lower" (B >= b a.s.), or "both".
    """

    name: str
    b: float
    certificate: str

    def sample_sums(self, trials: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


class IIDFamily(SequenceFamily):
    def __init__(self, p: float, ell: int):
        self.p = p
        self.ell = ell
        self.b = p * ell
        self.name = f"iid(p={p})"
        self.certificate = "both"

    def sample_sums(self, trials: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        rng = make_rng(seed)
        z = np.empty(trials, dtype=np.int64)
        chunk = 200_000
        for lo in range(0, trials, chunk):
            hi = min(lo + chunk, trials)
            block = rng.random((self.ell, hi - lo))
            kernels.iid_sums(block, self.p, z[lo:hi])
        return z.astype(np.float64), np.full(trials, self.p * self.ell)


class PrefixAdaptiveFamily(SequenceFamily):
    """Conditional probabilities react to the running sum under a budget.

    mode "upper": spends the remaining budget at once after a lucky prefix
    (sum of conditionals never exceeds b); mode "lower": drops to the floor
    b/ell after a lucky prefix (sum never falls below b).
    """

    def __init__(self, b: float, ell: int, mode: str, base_p: float | None = None):
        self.b = b
        self.ell = ell
        self.mode = mode
        self.base_p = base_p if base_p is not None else b / ell
        self.name = f"adaptive-{mode}(b={b})"
        self.certificate = mode

    def sample_sums(self, trials: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        rng = make_rng(seed)
        z = np.empty(trials, dtype=np.int64)
        bsum = np.empty(trials, dtype=np.float64)
        mode = 0 if self.mode == "upper" else 1
        chunk = 200_000
        for lo in range(0, trials, chunk):
            hi = min(lo + chunk, trials)
            block = rng.random((self.ell, hi - lo))
            kernels.adaptive_sums(
                block, self.b, self.base_p, mode, z[lo:hi], bsum[lo:hi]
            )
        return z.astype(np.float64), bsum


class VoterBoundaryFamily(SequenceFamily):
    """Preferred-to-other flip indicators along a balanced step window.

    Each trial restarts a biased run from a fixed balanced split and follows
    one observation window of cut-degree budget k; the window-length bound
    guarantees the conditional flip probabilities sum to at most
    alpha_1 (k + 2d) / d.
    """

    def __init__(self, g: Graph, alphas: np.ndarray, k: int, max_rounds: int = 64):
        if not g.is_regular():
            raise StatsError("voter boundary windows need a regular graph")
        self.g = g
        self.alphas = np.asarray(alphas, dtype=np.float64)
        self.k = k
        d = int(g.degrees[0])
        self.d = d
        self.b = float(self.alphas[1]) * (k + 2 * d) / d
        self.max_rounds = max_rounds
        self.name = f"voter-boundary(k={k},d={d})"
        self.certificate = "upper"
        init = np.ones(g.n, dtype=np.int64)
        init[: g.n // 2] = 0
        self.init = init

    def sample_sums(self, trials: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        z = np.empty(trials, dtype=np.float64)
        bsum = np.empty(trials, dtype=np.float64)
        g = self.g
        incomplete = 0
        for i in range(trials):
            rng = trial_rng(seed, i)
            block = rng.random((self.max_rounds, g.n))
            zi, bi, done = kernels.voter_window_sums(
                g.indptr, g.indices, g.degrees, self.init, self.alphas, self.k, block
            )
            if not done:
                incomplete += 1
                zi, bi = 0, 0.0
            z[i] = zi
            bsum[i] = bi
        if incomplete > trials * 0.001:
            raise StatsError(f"{incomplete} of {trials} windows did not complete")
        return z, bsum


def dependent_chernoff_check(
    family: SequenceFamily,
    delta: float,
    trials: int,
    seed: int,
    part: str,
) -> TailReport:
    """Empirical tail of Z against the dependent-setting bound.

    part "a": P(Z > (1+delta) b) against (e^delta/(1+delta)^(1+delta))^b,
    valid when the conditional probabilities sum to at most b; part "b":
    P(Z < (1-delta) b) against e^(-b delta^2/2), valid when they sum to at
    least b. The certificate is re-checked on every sampled sequence. The
    pass criterion allows three binomial standard errors of slack.
    """
    if part not in ("a", "b"):
        raise ValueError("part must be 'a' or 'b'")
    need = "upper" if part == "a" else "lower"
    if family.certificate not in (need, "both"):
        raise StatsError(f"{family.name} has no {need} certificate")
    z, bsum = family.sample_sums(trials, seed)
    b = family.b
    if part == "a" and (bsum > b + 1e-9).any():
        raise CertificateViolated(f"{family.name}: some B exceeds b = {b}")
    if part == "b" and (bsum < b - 1e-9).any():
        raise CertificateViolated(f"{family.name}: some B below b = {b}")
    if part == "a":
        threshold = (1 + delta) * b
        empirical = float((z > threshold).mean())
        bound = chernoff_upper_bound(b, delta)
    else:
        threshold = (1 - delta) * b
        empirical = float((z < threshold).mean())
        bound = chernoff_lower_bound(b, delta)
    sigma_hat = math.sqrt(max(empirical * (1 - empirical), 1e-12) / trials)
    return TailReport(
        family=family.name,
        part=part,
        b=b,
        delta=delta,
        threshold=threshold,
        empirical=empirical,
        bound=bound,
        sigma_hat=sigma_hat,
        trials=trials,
        passed=empirical <= bound + 3 * sigma_hat,
    )


def mc_consensus_times(
    g: Graph,
    init: np.ndarray,
    trials: int,
    base_seed: int,
    max_rounds: int = 10**7,
    batch_cap: int = 4096,
) -> np.ndarray:
    """Consensus times of the lazy standard model on a fixed graph.

    Lean per-trial loop over the batched kernel; per-trial streams as in
    run_trials. Unfinished trials record inf.
    """
    init = np.asarray(init, dtype=np.int64)
    kappa = int(init.max()) + 1
    out = np.empty(trials, dtype=np.float64)
    lam0 = np.zeros(g.n, dtype=np.int64)
    kernels.lambda_counts(g.indptr, g.indices, init, lam0)
    counts0 = np.bincount(init, minlength=kappa).astype(np.int64)
    for i in range(trials):
        rng = trial_rng(base_seed, i)
        opin = init.copy()
        lam = lam0.copy()
        counts = counts0.copy()
        total = 0
        batch = 64
        t_val = math.inf
        while total < max_rounds:
            r = min(batch, max_rounds - total)
            block = rng.random((r, g.n))
            consumed, done = kernels.consensus_standard_batch(
                g.indptr, g.indices, g.degrees, opin, lam, counts, block
            )
            total += consumed
            if done:
                t_val = float(total)
                break
            batch = min(batch * 2, batch_cap)
        out[i] = t_val
    return out


def mc_fixation_wins(
    g: Graph, init: np.ndarray, trials: int, base_seed: int, max_rounds: int = 10**7
) -> np.ndarray:
    """Indicator per trial that opinion 0 prevailed (two opinions)."""
    init = np.asarray(init, dtype=np.int64)
    out = np.empty(trials, dtype=bool)
    lam0 = np.zeros(g.n, dtype=np.int64)
    kernels.lambda_counts(g.indptr, g.indices, init, lam0)
    counts0 = np.bincount(init, minlength=2).astype(np.int64)
    for i in range(trials):
        rng = trial_rng(base_seed, i)
        opin = init.copy()
        lam = lam0.copy()
        counts = counts0.copy()
        total = 0
        batch = 64
        while total < max_rounds:
            block = rng.random((min(batch, max_rounds - total), g.n))
            consumed, done = kernels.consensus_standard_batch(
                g.indptr, g.indices, g.degrees, opin, lam, counts, block
            )
            total += consumed
            if done:
                break
            batch = min(batch * 2, 4096)
        out[i] = counts[0] == g.n
    return out


def mc_coalescing_times(
    g: Graph, trials: int, base_seed: int, max_rounds: int = 10**7
) -> np.ndarray:
    """Coalescing times of lazy walks started on every node."""
    out = np.empty(trials, dtype=np.float64)
    for i in range(trials):
        rng = trial_rng(base_seed, i)
        pos = np.arange(g.n, dtype=np.int64)
        alive = g.n
        total = 0
        batch = 64
        t_val = math.inf
        while total < max_rounds:
            occ = np.full(g.n, -1, dtype=np.int64)
            block = rng.random((min(batch, max_rounds - total), pos.shape[0]))
            consumed, alive = kernels.coalescing_batch(
                g.indptr, g.indices, g.degrees, pos, alive, occ, block
            )
            total += consumed
            if alive == 1:
                t_val = float(total)
                break
            batch = min(batch * 2, 4096)
        out[i] = t_val
    return out


def mc_biased_prevail(
    g: Graph,
    init: np.ndarray,
    alphas: np.ndarray,
    trials: int,
    base_seed: int,
    max_rounds: int,
    regeneration: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """(prevailed flag, rounds) per trial for the biased model on a fixed graph."""
    init = np.asarray(init, dtype=np.int64)
    alphas = np.asarray(alphas, dtype=np.float64)
    kappa = alphas.shape[0]
    won = np.zeros(trials, dtype=bool)
    rounds = np.full(trials, np.inf)
    lam0 = np.zeros(g.n, dtype=np.int64)
    kernels.lambda_counts(g.indptr, g.indices, init, lam0)
    counts0 = np.bincount(init, minlength=kappa).astype(np.int64)
    regen = 0 if regeneration else -1
    for i in range(trials):
        rng = trial_rng(base_seed, i)
        opin = init.copy()
        lam = lam0.copy()
        counts = counts0.copy()
        total = 0
        batch = 64
        while total < max_rounds:
            block = rng.random((min(batch, max_rounds - total), g.n))
            consumed, status = kernels.consensus_biased_batch(
                g.indptr, g.indices, g.degrees, opin, lam, counts,
                alphas, block, 0, regen,
            )
            total += consumed
            if status != 0:
                won[i] = status == 1
                rounds[i] = float(total)
                break
            batch = min(batch * 2, 4096)
    return won, rounds


@dataclass
class MedianBoundReport:
    """Binomial test that T <= C * bound holds with probability >= 1/2."""

    bound: float
    trials: int
    successes_by_c: dict
    c_min: int | None
    escalated: bool
    significance: float

    def summary(self) -> dict:
        return {
            "bound": self.bound,
            "trials": self.trials,
            "successes_by_c": dict(self.successes_by_c),
            "c_min": self.c_min,
            "escalated": self.escalated,
            "significance": self.significance,
        }


def median_bound_check(
    values: np.ndarray, bound: float, c_grid=(1, 2, 3, 4), significance: float = 0.01
) -> MedianBoundReport:
    """Smallest C in the grid for which P(T <= C * bound) >= 1/2 is not
    rejected by an exact one-sided binomial test."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    successes = {int(c): int((values <= c * bound).sum()) for c in c_grid}
    c_min = None
    for c in c_grid:
        k = successes[int(c)]
        # reject p >= 1/2 when the success count is improbably small
        pvalue = sps.binom.cdf(k, n, 0.5)
        if pvalue >= significance:
            c_min = int(c)
            break
    return MedianBoundReport(
        bound=float(bound),
        trials=n,
        successes_by_c=successes,
        c_min=c_min,
        escalated=c_min is not None and c_min > 1,
        significance=significance,
    )


@dataclass
class SubmartingaleReport:
    states_checked: int
    worst_t: float
    all_passed: bool
    rows: list = field(default_factory=list)


def submartingale_check(
    n: int,
    d: int,
    phi: float,
    *,
    gamma: float = 0.125,
    c: float = 1.0,
    n_states: int = 100,
    replicates: int = 2000,
    seed: int = 0,
    max_rounds: int = 2000,
) -> SubmartingaleReport:
    """Conditional Monte Carlo check that Z = psi^2/(2cd) + sum(phi) drifts up.

    States are sampled along an adaptive-cut-adversary trajectory from the
    balanced split; at each sampled state the next round's graph is fixed by
    the adversary and E[g(psi') - g(psi)] + phi is estimated by replicated
    one-round simulations. Passes when every state's mean increment clears
    -3 standard errors.
    """
    from .adversary import adaptive_cut_adversary  # local import, no cycle

    rng = make_rng(seed)
    adv = adaptive_cut_adversary(n, d, phi, gamma=gamma, c=c)
    assignment = np.ones(n, dtype=np.int64)
    assignment[: n // 2] = 0
    history = [assignment.copy()]
    rows = []
    check_at = set(
        rng.choice(max_rounds, size=min(n_states, max_rounds), replace=False).tolist()
    )
    g = None
    for t in range(max_rounds):
        g, phi_t = adv.next(t, history)
        minority = int(min((assignment == 0).sum(), (assignment == 1).sum()))
        if t in check_at and minority >= gamma * n:
            rows.append(
                _one_state_increment(g, assignment, phi_t, c, d, replicates, rng)
            )
        rand_u = rng.random(n)
        new = np.empty(n, dtype=np.int64)
        kernels.standard_round(g.indptr, g.indices, g.degrees, assignment, rand_u, new)
        assignment = new
        history.append(assignment.copy())
        if len(np.unique(assignment)) == 1:
            break
    worst = min((r["t_stat"] for r in rows), default=math.inf)
    return SubmartingaleReport(
        states_checked=len(rows),
        worst_t=worst,
        all_passed=all(r["mean"] >= -3 * r["sem"] for r in rows),
        rows=rows,
    )


def _one_state_increment(g, assignment, phi_t, c, d, replicates, rng) -> dict:
    vol0 = int(g.degrees[assignment == 0].sum())
    vol = min(vol0, 2 * g.m - vol0)
    psi2 = float(vol)
    lam = np.zeros(g.n, dtype=np.int64)
    kernels.lambda_counts(g.indptr, g.indices, assignment, lam)
    boundary = np.flatnonzero(lam > 0)
    block = rng.random((replicates, g.n))
    out_vol = np.empty(replicates, dtype=np.int64)
    kernels.one_step_vol_samples(
        g.indptr, g.indices, g.degrees, assignment, boundary, block, out_vol
    )
    vol_next = np.minimum(out_vol, 2 * g.m - out_vol)
    dz = (vol_next - psi2) / (2.0 * c * d) + phi_t
    mean = float(dz.mean())
    sem = float(dz.std(ddof=1) / math.sqrt(replicates))
    return {
        "mean": mean,
        "sem": sem,
        "t_stat": mean / sem if sem > 0 else math.inf,
        "phi": phi_t,
        "vol": vol,
    }
