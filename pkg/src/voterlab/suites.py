"""Verification suites: each runs one family of checks and returns a verdict.

These back both the ``voterlab verify`` subcommand and the acceptance test
module. A verdict is a plain dict {"claim": id, "passed": bool, ...numbers}
suitable for the JSON verdict files.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np
from scipy.stats import ks_2samp

from . import dynamics, oracle, stats
from .adversary import adaptive_cut_adversary, build_minority_clique_graph
from .dynamics import BiasConfig, run_biased_with_steps
from .graphs import (
    Graph,
    build_graph,
    complete_graph,
    conductance_cheeger_bounds,
    conductance_exact,
    cycle_graph,
    generate_cut_graph,
    generate_random_regular,
    petersen_graph,
    star_graph,
)
from .rng import make_rng


class UnknownSuite(Exception):
    pass


def write_verdict(verdict: dict, out_dir, name: str | None = None) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name or verdict['claim']}.json")
    with open(path, "w") as fh:
        json.dump(verdict, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def _jsonable(x):
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON-serialisable: {type(x)}")


def _scaled(value: int, scale: float, minimum: int = 1) -> int:
    return max(int(value * scale), minimum)


# ---------------------------------------------------------------------------
# drift suites


def _all_two_opinion_states(n: int):
    for bits in range(1, 2**n - 1):
        yield np.array([(bits >> u) & 1 for u in range(n)], dtype=np.int64)


def suite_drift_upper(seed: int = 0, scale: float = 1.0) -> dict:
    """One-step potential-drop upper bound on every nonconsensus state of
    C6, K5, and the Petersen graph (exact convolution vs analytic bound)."""
    graphs_ = {"C6": cycle_graph(6), "K5": complete_graph(5), "petersen": petersen_graph()}
    counts = {}
    violations = 0
    statement_form_violations = 0
    for name, g in graphs_.items():
        checked = 0
        for state in _all_two_opinion_states(g.n):
            cert = oracle.verify_drift_upper(g, state)
            checked += 1
            violations += not cert.satisfied
            statement_form_violations += not cert.details["satisfied_all_nodes"]
        counts[name] = checked
    return {
        "claim": "drift-upper",
        "passed": violations == 0,
        "states_checked": counts,
        "violations": violations,
        "statement_form_violations": statement_form_violations,
    }


def sample_adversary_states(
    n: int, d: int, phi: float, n_states: int, seed: int, gamma: float = 0.125,
    max_rounds: int = 4000,
):
    """States along an adaptive-cut-adversary trajectory with minority size
    at least gamma * n, paired with the round's graph."""
    rng = make_rng(seed)
    adv = adaptive_cut_adversary(n, d, phi, gamma=gamma)
    assignment = np.ones(n, dtype=np.int64)
    assignment[: n // 2] = 0
    history = [assignment.copy()]
    states = []
    floor = max(gamma * n, d + 1)  # the adversary's active (rebuild) regime
    for t in range(max_rounds):
        g, phi_t = adv.next(t, history)
        minority = int(min((assignment == 0).sum(), (assignment == 1).sum()))
        if minority >= floor:
            states.append((g, assignment.copy(), phi_t))
        from . import kernels

        new = np.empty(n, dtype=np.int64)
        kernels.standard_round(g.indptr, g.indices, g.degrees, assignment, rng.random(n), new)
        assignment = new
        history.append(assignment.copy())
        if len(np.unique(assignment)) == 1:
            break
    if len(states) < n_states:
        return states
    pick = rng.choice(len(states), size=n_states, replace=False)
    return [states[i] for i in sorted(pick)]


def suite_drift_lower(
    seed: int = 0, scale: float = 1.0, n: int = 24, d: int = 6, phi: float = 0.05,
    c_grid=(1, 2, 4, 8, 16),
) -> dict:
    """One-step drop lower bound on sampled adversary states.

    The bound's constant is treated as a free parameter: the suite reports
    the smallest grid value covering every sampled state, along with the
    violation count at c=1 (states at volume balance need a larger constant;
    see the exact-drift analysis in the verdict details).
    """
    n_states = _scaled(200, scale, 10)
    sampled = sample_adversary_states(n, d, phi, n_states, seed)
    per_c = {}
    balance_violations_c1 = 0
    for c in c_grid:
        bad = 0
        for g, state, phi_t in sampled:
            cert = oracle.verify_drift_lower(g, state, c, phi_t)
            if not cert.satisfied:
                bad += 1
                if c == 1 and cert.psi**2 >= g.m - 2 * math.sqrt(d * cert.details["cut"]):
                    balance_violations_c1 += 1
        per_c[int(c)] = bad
    c_fit = next((int(c) for c in c_grid if per_c[int(c)] == 0), None)
    return {
        "claim": "drift-lower",
        "passed": c_fit is not None,
        "states": len(sampled),
        "violations_by_c": per_c,
        "c_fit": c_fit,
        "violations_at_c1_near_balance": balance_violations_c1,
        "note": "constant fitted per the free-leading-constant policy; "
        "violations at small c concentrate at volume-balanced states",
    }


# ---------------------------------------------------------------------------
# duality / fixation


def suite_duality(seed: int = 0, scale: float = 1.0) -> dict:
    """Coalescing time vs consensus time from all-distinct opinions:
    two-sample KS on C6 and K4 must not reject at 1e-3."""
    trials = _scaled(100_000, scale, 200)
    results = {}
    passed = True
    for name, g in (("C6", cycle_graph(6)), ("K4", complete_graph(4))):
        cons = stats.mc_consensus_times(g, np.arange(g.n), trials, seed + 1)
        coal = stats.mc_coalescing_times(g, trials, seed + 2)
        ks = ks_2samp(cons, coal)
        ok = ks.pvalue > 1e-3
        passed &= ok
        results[name] = {
            "trials": trials,
            "ks_stat": float(ks.statistic),
            "pvalue": float(ks.pvalue),
            "mean_consensus": float(cons.mean()),
            "mean_coalescing": float(coal.mean()),
            "passed": ok,
        }
    return {"claim": "duality", "passed": passed, "graphs": results}


def _fixation_instances():
    for n in range(3, 9):
        yield f"C{n}", cycle_graph(n)
    for n in range(2, 9):
        yield f"K{n}", complete_graph(n)
    for n in range(3, 9):
        yield f"S{n}", star_graph(n)
    for n, d, s in ((6, 3, 1), (8, 3, 2), (8, 4, 3)):
        yield f"R{n}-{d}", generate_random_regular(n, d, seed=s)


def suite_fixation(seed: int = 0, scale: float = 1.0) -> dict:
    """Exact fixation probabilities across the small-graph families.

    Absorption probabilities must sum to one; on regular graphs the opinion-0
    probability must equal k/n to 1e-10 (the solver derives it, it is not
    assumed); a subset of instances is compared against Monte Carlo
    frequencies within four binomial standard deviations.
    """
    mc_trials = _scaled(100_000, scale, 500)
    rows = []
    passed = True
    mc_budget = 10
    for name, g in _fixation_instances():
        rng = make_rng(seed + g.n)
        inits = [
            np.array([0] + [1] * (g.n - 1), dtype=np.int64),
            np.array([0] * (g.n // 2) + [1] * (g.n - g.n // 2), dtype=np.int64),
        ]
        if g.n > 2:
            extra = np.ones(g.n, dtype=np.int64)
            extra[rng.choice(g.n, size=g.n // 3 + 1, replace=False)] = 0
            inits.append(extra)
        for init in inits:
            sol = oracle.exact_fixation_probability(g, init)
            p0 = sol.absorption_probabilities[0]
            p1 = sol.absorption_probabilities[1]
            row = {"graph": name, "k": int((init == 0).sum()), "p0": p0, "exact": sol.exact}
            ok = abs(p0 + p1 - 1.0) < 1e-12
            if g.is_regular():
                ok &= abs(p0 - (init == 0).sum() / g.n) <= 1e-10
            vol0 = float(g.degrees[init == 0].sum())
            ok &= abs(p0 - vol0 / (2 * g.m)) <= 1e-9  # degree-proportional law
            if mc_budget > 0 and g.n >= 4:
                mc_budget -= 1
                wins = stats.mc_fixation_wins(g, init, mc_trials, seed + 100 + mc_budget)
                freq = float(wins.mean())
                band = 4.0 * math.sqrt(max(p0 * (1 - p0), 1e-12) / mc_trials)
                row.update({"mc_freq": freq, "band": band})
                ok &= abs(freq - p0) <= band if 0 < p0 < 1 else freq == p0
            row["passed"] = bool(ok)
            passed &= ok
            rows.append(row)
    return {"claim": "fixation", "passed": bool(passed), "instances": rows}


# ---------------------------------------------------------------------------
# chernoff / submartingale


def _chernoff_families():
    g = generate_random_regular(32, 4, seed=9)
    return [
        stats.IIDFamily(0.5, 100),
        stats.IIDFamily(0.05, 200),
        stats.PrefixAdaptiveFamily(20.0, 100, "upper"),
        stats.PrefixAdaptiveFamily(20.0, 100, "lower"),
        stats.VoterBoundaryFamily(g, np.array([1.0, 0.5]), k=40),
    ]


def suite_chernoff(seed: int = 0, scale: float = 1.0) -> dict:
    """Both tail bounds of the dependent-setting inequality across five
    sequence families, sampling each family once and sweeping deltas."""
    trials = _scaled(1_000_000, scale, 2000)
    deltas_a = (0.1, 0.3, 0.5, 1.0)
    deltas_b = (0.1, 0.3, 0.5, 0.9)
    rows = []
    passed = True
    for fi, fam in enumerate(_chernoff_families()):
        fam_trials = trials
        z, bsum = fam.sample_sums(fam_trials, seed + 17 * fi)
        b = fam.b
        if fam.certificate in ("upper", "both"):
            if (bsum > b + 1e-9).any():
                raise stats.CertificateViolated(fam.name)
            for delta in deltas_a:
                emp = float((z > (1 + delta) * b).mean())
                bound = stats.chernoff_upper_bound(b, delta)
                sig = math.sqrt(max(emp * (1 - emp), 1e-12) / fam_trials)
                ok = emp <= bound + 3 * sig
                passed &= ok
                rows.append(
                    {"family": fam.name, "part": "a", "delta": delta,
                     "empirical": emp, "bound": bound, "passed": ok}
                )
        if fam.certificate in ("lower", "both"):
            if (bsum < b - 1e-9).any():
                raise stats.CertificateViolated(fam.name)
            for delta in deltas_b:
                emp = float((z < (1 - delta) * b).mean())
                bound = stats.chernoff_lower_bound(b, delta)
                sig = math.sqrt(max(emp * (1 - emp), 1e-12) / fam_trials)
                ok = emp <= bound + 3 * sig
                passed &= ok
                rows.append(
                    {"family": fam.name, "part": "b", "delta": delta,
                     "empirical": emp, "bound": bound, "passed": ok}
                )
    return {"claim": "chernoff", "passed": bool(passed), "trials": trials, "rows": rows}


def suite_submartingale(
    seed: int = 0, scale: float = 1.0, n: int = 200, d: int = 6, phi: float = 0.01,
    c_grid=(1, 4, 16, 64),
) -> dict:
    """Upward drift of Z = psi^2/(2cd) + sum(phi) at sampled adversary states.

    As with the drift lower bound, the bookkeeping constant is fitted over a
    grid and reported; small constants fail at volume-balanced states.
    """
    n_states = _scaled(100, scale, 5)
    replicates = _scaled(2000, scale, 200)
    per_c = {}
    for c in c_grid:
        rep = stats.submartingale_check(
            n, d, phi, c=c, n_states=n_states, replicates=replicates, seed=seed
        )
        per_c[int(c)] = {
            "states": rep.states_checked,
            "all_passed": rep.all_passed,
            "worst_t": rep.worst_t,
        }
    c_fit = next((c for c in c_grid if per_c[int(c)]["all_passed"]), None)
    return {
        "claim": "submartingale",
        "passed": c_fit is not None,
        "by_c": per_c,
        "c_fit": c_fit,
        "note": "bookkeeping constant fitted; small c fails at balanced states",
    }


# ---------------------------------------------------------------------------
# step-schedule suites


def suite_balance(
    seed: int = 0, scale: float = 1.0, n: int = 64, d: int = 6
) -> dict:
    """Hard step-schedule invariants over biased runs on random d-regular
    graphs: the running sums stay within d, and sampled observation windows
    satisfy the interval-length bounds."""
    runs = _scaled(1000, scale, 20)
    bias = BiasConfig(np.array([1.0, 0.5]))
    rng = make_rng(seed)
    balance_violations = 0
    ishort_violations = 0
    windows = 0
    for r in range(runs):
        g = generate_random_regular(n, d, seed=seed + r % 25)
        init = dynamics.make_initial_assignment(n, "split")
        trace, _ = run_biased_with_steps(
            g, init, bias, seed=seed + 1000 + r, max_rounds=500, regeneration=True
        )
        if len(trace) == 0:
            continue
        gaps = np.abs(trace.lambda_sum - trace.lambda_prime_sum)
        if (gaps > d).any():
            balance_violations += 1
        lam_cum = trace.lambda_sum
        lp_cum = trace.lambda_prime_sum
        n_samples = 20
        starts = rng.integers(0, max(len(trace) - 1, 1), size=n_samples)
        ks = rng.integers(1, 4 * d, size=n_samples)
        for i, k in zip(starts.tolist(), ks.tolist()):
            end = trace.interval_end(i, k)
            if end is None:
                continue
            windows += 1
            base_l = 0 if i == 0 else int(lam_cum[i - 1])
            base_lp = 0 if i == 0 else int(lp_cum[i - 1])
            if end - i > 2 * k + 2 * d:
                ishort_violations += 1
            if int(lp_cum[end - 1]) - base_lp > k + 2 * d:
                ishort_violations += 1
            _ = base_l
    return {
        "claim": "balance",
        "passed": balance_violations == 0 and ishort_violations == 0,
        "runs": runs,
        "balance_violations": balance_violations,
        "interval_violations": ishort_violations,
        "windows_checked": windows,
    }


# ---------------------------------------------------------------------------
# moment suites


def _random_small_cut_states(count: int, seed: int):
    """(graph, state) pairs with a boundary of at most 8 nodes."""
    rng = make_rng(seed)
    out = []
    attempts = 0
    while len(out) < count and attempts < count * 200:
        attempts += 1
        kind = len(out) % 3
        if kind == 0:
            n = int(rng.integers(6, 13))
            g = cycle_graph(n)
            a, b = sorted(rng.choice(n, size=2, replace=False).tolist())
            state = np.ones(n, dtype=np.int64)
            state[a:b] = 0
        else:
            n = int(rng.integers(8, 13))
            d = 3 if kind == 1 else 4
            if n * d % 2:
                n += 1
            g = generate_random_regular(n, d, seed=int(rng.integers(0, 2**31)))
            state = np.ones(n, dtype=np.int64)
            state[rng.choice(n, size=2, replace=False)] = 0
        lam = np.zeros(g.n, dtype=np.int64)
        from . import kernels

        kernels.lambda_counts(g.indptr, g.indices, state, lam)
        nb = int((lam > 0).sum())
        if 0 < nb <= 8 and len(np.unique(state)) == 2:
            out.append((g, state))
    return out


def suite_moments(seed: int = 0, scale: float = 1.0) -> dict:
    """Third-moment identity on the replacement laws of random small states,
    by exhaustive product-space enumeration, to 1e-12."""
    count = _scaled(50, scale, 5)
    pairs = _random_small_cut_states(count, seed)
    worst = 0.0
    for g, state in pairs:
        _, y_laws, _ = oracle.drift_variable_laws(g, state)
        rep = oracle.third_moment_identity(y_laws)
        worst = max(worst, rep.max_abs_deviation)
    return {
        "claim": "moments",
        "passed": worst <= 1e-12,
        "pairs": len(pairs),
        "max_abs_deviation": worst,
    }


def suite_dominance(seed: int = 0, scale: float = 1.0) -> dict:
    """Concave replacement dominance on the same family of random states."""
    count = _scaled(50, scale, 5)
    pairs = _random_small_cut_states(count, seed)
    failures = 0
    worst_margin = math.inf
    for g, state in pairs:
        x_laws, y_laws, vol = oracle.drift_variable_laws(g, state)
        reports = oracle.concave_dominance_check(
            x_laws, y_laws, oracle.default_concave_tests(vol)
        )
        for rep in reports:
            if not rep.concave:
                continue
            margin = rep.expectation_y - rep.expectation_x
            worst_margin = min(worst_margin, margin)
            if margin < -1e-12:
                failures += 1
    return {
        "claim": "dominance",
        "passed": failures == 0,
        "pairs": len(pairs),
        "failures": failures,
        "worst_margin": worst_margin,
    }


# ---------------------------------------------------------------------------
# acceptance-only claims


def claim_cycle_scaling(seed: int = 0, scale: float = 1.0) -> dict:
    """Consensus time on cycles grows like n^2: log-log exponent of the
    median over n in {32, 64, 128, 256} within [1.85, 2.15]."""
    trials = _scaled(2000, scale, 100)
    sizes = [32, 64, 128, 256]
    medians = []
    for n in sizes:
        g = cycle_graph(n)
        ts = stats.mc_consensus_times(g, np.arange(n), trials, seed + n)
        medians.append(float(np.median(ts)))
    fit = stats.fit_scaling(sizes, medians)
    ok = 1.85 <= fit.exponent <= 2.15
    return {
        "claim": "cycle-scaling",
        "passed": bool(ok),
        "sizes": sizes,
        "trials": trials,
        "medians": medians,
        "exponent": fit.exponent,
        "stderr": fit.stderr,
    }


def claim_static_upper(seed: int = 0, scale: float = 1.0) -> dict:
    """T <= C * min(m/(d_min phi), n log n / phi^2) holds with probability at
    least 1/2 (binomial test at 1%), C <= 4 reported, on cycles and random
    3-regular graphs."""
    trials = _scaled(500, scale, 100)
    cases = []
    passed = True
    for name, g, phi in _static_upper_instances(seed):
        init = np.arange(g.n)
        ts = stats.mc_consensus_times(g, init, trials, seed + g.n)
        m_over = g.m / (int(g.degrees.min()) * phi)
        nlog = g.n * math.log(g.n) / phi**2
        bound = min(m_over, nlog)
        rep = stats.median_bound_check(ts, bound)
        ok = rep.c_min is not None and rep.c_min <= 4
        passed &= ok
        cases.append(
            {"graph": name, "phi": phi, "bound": bound, "median_T": float(np.median(ts)),
             "c_min": rep.c_min, "successes_by_c": rep.successes_by_c, "passed": ok}
        )
    return {"claim": "static-upper", "passed": bool(passed), "trials": trials, "cases": cases}


def _static_upper_instances(seed: int):
    for n in (64, 256):
        # phi(C_n) = 2/n for even n, the pattern verified exactly by the
        # conductance suite for all even n up to the enumeration cap
        yield f"C{n}", cycle_graph(n), 2.0 / n
    for n in (128, 512):
        g = generate_random_regular(n, 3, seed=seed + n)
        phi = conductance_cheeger_bounds(g).lower
        yield f"R{n}-3", g, phi


def claim_biased_consensus(seed: int = 0, scale: float = 1.0) -> dict:
    """Preferred opinion prevails fast on static 8-regular expanders:
    >= 99% of trials within C * log n / phi_lower rounds, C reported, and
    the observed high-probability time grows like log n.

    The scaling statistic is the 99th-percentile prevail time, the same
    quantity the within-bound clause is about (the underlying claim is a
    with-high-probability tail bound, so its growth lives in the upper
    quantile); the median-based fit is reported alongside. The initial
    preferred set itself grows like 8 ln n, which gives the median an
    intercept that the tail statistic does not carry.
    """
    trials = _scaled(1000, scale, 100)
    sizes = [256, 512, 1024]
    n_graphs = 4  # tail statistics are averaged over independent expanders
    alphas = np.array([1.0, 0.5])
    rows = []
    medians = []
    tails = []
    passed = True
    for n in sizes:
        k0 = math.ceil(8 * math.log(n))
        per_graph_t99 = []
        per_graph_med = []
        won_all = []
        phi_lowers = []
        for gi in range(n_graphs):
            g = generate_random_regular(n, 8, seed=seed + n + 1000 * gi)
            phi_lower = conductance_cheeger_bounds(g).lower
            phi_lowers.append(phi_lower)
            init = dynamics.make_initial_assignment(
                n, "k-random", k=k0, rng=make_rng(seed + n + 1000 * gi)
            )
            cap = int(200 * math.log(n) / phi_lower)
            won, rounds = stats.mc_biased_prevail(
                g, init, alphas, trials, seed + 7 * n + gi, cap
            )
            won_all.append(won)
            finite = rounds[won]
            per_graph_med.append(float(np.median(finite)) if finite.size else math.inf)
            per_graph_t99.append(
                float(np.quantile(finite, 0.99)) if finite.size else math.inf
            )
        prevail_rate = float(np.concatenate(won_all).mean())
        med = float(np.mean(per_graph_med))
        t99 = float(np.mean(per_graph_t99))
        phi_lower = float(np.mean(phi_lowers))
        medians.append(med)
        tails.append(t99)
        c_fit = t99 * phi_lower / math.log(n)
        ok = prevail_rate >= 0.99
        passed &= ok
        rows.append(
            {"n": n, "k0": k0, "phi_lower": phi_lower, "prevail_rate": prevail_rate,
             "median_T": med, "t99": t99, "c_fit_99pct": c_fit, "passed": ok}
        )
    x = np.log(np.log(np.asarray(sizes, dtype=float)))
    slope_tail = float(np.polyfit(x, np.log(np.asarray(tails)), 1)[0])
    slope_median = float(np.polyfit(x, np.log(np.asarray(medians)), 1)[0])
    ok_slope = abs(slope_tail - 1.0) <= 0.3
    passed &= ok_slope
    return {
        "claim": "biased-consensus",
        "passed": bool(passed),
        "trials": trials,
        "rows": rows,
        "semilog_exponent": slope_tail,
        "semilog_exponent_median": slope_median,
        "exponent_ok": bool(ok_slope),
    }


def claim_good_sequence(seed: int = 0, scale: float = 1.0) -> dict:
    """Step traces under the setup of the biased-consensus claim at n = 512
    report no violations of the no-vanish / bounded-drawdown / window-growth
    properties in at least 95% of runs (prevailing plays the role of the
    growth endpoint)."""
    runs = _scaled(100, scale, 10)
    n, d = 512, 8
    bias = BiasConfig(np.array([1.0, 0.5]))
    g = generate_random_regular(n, d, seed=seed + 5)
    k0 = math.ceil(8 * math.log(n))
    clean = 0
    prevailed = 0
    vacuous_note = None
    for r in range(runs):
        init = dynamics.make_initial_assignment(
            n, "k-random", k=k0, rng=make_rng(seed + 31 * r)
        )
        trace, prevail_round = run_biased_with_steps(
            g, init, bias, seed=seed + 101 * r, max_rounds=5000, regeneration=True
        )
        report = dynamics.monitor_good_sequence(trace, bias)
        if vacuous_note is None:
            vacuous_note = (
                f"ell = {report.ell:.0f} exceeds n = {n}; drawdown and window "
                "properties cannot be violated at this scale"
            )
        bcd = [v for v in report.violations if v[0] in ("b", "c", "d")]
        if not bcd:
            clean += 1
        if prevail_round is not None:
            prevailed += 1
    rate = clean / runs
    return {
        "claim": "good-sequence",
        "passed": rate >= 0.95,
        "runs": runs,
        "clean_rate": rate,
        "prevail_rate": prevailed / runs,
        "note": vacuous_note,
    }


def claim_adversary_lower(seed: int = 0, scale: float = 1.0) -> dict:
    """Against the cut adversary, at least half of the runs (minus Monte
    Carlo slack) still hold both opinions when the cumulative conductance
    reaches n/18; the companion submartingale suite is reported alongside."""
    runs = _scaled(1000, scale, 50)
    n, d, phi = 200, 6, 0.01
    c_cut = 1.0
    b = 1.0 / (18.0 * c_cut)
    tau_pp = math.ceil(b * n / phi)
    still_split = 0
    from . import kernels

    rng_master = make_rng(seed)
    for r in range(runs):
        rng = make_rng(int(rng_master.integers(0, 2**63)))
        adv = adaptive_cut_adversary(n, d, phi, c=c_cut)
        assignment = dynamics.make_initial_assignment(n, "split")
        history = [assignment.copy()]
        new = np.empty(n, dtype=np.int64)
        consensus = False
        for t in range(tau_pp):
            g, _ = adv.next(t, history)
            kernels.standard_round(
                g.indptr, g.indices, g.degrees, assignment, rng.random(n), new
            )
            assignment, new = new, assignment
            history.append(assignment.copy())
            if (assignment == assignment[0]).all():
                consensus = True
                break
        still_split += not consensus
    frac = still_split / runs
    sigma = math.sqrt(max(frac * (1 - frac), 1e-12) / runs)
    ok = frac >= 0.5 - 3 * sigma
    return {
        "claim": "adversary-lower",
        "passed": bool(ok),
        "runs": runs,
        "tau_pp": tau_pp,
        "b": b,
        "non_consensus_fraction": frac,
        "threshold": 0.5 - 3 * sigma,
    }


def claim_degree_adversary_marginals() -> dict:
    """Structural surrogate for the super-exponential lower bound: on the
    degree-changing adversary's graph at n = 12, the exact one-round
    marginals give P(minority shrinks) <= 4/n and P(some majority node
    flips) >= 1/4."""
    n = 12
    rows = []
    passed = True
    for k in range(2, 6):
        minority = np.arange(k)
        majority = np.arange(k, n)
        g = build_minority_clique_graph(n, minority, majority)
        state = np.ones(n, dtype=np.int64)
        state[minority] = 0
        lam = np.zeros(n, dtype=np.int64)
        from . import kernels

        kernels.lambda_counts(g.indptr, g.indices, state, lam)
        flip_p = lam / (2.0 * g.degrees)
        p_shrink = 1.0 - float(np.prod(1.0 - flip_p[minority]))
        p_major = 1.0 - float(np.prod(1.0 - flip_p[majority]))
        ok = p_shrink <= 4.0 / n + 1e-12 and p_major >= 0.25 - 1e-12
        passed &= ok
        rows.append(
            {"minority_size": k, "p_minority_shrinks": p_shrink,
             "p_majority_flip": p_major, "passed": ok}
        )
    return {"claim": "degree-adversary-marginals", "passed": bool(passed), "rows": rows}


SUITES = {
    "drift-upper": suite_drift_upper,
    "drift-lower": suite_drift_lower,
    "duality": suite_duality,
    "fixation": suite_fixation,
    "chernoff": suite_chernoff,
    "submartingale": suite_submartingale,
    "balance": suite_balance,
    "moments": suite_moments,
    "dominance": suite_dominance,
}


def run_suite(suite_id: str, seed: int = 0, scale: float = 1.0) -> dict:
    fn = SUITES.get(suite_id)
    if fn is None:
        raise UnknownSuite(
            f"unknown suite {suite_id!r}; choose from {sorted(SUITES)}"
        )
    return fn(seed=seed, scale=scale)
