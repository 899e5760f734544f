import math

import numpy as np
import pytest

from voterlab import dynamics, graphs, oracle, stats
from voterlab.adversary import static_provider
from voterlab.dynamics import (
    BalanceViolation,
    BiasConfig,
    InconsistentState,
    NonRegularGraph,
    NonRegularGraphWarning,
    OpinionState,
    ProviderDegreeMismatch,
    ScheduleExhausted,
    ThresholdConfig,
    TraceTooShort,
    checkpoint_schedule,
    decompose_round_into_steps,
    make_initial_assignment,
    monitor_good_sequence,
    run_biased_with_steps,
    run_until_consensus,
)
from voterlab.rng import make_rng


class TestOpinionState:
    def test_caches(self, c8):
        st = OpinionState.from_assignment(c8, [0, 0, 0, 1, 1, 1, 1, 1])
        assert st.counts.tolist() == [3, 5]
        assert int(st.volumes.sum()) == 2 * c8.m
        assert st.minority_volume() == 6
        assert st.cut() == 2
        assert (st.lam <= c8.degrees).all()

    def test_lambda_sums_balance(self):
        rng = make_rng(4)
        g = graphs.generate_random_regular(20, 4, seed=1)
        for _ in range(5):
            a = (rng.random(20) < 0.5).astype(np.int64)
            st = OpinionState.from_assignment(g, a, kappa=2)
            side0 = int(st.lam[a == 0].sum())
            side1 = int(st.lam[a == 1].sum())
            assert side0 == side1 == st.cut()

    def test_consensus_detection(self, c8):
        st = OpinionState.from_assignment(c8, [3] * 8, kappa=4)
        assert st.is_consensus()
        assert st.consensus_opinion() == 3

    def test_inconsistent(self, c8):
        with pytest.raises(InconsistentState):
            OpinionState.from_assignment(c8, [0, 1])


class TestBiasConfig:
    def test_epsilon(self):
        b = BiasConfig(np.array([1.0, 0.7, 0.2]))
        assert b.epsilon == pytest.approx(0.3)
        assert b.kappa == 3

    @pytest.mark.parametrize(
        "alphas", [[0.9, 0.5], [1.0, 1.0], [1.0, 0.3, 0.5], [1.0, 0.5, -0.1]]
    )
    def test_invalid(self, alphas):
        with pytest.raises(ValueError):
            BiasConfig(np.array(alphas))


class TestStandardRound:
    def test_consensus_absorbing(self, c8):
        st = OpinionState.from_assignment(c8, [1] * 8, kappa=2)
        rng = make_rng(0)
        for _ in range(20):
            st = dynamics.standard_voter_round(c8, st, rng)
            assert st.is_consensus()

    def test_k2_one_round_probabilities(self):
        g = graphs.complete_graph(2)
        rng = make_rng(5)
        outcomes = {"consensus": 0, "discordant": 0}
        trials = 20000
        for _ in range(trials):
            st = OpinionState.from_assignment(g, [0, 1])
            nxt = dynamics.standard_voter_round(g, st, rng)
            outcomes["consensus" if nxt.is_consensus() else "discordant"] += 1
        p = outcomes["consensus"] / trials
        assert abs(p - 0.5) <= 4 * math.sqrt(0.25 / trials)

    def test_marginal_flip_probability(self):
        # each node flips with probability lam/(2d), checked per node
        g = graphs.generate_random_regular(12, 4, seed=6)
        a = np.array([0] * 5 + [1] * 7)
        st = OpinionState.from_assignment(g, a)
        rng = make_rng(8)
        trials = 40000
        flips = np.zeros(12)
        for _ in range(trials):
            nxt = dynamics.standard_voter_round(g, st, rng)
            flips += nxt.assignment != a
        expected = st.lam / (2.0 * g.degrees)
        band = 4 * np.sqrt(np.maximum(expected * (1 - expected), 1e-9) / trials)
        assert (np.abs(flips / trials - expected) <= band).all()

    def test_volume_conservation(self):
        g = graphs.star_graph(9)
        st = OpinionState.from_assignment(g, np.arange(9))
        rng = make_rng(3)
        for _ in range(30):
            st = dynamics.standard_voter_round(g, st, rng)
            assert int(st.volumes.sum()) == 2 * g.m


class TestBiasedRound:
    def test_all_preferred_absorbing(self):
        g = graphs.generate_random_regular(10, 3, seed=1)
        bias = BiasConfig(np.array([1.0, 0.5]))
        st = OpinionState.from_assignment(g, np.zeros(10, dtype=np.int64), kappa=2)
        rng = make_rng(1)
        nxt = dynamics.biased_voter_round(g, st, bias, rng)
        assert (nxt.assignment == 0).all()

    def test_surrounded_node_flips_surely(self):
        # a non-preferred node whose neighbours all hold the preferred
        # opinion adopts it with probability alpha_0 = 1
        g = graphs.star_graph(5)
        a = np.array([1, 0, 0, 0, 0])
        bias = BiasConfig(np.array([1.0, 0.5]))
        rng = make_rng(2)
        with pytest.warns(NonRegularGraphWarning):
            for _ in range(50):
                st = OpinionState.from_assignment(g, a, kappa=2)
                nxt = dynamics.biased_voter_round(g, st, bias, rng)
                assert nxt.assignment[0] == 0

    def test_marginal_alpha_lambda_over_d(self):
        g = graphs.generate_random_regular(12, 4, seed=9)
        a = np.array([0] * 6 + [1] * 6)
        st = OpinionState.from_assignment(g, a)
        bias = BiasConfig(np.array([1.0, 0.6]))
        rng = make_rng(11)
        trials = 40000
        flips = np.zeros(12)
        for _ in range(trials):
            nxt = dynamics.biased_voter_round(g, st, bias, rng)
            flips += nxt.assignment != a
        expected = np.where(a == 0, 0.6 * st.lam / 4.0, st.lam / 4.0)
        band = 4 * np.sqrt(np.maximum(expected * (1 - expected), 1e-9) / trials)
        assert (np.abs(flips / trials - expected) <= band).all()

    def test_regularity_enforcement(self):
        g = graphs.star_graph(4)
        bias = BiasConfig(np.array([1.0, 0.5]))
        st = OpinionState.from_assignment(g, [0, 1, 1, 1], kappa=2)
        with pytest.raises(NonRegularGraph):
            dynamics.biased_voter_round(g, st, bias, make_rng(0), strict_regular=True)
        with pytest.warns(NonRegularGraphWarning):
            dynamics.biased_voter_round(g, st, bias, make_rng(0))


class TestRunUntilConsensus:
    def test_single_node(self):
        g = graphs.build_graph([], 1)
        prov = static_provider.__wrapped__ if hasattr(static_provider, "__wrapped__") else None
        # a single node is already in consensus; no provider interaction
        from voterlab.adversary import StaticProvider

        class Trivial(StaticProvider):
            def __init__(self):
                self.graph = g
                self.degree_sequence = g.degrees
                self.is_static = True
                self.phi = 1.0

        trace = run_until_consensus(Trivial(), [0], max_rounds=10, seed=0)
        assert trace.T == 0

    def test_k2_expected_time(self):
        g = graphs.complete_graph(2)
        ts = stats.mc_consensus_times(g, np.array([0, 1]), 100_000, 42)
        se = math.sqrt(2.0 / len(ts))  # var of geometric(1/2) is 2
        assert abs(ts.mean() - 2.0) <= 3 * se

    def test_c4_distinct_matches_oracle(self):
        g = graphs.cycle_graph(4)
        exact = oracle.exact_expected_consensus_time(g, [0, 1, 2, 3])
        ts = stats.mc_consensus_times(g, np.arange(4), 50_000, 7)
        se = ts.std() / math.sqrt(len(ts))
        assert abs(ts.mean() - exact.expected_absorption_time) <= 4 * se

    def test_fast_and_general_paths_agree(self, c8):
        prov = static_provider(c8)
        for seed in range(8):
            fast = run_until_consensus(
                prov, np.arange(8), max_rounds=10**5, seed=seed, record_trace=False
            )
            slow = run_until_consensus(
                prov, np.arange(8), max_rounds=10**5, seed=seed, record_trace=True
            )
            assert fast.T == slow.T

    def test_max_rounds_flagged(self, c8):
        prov = static_provider(c8)
        trace = run_until_consensus(prov, np.arange(8), max_rounds=1, seed=1)
        if trace.T is None:
            assert trace.max_rounds_exceeded

    def test_degree_mismatch_detected(self, c8):
        from voterlab.adversary import GraphProvider

        class Lying(GraphProvider):
            degree_sequence = np.full(8, 3, dtype=np.int64)
            is_static = False

            def next(self, t, history):
                return c8, 0.25

        with pytest.raises(ProviderDegreeMismatch):
            run_until_consensus(Lying(), np.arange(8), max_rounds=10, seed=0)

    def test_absorption_stays_forever(self, c8):
        prov = static_provider(c8)
        trace = run_until_consensus(
            prov, np.zeros(8, dtype=np.int64), max_rounds=100, seed=3
        )
        assert trace.T == 0

    def test_thresholds_static(self, c8):
        prov = static_provider(c8)  # phi = 1/4 exactly
        cfg = ThresholdConfig(b_tau=1.0, b_tau_prime=1.0, b_tau_double_prime=1.0,
                              b_tau_triple_prime=1.0)
        trace = run_until_consensus(
            prov, np.arange(8), max_rounds=10**5, seed=2, thresholds=cfg,
            record_trace=True,
        )
        m, dmin, n = c8.m, 2, 8
        # tau: sum phi >= m/dmin -> t >= 4/(1/4) = 16
        if trace.T is not None and trace.T >= 16:
            assert trace.thresholds["tau"] == 16
        target_ppp = math.ceil(math.log(n) / 0.25)
        if trace.T is not None and trace.T >= target_ppp:
            assert trace.thresholds["tau_ppp"] == target_ppp

    def test_regeneration_keeps_preferred_alive(self):
        g = graphs.generate_random_regular(12, 4, seed=3)
        bias = BiasConfig(np.array([1.0, 0.9]))
        init = np.ones(12, dtype=np.int64)
        init[0] = 0
        prov = static_provider(g)
        trace = run_until_consensus(
            prov, init, model="biased", bias=bias, max_rounds=200, seed=5,
            regeneration=True, record_trace=True,
        )
        for row in trace.rows:
            assert row[1][0] >= 1 or row[6]  # preferred count, unless consensus


class TestInitialAssignments:
    def test_rules(self):
        assert make_initial_assignment(5, "distinct").tolist() == [0, 1, 2, 3, 4]
        split = make_initial_assignment(6, "split")
        assert split.tolist() == [0, 0, 0, 1, 1, 1]
        kr = make_initial_assignment(10, "k-random", k=3, rng=make_rng(0))
        assert int((kr == 0).sum()) == 3
        ex = make_initial_assignment(3, "explicit", assignment=[2, 0, 1])
        assert ex.tolist() == [2, 0, 1]
        with pytest.raises(ValueError):
            make_initial_assignment(3, "nope")


class TestStepSchedule:
    def test_empty_on_consensus(self, c8):
        sched = decompose_round_into_steps(c8, np.zeros(8, dtype=np.int64))
        assert len(sched) == 0

    def test_balance_invariant_random(self):
        rng = make_rng(14)
        for trial in range(40):
            g = graphs.generate_random_regular(24, 4, seed=trial % 7)
            a = (rng.random(24) < rng.uniform(0.2, 0.8)).astype(np.int64)
            sched = decompose_round_into_steps(g, a)
            if len(sched):
                gap = np.abs(sched.lambda_sum - sched.lambda_prime_sum)
                assert gap.max() <= 4
                assert sched.lambda_sum[-1] == sched.lambda_prime_sum[-1]

    def test_only_boundary_scheduled(self):
        g = graphs.cycle_graph(8)
        a = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        sched = decompose_round_into_steps(g, a)
        assert sorted(sched.nodes.tolist()) == [0, 3, 4, 7]
        assert (sched.lam > 0).all()

    def test_round_start_sums_equal_across_rounds(self):
        g = graphs.generate_random_regular(16, 4, seed=2)
        bias = BiasConfig(np.array([1.0, 0.5]))
        trace, _ = run_biased_with_steps(
            g, make_initial_assignment(16, "split"), bias, seed=3, max_rounds=50
        )
        # at each round boundary the two running sums coincide
        ends = np.flatnonzero(np.diff(trace.round_ids)) if len(trace) else []
        for e in ends:
            assert trace.lambda_sum[e] == trace.lambda_prime_sum[e]

    def test_interval_bounds_sampled(self):
        g = graphs.generate_random_regular(32, 6, seed=5)
        bias = BiasConfig(np.array([1.0, 0.5]))
        trace, _ = run_biased_with_steps(
            g, make_initial_assignment(32, "split"), bias, seed=9, max_rounds=200
        )
        rng = make_rng(10)
        d = 6
        for _ in range(50):
            i = int(rng.integers(0, max(len(trace) - 1, 1)))
            k = int(rng.integers(1, 3 * d))
            end = trace.interval_end(i, k)
            if end is None:
                continue
            assert end - i <= 2 * k + 2 * d
            base_lp = 0 if i == 0 else int(trace.lambda_prime_sum[i - 1])
            assert int(trace.lambda_prime_sum[end - 1]) - base_lp <= k + 2 * d


class TestGoodSequenceMonitor:
    def _small_trace(self, seed=0, alpha1=0.5, n=16, rounds=60, regen=True):
        g = graphs.generate_random_regular(n, 4, seed=1)
        bias = BiasConfig(np.array([1.0, alpha1]))
        init = np.ones(n, dtype=np.int64)
        init[:2] = 0
        trace, prevail = run_biased_with_steps(
            g, init, bias, seed=seed, max_rounds=rounds, regeneration=regen
        )
        return trace, bias, prevail

    def test_prevail_recorded(self):
        trace, bias, prevail = self._small_trace()
        report = monitor_good_sequence(trace, bias)
        if prevail is not None:
            assert report.prevailed_step is not None
            assert not [v for v in report.violations if v[0] == "a"]

    def test_vanish_violation_recorded(self):
        # without regeneration and with a weak preferred start the preferred
        # opinion can die; the monitor must flag property (b)
        for seed in range(30):
            trace, bias, prevail = self._small_trace(
                seed=seed, alpha1=0.95, regen=False, rounds=400
            )
            sizes = np.concatenate([[trace.initial_pref_size], trace.pref_sizes])
            if (sizes == 0).any():
                # pick a horizon that covers the vanish without exceeding the
                # trace (the defaults would declare the trace too short)
                beta_prime = len(trace) / (2.0 * trace.n)
                report = monitor_good_sequence(
                    trace, bias, ell=2.0, beta_prime=beta_prime
                )
                assert [v for v in report.violations if v[0] == "b"]
                return
        pytest.skip("preferred opinion never vanished in 30 weak runs")

    def test_drawdown_violation_with_tiny_ell(self):
        trace, bias, _ = self._small_trace(seed=3)
        sizes = np.concatenate([[trace.initial_pref_size], trace.pref_sizes])
        lam = np.concatenate([[0], trace.lambda_sum])
        # brute force over valid windows: ends must advance the cut-degree sum
        worst = 0
        for j in range(1, len(trace) + 1):
            if lam[j] == lam[j - 1]:
                continue
            for i in range(j):
                if lam[j] - lam[i] >= 1:
                    worst = max(worst, int(sizes[i] - sizes[j]))
        if worst < 1:
            pytest.skip("trace has no valid-window drawdown")
        report = monitor_good_sequence(trace, bias, ell=worst - 0.5, beta_prime=1e9)
        assert [v for v in report.violations if v[0] == "c"]
        clean = monitor_good_sequence(trace, bias, ell=worst + 0.5, beta_prime=1e9)
        assert not [v for v in clean.violations if v[0] == "c"]

    def test_growth_checked_with_small_parameters(self):
        trace, bias, _ = self._small_trace(seed=4)
        report = monitor_good_sequence(
            trace, bias, ell=1.0, beta_prime=0.5, gamma_values=[1.0, 2.0]
        )
        assert report.y_stats  # windows completed and were evaluated

    def test_y_matches_flip_counts(self):
        trace, bias, _ = self._small_trace(seed=5)
        # Y over a window equals gained minus lost flips by definition
        i, k = 0, 10
        end = trace.interval_end(i, k)
        if end is None:
            pytest.skip("window incomplete")
        gained = int((trace.delta[i:end] == 1).sum())
        lost = int((trace.delta[i:end] == -1).sum())
        sizes = np.concatenate([[trace.initial_pref_size], trace.pref_sizes])
        assert sizes[end] - sizes[i] == gained - lost

    def test_too_short(self):
        trace, bias, _ = self._small_trace(seed=6, rounds=2)
        if trace.pref_sizes.size and (trace.pref_sizes == trace.n).any():
            pytest.skip("prevailed immediately")
        with pytest.raises(TraceTooShort):
            monitor_good_sequence(trace, bias)


class TestCheckpointSchedule:
    def test_endpoints(self):
        bias = BiasConfig(np.array([1.0, 0.5]))
        sched = checkpoint_schedule(64, 4, bias, 0.25, max_rounds=10**30)
        t0, z0 = sched[0]
        assert (t0, z0) == (0, 0.0)
        t_last, z_last = sched[-1]
        assert z_last == 64.0

    def test_static_phase_closed_form(self):
        bias = BiasConfig(np.array([1.0, 0.5]))
        phi = 0.125
        sched = checkpoint_schedule(16, 4, bias, phi, max_rounds=10**30)
        ell, beta_prime, _ = dynamics.good_sequence_parameters(16, 4, bias)
        expect_t1 = math.ceil(2 * (12 * ell * beta_prime / 4) / phi)
        assert sched[1][0] == expect_t1

    def test_exhausted(self):
        bias = BiasConfig(np.array([1.0, 0.5]))
        with pytest.raises(ScheduleExhausted):
            checkpoint_schedule(64, 4, bias, [0.1, 0.1, 0.1], max_rounds=10)

    def test_monotone_targets_with_small_ell(self):
        # the tabulated targets double to n/2 and then close the complement;
        # this shape is visible once ell is small relative to n
        bias = BiasConfig(np.array([1.0, 0.5]))
        sched = checkpoint_schedule(
            256, 8, bias, 0.2, max_rounds=10**30, ell=1.0, beta_prime=2.0
        )
        zetas = [z for _, z in sched]
        assert zetas == sorted(zetas)
        assert 128.0 in zetas  # plateau at n/2
        assert zetas[-1] == 256.0

    def test_paper_constants_emitted_verbatim(self):
        bias = BiasConfig(np.array([1.0, 0.5]))
        ell, _, _ = dynamics.good_sequence_parameters(256, 8, bias)
        sched = checkpoint_schedule(256, 8, bias, 0.2, max_rounds=10**30)
        assert sched[1][1] == 2 * ell  # even though 2*ell exceeds n here


class TestPotentialTracker:
    def test_bookkeeping(self):
        pt = dynamics.PotentialTracker(c=1.0, d=4.0)
        pt.start(16)
        assert pt.psi == 4.0
        pt.update(9, 0.25)
        pt.update(4, 0.25)
        assert pt.phi_cumsum == pytest.approx(0.5)
        assert pt.g_value == pytest.approx(4 / 8)
        assert pt.z_value == pytest.approx(0.5 + 0.5)
        pt.validate()


class TestMonotoneCoupling:
    def test_weaker_bias_is_slower(self):
        g = graphs.generate_random_regular(48, 4, seed=8)
        init = make_initial_assignment(48, "split")
        medians = {}
        for a1 in (0.3, 0.9):
            _, rounds = stats.mc_biased_prevail(
                g, init, np.array([1.0, a1]), 400, 77, max_rounds=20000
            )
            medians[a1] = np.median(rounds)
        # raising alpha_1 toward 1 weakens the bias and cannot speed things up
        assert medians[0.9] >= medians[0.3]


def test_monitors_populate_trace():
    g = graphs.generate_random_regular(32, 4, seed=5)
    bias = BiasConfig(np.array([1.0, 0.5]))
    init = make_initial_assignment(32, "k-random", k=6, rng=make_rng(1))
    prov = static_provider(g)
    trace = run_until_consensus(
        prov, init, model="biased", bias=bias, max_rounds=2000, seed=4,
        monitors=("balance", "steps", "good-sequence", "checkpoints"),
        regeneration=True, record_trace=True,
    )
    assert trace.steps is not None and len(trace.steps) > 0
    gaps = np.abs(trace.steps.lambda_sum - trace.steps.lambda_prime_sum)
    assert gaps.max() <= 4
    if trace.good_sequence is not None:
        assert trace.good_sequence.t_prime > 0
    assert trace.checkpoints is not None
    t0, z0, obs0, ok0 = trace.checkpoints[0]
    assert (t0, z0) == (0, 0.0) and ok0


def test_biased_round_three_opinions():
    g = graphs.generate_random_regular(12, 4, seed=2)
    bias = BiasConfig(np.array([1.0, 0.5, 0.5]))
    st = OpinionState.from_assignment(g, np.arange(12) % 3, kappa=3)
    rng = make_rng(6)
    for _ in range(10):
        st = dynamics.biased_voter_round(g, st, bias, rng)
        assert int(st.volumes.sum()) == 2 * g.m
        assert st.counts.sum() == 12


def test_trace_record_csv(tmp_path, c8):
    prov = static_provider(c8)
    trace = run_until_consensus(prov, np.arange(8), max_rounds=10**4, seed=0)
    path = tmp_path / "t.csv"
    trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == (
        "t," + ",".join(f"count{i}" for i in range(8)) + ",volS,psi,cut,phi,consensus"
    )
    assert len(lines) == len(trace.rows) + 1
    assert trace.T == len(trace.rows) - 1
