import math

import numpy as np
import pytest

from voterlab import graphs, stats
from voterlab.adversary import static_provider
from voterlab.dynamics import run_until_consensus
from voterlab.stats import (
    CertificateViolated,
    Estimate,
    IIDFamily,
    InsufficientSizes,
    PrefixAdaptiveFamily,
    StatsError,
    VoterBoundaryFamily,
    chernoff_upper_bound,
    dependent_chernoff_check,
    fit_scaling,
    median_bound_check,
    run_trials,
)


class TestRunTrials:
    def _k2_trial(self, i, rng):
        g = graphs.complete_graph(2)
        prov = static_provider(g)
        trace = run_until_consensus(
            prov, [0, 1], max_rounds=10**6, rng=rng, record_trace=False
        )
        return float(trace.T)

    def test_k2_mean_band(self):
        est = run_trials(self._k2_trial, 100_000, base_seed=13)
        assert 1.94 <= est.mean <= 2.06

    def test_deterministic(self):
        a = run_trials(self._k2_trial, 200, base_seed=5)
        b = run_trials(self._k2_trial, 200, base_seed=5)
        assert np.array_equal(a.values, b.values)
        c = run_trials(self._k2_trial, 200, base_seed=5, threads=2)
        assert np.array_equal(a.values, c.values)

    def test_trial_floor(self):
        with pytest.raises(StatsError):
            run_trials(self._k2_trial, 10, base_seed=0)

    def test_median_ci(self):
        est = Estimate.from_values(np.arange(1000, dtype=float), 0)
        lo, hi = est.median_ci()
        assert lo <= est.median <= hi


class TestFitScaling:
    def test_exact_square_calibration(self):
        fit = fit_scaling([32, 64, 128, 256], [n**2 for n in (32, 64, 128, 256)])
        assert abs(fit.exponent - 2.0) <= 0.05
        assert fit.stderr == pytest.approx(0.0, abs=1e-12)

    def test_constant_family(self):
        fit = fit_scaling([8, 16, 64, 128], [5.0, 5.0, 5.0, 5.0])
        assert abs(fit.exponent) <= 1e-12

    def test_too_few_sizes(self):
        with pytest.raises(InsufficientSizes):
            fit_scaling([8, 16, 32], [1, 2, 3])

    def test_span_requirement(self):
        with pytest.raises(InsufficientSizes):
            fit_scaling([8, 10, 12, 14], [1, 2, 3, 4])


class TestChernoff:
    def test_bound_value(self):
        # ell=100, p=1/2 gives b=50; delta=0.5 puts the bound near 4.5e-3
        assert chernoff_upper_bound(50, 0.5) == pytest.approx(4.47e-3, rel=0.01)

    def test_iid_both_parts(self):
        fam = IIDFamily(0.5, 100)
        rep_a = dependent_chernoff_check(fam, 0.5, 100_000, seed=3, part="a")
        assert rep_a.passed and rep_a.empirical <= rep_a.bound + 3 * rep_a.sigma_hat
        rep_b = dependent_chernoff_check(fam, 0.5, 100_000, seed=4, part="b")
        assert rep_b.passed

    def test_delta_zero_trivial(self):
        fam = IIDFamily(0.5, 50)
        rep = dependent_chernoff_check(fam, 0.0, 1000, seed=0, part="a")
        assert rep.bound == 1.0 and rep.passed

    def test_adaptive_families(self):
        up = PrefixAdaptiveFamily(10.0, 50, "upper")
        rep = dependent_chernoff_check(up, 0.5, 50_000, seed=2, part="a")
        assert rep.passed
        lo = PrefixAdaptiveFamily(10.0, 50, "lower")
        rep = dependent_chernoff_check(lo, 0.5, 50_000, seed=2, part="b")
        assert rep.passed

    def test_certificate_enforced(self):
        fam = IIDFamily(0.5, 100)
        fam.b = 40.0  # lie: the true budget is 50
        with pytest.raises(CertificateViolated):
            dependent_chernoff_check(fam, 0.5, 1000, seed=1, part="a")

    def test_wrong_part_rejected(self):
        up = PrefixAdaptiveFamily(10.0, 50, "upper")
        with pytest.raises(StatsError):
            dependent_chernoff_check(up, 0.5, 1000, seed=0, part="b")

    def test_voter_boundary_certificate(self):
        g = graphs.generate_random_regular(32, 4, seed=9)
        fam = VoterBoundaryFamily(g, np.array([1.0, 0.5]), k=40)
        z, bsum = fam.sample_sums(2000, seed=6)
        assert (bsum <= fam.b + 1e-9).all()
        rep = dependent_chernoff_check(fam, 0.5, 2000, seed=6, part="a")
        assert rep.passed


class TestMedianBound:
    def test_c_grid(self):
        values = np.array([9.0] * 700 + [50.0] * 300)
        rep = median_bound_check(values, bound=10.0)
        assert rep.c_min == 1 and not rep.escalated

    def test_escalation(self):
        values = np.array([19.0] * 700 + [50.0] * 300)
        rep = median_bound_check(values, bound=10.0)
        assert rep.c_min == 2 and rep.escalated

    def test_no_c_works(self):
        values = np.full(500, 100.0)
        rep = median_bound_check(values, bound=1.0)
        assert rep.c_min is None


def test_mc_helpers_deterministic(c8):
    a = stats.mc_consensus_times(c8, np.arange(8), 200, 9)
    b = stats.mc_consensus_times(c8, np.arange(8), 200, 9)
    assert np.array_equal(a, b)
    w1 = stats.mc_fixation_wins(c8, np.array([0, 0, 1, 1, 1, 1, 1, 1]), 200, 3)
    w2 = stats.mc_fixation_wins(c8, np.array([0, 0, 1, 1, 1, 1, 1, 1]), 200, 3)
    assert np.array_equal(w1, w2)


def test_one_step_volume_mean_preserved():
    # the replicated one-round volume sampler is unbiased for the volume
    g = graphs.generate_random_regular(20, 4, seed=2)
    state = np.array([0] * 8 + [1] * 12)
    from voterlab import kernels
    from voterlab.rng import make_rng

    lam = np.zeros(20, dtype=np.int64)
    kernels.lambda_counts(g.indptr, g.indices, state, lam)
    boundary = np.flatnonzero(lam > 0)
    rng = make_rng(4)
    out = np.empty(200_000, dtype=np.int64)
    kernels.one_step_vol_samples(
        g.indptr, g.indices, g.degrees, state, boundary, rng.random((200_000, 20)), out
    )
    vol0 = float(g.degrees[state == 0].sum())
    se = out.std() / math.sqrt(len(out))
    assert abs(out.mean() - vol0) <= 4 * se
