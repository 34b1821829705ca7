"""Tests for the Monte Carlo oracle.

The oracle exists to check the quadrature layer, so these tests point
the other way: they check that the simulation draws what it claims to
draw, that a run is reproducible bit for bit, and that the vectorized
chunk path is the same computation as building one interval at a time
through the public construction.
"""

import math

import numpy as np
import pytest

from smoothci.gauss import z_quantile
from smoothci.intervals import IntervalRule, Scenario, build_interval, coverage_pms, coverage_sd
from smoothci.kernel import FittedModel, PretestSpec, k, r, smoothed_estimate
from smoothci.oracle import (
    CHUNK,
    SimPlan,
    SimSummary,
    run,
    simulate_pair,
    smoothed_estimate_finite_B,
)

SPEC10 = PretestSpec.from_size(0.10)
ALPHA = 0.05


class TestSimPlan:
    def test_validation(self):
        sc = Scenario(1.0, 0.5)
        with pytest.raises(ValueError):
            SimPlan(replications=0, seed=1, scenario=sc, spec=SPEC10, alpha=ALPHA)
        with pytest.raises(ValueError):
            SimPlan(replications=10, seed=-1, scenario=sc, spec=SPEC10, alpha=ALPHA)
        with pytest.raises(ValueError):
            SimPlan(replications=10, seed=2**64, scenario=sc, spec=SPEC10, alpha=ALPHA)
        with pytest.raises(ValueError):
            SimPlan(replications=10, seed=1, scenario=sc, spec=SPEC10, alpha=1.0)
        with pytest.raises(ValueError):
            SimPlan(replications=10, seed=1, scenario=sc, spec=SPEC10, alpha=ALPHA,
                    bootstrap_B=-1)
        with pytest.raises(ValueError):
            SimPlan(replications=10, seed=1, scenario=(1.0, 0.5), spec=SPEC10, alpha=ALPHA)


class TestSimulatePair:
    def test_scalar_mode(self):
        rng = np.random.default_rng(0)
        theta, gamma = simulate_pair(Scenario(2.0, 0.5), rng)
        assert isinstance(theta, float) and isinstance(gamma, float)

    def test_size_validation(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            simulate_pair(Scenario(0.0, 0.0), rng, size=0)

    @pytest.mark.parametrize("rho", [0.0, 0.7, -0.7])
    def test_joint_moments(self, rho):
        n = 1_000_000
        rng = np.random.default_rng(123)
        theta, gamma = simulate_pair(Scenario(1.5, rho), rng, size=n)
        rn = 1.0 / math.sqrt(n)
        assert abs(theta.mean()) < 4 * rn
        assert abs(gamma.mean() - 1.5) < 4 * rn
        assert abs(theta.std() - 1.0) < 4 * rn
        assert abs(gamma.std() - 1.0) < 4 * rn
        corr = np.corrcoef(theta, gamma)[0, 1]
        assert abs(corr - rho) < 4 * (1.0 - rho * rho) * rn


class TestFiniteB:
    def test_validation(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            smoothed_estimate_finite_B(0.0, 0.0, 0.5, SPEC10, 0, rng)
        with pytest.raises(ValueError):
            smoothed_estimate_finite_B(0.0, 0.0, 0.9999, SPEC10, 10, rng)
        with pytest.raises(ValueError):
            smoothed_estimate_finite_B(math.nan, 0.0, 0.5, SPEC10, 10, rng)

    def test_rho_zero_reduces_to_mean_resample(self):
        # no correlation means no adjustment: the average converges to
        # the observed estimate itself
        rng = np.random.default_rng(11)
        est = smoothed_estimate_finite_B(0.37, 1.0, 0.0, SPEC10, 10_000, rng)
        assert est == pytest.approx(0.37, abs=4.0 / math.sqrt(10_000))

    def test_converges_to_ideal_smoothed_estimate(self):
        fit = FittedModel(theta_hat=0.2, gamma_hat=1.0, sigma=1.0,
                          v_theta=1.0, v_tau=1.0, rho=0.7)
        ideal = smoothed_estimate(fit, SPEC10)
        rng = np.random.default_rng(99)
        B = 100_000
        est = smoothed_estimate_finite_B(0.2, 1.0, 0.7, SPEC10, B, rng)
        assert est == pytest.approx(ideal, abs=5.0 / math.sqrt(B))

    def test_bootstrap_mean_is_unbiased_for_the_kernel(self):
        # the resample average of the discarded-term is exactly
        # rho * k(gamma_hat) in expectation; check it across many
        # independent finite-B evaluations at the same observed point
        rng = np.random.default_rng(5)
        ests = [smoothed_estimate_finite_B(0.0, 0.8, 0.7, SPEC10, 400, rng)
                for _ in range(400)]
        target = -0.7 * k(0.8, SPEC10)
        se = np.std(ests) / math.sqrt(len(ests))
        assert np.mean(ests) == pytest.approx(target, abs=4 * se)


def replay_run(plan, rule):
    """Recompute a run one replication at a time via build_interval."""
    n = plan.replications
    n_chunks = -(-n // CHUNK)
    streams = np.random.SeedSequence(plan.seed).spawn(n_chunks)
    covered = 0
    centers = []
    lengths = []
    for idx in range(n_chunks):
        m = min(CHUNK, n - idx * CHUNK)
        rng = np.random.Generator(np.random.Philox(streams[idx]))
        theta_std, gamma_hat = simulate_pair(plan.scenario, rng, size=m)
        for i in range(m):
            fit = FittedModel(theta_hat=float(theta_std[i]),
                              gamma_hat=float(gamma_hat[i]),
                              sigma=1.0, v_theta=1.0, v_tau=1.0,
                              rho=plan.scenario.rho)
            rep = build_interval(fit, plan.spec, plan.alpha, rule)
            covered += rep.lower <= 0.0 <= rep.upper
            centers.append(rep.center)
            lengths.append(rep.upper - rep.lower)
    return covered, np.array(centers), np.array(lengths)


class TestRun:
    def test_bit_identical_reproducibility(self):
        plan = SimPlan(replications=20_000, seed=31, scenario=Scenario(1.0, 0.7),
                       spec=SPEC10, alpha=ALPHA)
        a = run(plan, IntervalRule.SD)
        b = run(plan, IntervalRule.SD)
        assert a == b

    def test_different_seeds_differ(self):
        sc = Scenario(1.0, 0.7)
        a = run(SimPlan(replications=10_000, seed=1, scenario=sc, spec=SPEC10,
                        alpha=ALPHA), IntervalRule.SD)
        b = run(SimPlan(replications=10_000, seed=2, scenario=sc, spec=SPEC10,
                        alpha=ALPHA), IntervalRule.SD)
        assert a != b

    def test_full_model_exact_interval(self):
        plan = SimPlan(replications=100_000, seed=7, scenario=Scenario(2.0, 0.7),
                       spec=SPEC10, alpha=ALPHA)
        out = run(plan, IntervalRule.FULL_MODEL)
        z_a = z_quantile(0.975)
        assert out.mean_length == pytest.approx(2 * z_a, abs=1e-12)
        # constant length: the variance accumulator leaves only rounding residue
        assert out.standard_errors.mean_length < 1e-8
        assert abs(out.empirical_coverage - 0.95) < 4 * out.standard_errors.empirical_coverage
        assert abs(out.mean_estimate) < 4 * out.standard_errors.mean_estimate
        assert abs(out.sd_estimate - 1.0) < 4 * out.standard_errors.sd_estimate

    def test_sd_smoke_against_quadrature(self):
        sc = Scenario(1.0, 0.7)
        plan = SimPlan(replications=50_000, seed=17, scenario=sc, spec=SPEC10,
                       alpha=ALPHA)
        out = run(plan, IntervalRule.SD)
        cp = coverage_sd(sc, SPEC10, ALPHA)
        assert abs(out.empirical_coverage - cp) < 4 * out.standard_errors.empirical_coverage
        sd_true = r(1.0, 0.7, SPEC10)
        assert abs(out.sd_estimate - sd_true) < 4 * out.standard_errors.sd_estimate

    def test_pms_smoke_against_quadrature(self):
        sc = Scenario(1.0, 0.7)
        plan = SimPlan(replications=50_000, seed=23, scenario=sc, spec=SPEC10,
                       alpha=ALPHA)
        out = run(plan, IntervalRule.PMS)
        cp = coverage_pms(sc, SPEC10, ALPHA)
        assert abs(out.empirical_coverage - cp) < 4 * out.standard_errors.empirical_coverage

    @pytest.mark.parametrize("rule", [IntervalRule.SD, IntervalRule.PMS])
    def test_chunked_path_equals_one_at_a_time(self, rule):
        # n spans multiple chunks on purpose
        plan = SimPlan(replications=10_000, seed=41, scenario=Scenario(1.0, 0.6),
                       spec=SPEC10, alpha=ALPHA)
        out = run(plan, rule)
        covered, centers, lengths = replay_run(plan, rule)
        assert out.empirical_coverage == covered / plan.replications
        assert out.mean_estimate == pytest.approx(float(centers.mean()), abs=1e-12)
        assert out.mean_length == pytest.approx(float(lengths.mean()), abs=1e-12)
        assert out.sd_estimate == pytest.approx(float(centers.std(ddof=1)), abs=1e-9)

    def test_partial_final_chunk(self):
        plan = SimPlan(replications=CHUNK + 7, seed=3, scenario=Scenario(0.0, 0.4),
                       spec=SPEC10, alpha=ALPHA)
        out = run(plan, IntervalRule.SD_DELTA)
        assert 0.0 < out.empirical_coverage < 1.0

    def test_bootstrap_smoothing_smoke(self):
        plan = SimPlan(replications=4_000, seed=13, scenario=Scenario(1.0, 0.7),
                       spec=SPEC10, alpha=ALPHA, bootstrap_B=64)
        out = run(plan, IntervalRule.SD_DELTA)
        again = run(plan, IntervalRule.SD_DELTA)
        assert out == again
        # finite-B centers are noisier than ideal ones but the interval
        # still has to cover at a broadly sane rate
        assert 0.85 < out.empirical_coverage <= 1.0

    def test_bootstrap_noise_inflates_center_sd(self):
        sc = Scenario(1.0, 0.7)
        ideal = run(SimPlan(replications=20_000, seed=29, scenario=sc, spec=SPEC10,
                            alpha=ALPHA), IntervalRule.SD)
        noisy = run(SimPlan(replications=20_000, seed=29, scenario=sc, spec=SPEC10,
                            alpha=ALPHA, bootstrap_B=16), IntervalRule.SD)
        assert noisy.sd_estimate > ideal.sd_estimate

    def test_summary_is_a_plain_value_object(self):
        plan = SimPlan(replications=2_000, seed=5, scenario=Scenario(0.0, 0.0),
                       spec=SPEC10, alpha=ALPHA)
        out = run(plan, IntervalRule.FULL_MODEL)
        assert isinstance(out, SimSummary)
        with pytest.raises(Exception):
            out.mean_estimate = 0.0
