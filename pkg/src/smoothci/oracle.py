"""Monte Carlo oracle for the exact formulas.

Simulates the standardized estimator pair directly from its joint
normal law, pushes each draw through the same estimator and interval
constructions the analytic layer describes, and reports empirical
means, standard deviations, coverages and lengths with Monte Carlo
standard errors.  Everything runs in standardized units: the true
parameter of interest is 0 and sigma * sqrt(v_theta) is 1, which the
coverage and length theory says costs no generality.  The simulation
is the independent check on the quadrature results, so it deliberately
shares only the kernel evaluations with the analytic path, never the
integrals.

Reproducibility contract: a SimPlan pins the full output.  Draws are
generated in fixed-size chunks, each from its own Philox substream
spawned off the plan seed, and chunk results are reduced in index
order.  Parallel evaluation of chunks would produce the same summary;
nothing depends on thread count or scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernel
from .gauss import z_quantile
from .intervals import IntervalRule, Scenario
from .kernel import PretestSpec

#: Replications per random substream.  Part of the output contract:
#: changing it reshuffles which draws land in which substream.
CHUNK = 8192

#: Spec'd replication counts: acceptance runs and quick smoke runs.
DEFAULT_REPLICATIONS = 1_000_000
SMOKE_REPLICATIONS = 10_000

_MAX_BOOT_BLOCK = 1 << 21


@dataclass(frozen=True)
class SimPlan:
    """Everything that determines a simulation run, bit for bit."""

    replications: int
    seed: int
    scenario: Scenario
    spec: PretestSpec
    alpha: float
    bootstrap_B: int = 0

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError(f"SimPlan: replications must be >= 1, got {self.replications}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("SimPlan: seed must be a 64-bit nonnegative integer")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"SimPlan: alpha must be in (0, 1), got {self.alpha}")
        if self.bootstrap_B < 0:
            raise ValueError("SimPlan: bootstrap_B must be >= 0 (0 = ideal smoothing)")
        if not isinstance(self.scenario, Scenario) or not isinstance(self.spec, PretestSpec):
            raise ValueError("SimPlan: scenario and spec must be the dedicated types")


@dataclass(frozen=True)
class StandardErrors:
    """Monte Carlo standard errors, one per summary statistic.

    Conventions: the mean's is sample sd / sqrt(n); the sd's comes
    from the fourth-moment delta method,
    sqrt((m4 - m2^2) / (4 m2 n)) with central moments m2, m4; the
    coverage's is the binomial sqrt(p (1 - p) / n); the length's is
    the length sample sd / sqrt(n).
    """

    mean_estimate: float
    sd_estimate: float
    empirical_coverage: float
    mean_length: float

    def __post_init__(self) -> None:
        for name in ("mean_estimate", "sd_estimate", "empirical_coverage", "mean_length"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0.0):
                raise ValueError(f"StandardErrors: {name} must be finite and >= 0")


@dataclass(frozen=True)
class SimSummary:
    """Empirical summary of one simulation run."""

    mean_estimate: float
    sd_estimate: float
    empirical_coverage: float
    mean_length: float
    standard_errors: StandardErrors

    def __post_init__(self) -> None:
        if not math.isfinite(self.mean_estimate):
            raise ValueError("SimSummary: mean_estimate must be finite")
        if not (math.isfinite(self.sd_estimate) and self.sd_estimate >= 0.0):
            raise ValueError("SimSummary: sd_estimate must be finite and >= 0")
        if not 0.0 <= self.empirical_coverage <= 1.0:
            raise ValueError("SimSummary: empirical_coverage must be in [0, 1]")
        if not (math.isfinite(self.mean_length) and self.mean_length >= 0.0):
            raise ValueError("SimSummary: mean_length must be finite and >= 0")


def simulate_pair(
    scenario: Scenario, rng: np.random.Generator, size: int | None = None
) -> tuple[float, float] | tuple[np.ndarray, np.ndarray]:
    """Draw (theta_hat_std, gamma_hat) from the joint law.

    The pair is bivariate normal with means (0, gamma), unit variances
    and correlation rho; it is built from two independent standard
    normals via the Cholesky relation

        gamma_hat = gamma + Z1,
        theta_hat_std = rho * Z1 + sqrt(1 - rho^2) * Z2.

    With size=None a single pair of floats comes back; otherwise two
    arrays of the given length.
    """
    n = 1 if size is None else int(size)
    if n < 1:
        raise ValueError(f"simulate_pair: size must be >= 1, got {size}")
    z = rng.standard_normal((2, n))
    gamma_hat = scenario.gamma + z[0]
    theta_hat_std = scenario.rho * z[0] + math.sqrt(1.0 - scenario.rho**2) * z[1]
    if size is None:
        return float(theta_hat_std[0]), float(gamma_hat[0])
    return theta_hat_std, gamma_hat


def smoothed_estimate_finite_B(
    theta_hat_std: float,
    gamma_hat: float,
    scenario_rho: float,
    spec: PretestSpec,
    B: int,
    rng: np.random.Generator,
) -> float:
    """Average of the select-then-estimate rule over B parametric resamples.

    Each resample redraws the estimator pair from its joint law with
    the observed (theta_hat_std, gamma_hat) standing in for the true
    parameters, applies the discontinuous post-selection rule, and the
    B results are averaged.  As B grows this converges to the ideal
    smoothed estimate at rate B^{-1/2}.
    """
    B = int(B)
    if B < 1:
        raise ValueError(f"smoothed_estimate_finite_B: B must be >= 1, got {B}")
    rho = float(scenario_rho)
    if not math.isfinite(rho) or abs(rho) > kernel.RHO_MAX:
        raise ValueError(
            f"smoothed_estimate_finite_B: need |rho| <= {kernel.RHO_MAX}, got {rho}"
        )
    if not (math.isfinite(theta_hat_std) and math.isfinite(gamma_hat)):
        raise ValueError("smoothed_estimate_finite_B: estimates must be finite")
    z = rng.standard_normal((2, B))
    gamma_star = gamma_hat + z[0]
    theta_star = theta_hat_std + rho * z[0] + math.sqrt(1.0 - rho * rho) * z[1]
    accept = np.abs(gamma_star) <= spec.d
    return float(np.mean(theta_star - rho * gamma_star * accept))


def _centers_finite_B(
    theta_std: np.ndarray,
    gamma_hat: np.ndarray,
    rho: float,
    spec: PretestSpec,
    B: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Finite-B smoothed centers for a whole chunk, blockwise in memory."""
    m = theta_std.size
    out = np.empty(m)
    rows = max(1, _MAX_BOOT_BLOCK // B)
    sq = math.sqrt(1.0 - rho * rho)
    for start in range(0, m, rows):
        stop = min(start + rows, m)
        z = rng.standard_normal((2, stop - start, B))
        gamma_star = gamma_hat[start:stop, None] + z[0]
        theta_star = theta_std[start:stop, None] + rho * z[0] + sq * z[1]
        accept = np.abs(gamma_star) <= spec.d
        out[start:stop] = np.mean(theta_star - rho * gamma_star * accept, axis=1)
    return out


def run(plan: SimPlan, rule: IntervalRule) -> SimSummary:
    """Simulate the chosen interval rule and summarize it empirically.

    Per replication: draw the standardized pair, form the point
    estimate (ideal smoothed, finite-B smoothed when bootstrap_B > 0,
    post-selection, or unrestricted), form the interval exactly as
    build_interval does in standardized units, and record length and
    whether the interval contains 0, the standardized truth.
    Containment is closed-interval.  The chunked vector path is tested
    to agree with the one-replication-at-a-time construction.
    """
    rule = IntervalRule(rule)
    rho = plan.scenario.rho
    z_a = z_quantile(1.0 - 0.5 * plan.alpha)
    narrow = z_a * math.sqrt(1.0 - rho * rho)
    d = plan.spec.d

    n = plan.replications
    n_chunks = -(-n // CHUNK)
    streams = np.random.SeedSequence(plan.seed).spawn(n_chunks)

    s1 = s2 = s3 = s4 = 0.0
    covered = 0
    len1 = len2 = 0.0
    for idx in range(n_chunks):
        m = min(CHUNK, n - idx * CHUNK)
        rng = np.random.Generator(np.random.Philox(streams[idx]))
        theta_std, gamma_hat = simulate_pair(plan.scenario, rng, size=m)

        if rule is IntervalRule.FULL_MODEL:
            center = theta_std
            half = np.full(m, z_a)
        elif rule is IntervalRule.PMS:
            accept = np.abs(gamma_hat) <= d
            center = theta_std - rho * gamma_hat * accept
            half = np.where(accept, narrow, z_a)
        else:
            if plan.bootstrap_B > 0:
                center = _centers_finite_B(
                    theta_std, gamma_hat, rho, plan.spec, plan.bootstrap_B, rng
                )
            else:
                center = theta_std - rho * np.asarray(kernel.k(gamma_hat, plan.spec))
            if rule is IntervalRule.SD:
                half = z_a * np.asarray(kernel.r(gamma_hat, rho, plan.spec))
            else:
                half = z_a * np.asarray(kernel.r_delta(gamma_hat, rho, plan.spec))

        s1 += float(center.sum())
        c2 = center * center
        s2 += float(c2.sum())
        s3 += float((c2 * center).sum())
        s4 += float((c2 * c2).sum())
        covered += int(np.count_nonzero(np.abs(center) <= half))
        length = 2.0 * half
        len1 += float(length.sum())
        len2 += float((length * length).sum())

    mean = s1 / n
    m2 = max(s2 / n - mean * mean, 0.0)
    m4 = max(
        s4 / n - 4.0 * mean * (s3 / n) + 6.0 * mean**2 * (s2 / n) - 3.0 * mean**4, 0.0
    )
    sd = math.sqrt(m2 * n / (n - 1)) if n > 1 else 0.0
    p_hat = covered / n
    mean_len = len1 / n
    var_len = max((len2 - n * mean_len * mean_len) / (n - 1), 0.0) if n > 1 else 0.0

    se_mean = sd / math.sqrt(n)
    se_sd = math.sqrt(max(m4 - m2 * m2, 0.0) / (4.0 * m2 * n)) if m2 > 0.0 else 0.0
    se_cov = math.sqrt(p_hat * (1.0 - p_hat) / n)
    se_len = math.sqrt(var_len / n)

    return SimSummary(
        mean_estimate=mean,
        sd_estimate=sd,
        empirical_coverage=p_hat,
        mean_length=mean_len,
        standard_errors=StandardErrors(
            mean_estimate=se_mean,
            sd_estimate=se_sd,
            empirical_coverage=se_cov,
            mean_length=se_len,
        ),
    )
