"""Smoothing kernels and point estimators for the pretest problem.

Setting: a linear regression is fit twice, once unrestricted and once
with a single linear restriction imposed, and a preliminary two-sided
test with cutoff d decides which fit supplies the parameter estimate.
After standardizing by sigma and the relevant design constants, the
whole problem is governed by three scalars: the standardized estimate
of the parameter of interest, the standardized test statistic for the
restriction, and the correlation rho between the two.

Averaging the discontinuous select-then-estimate rule over resampled
data replaces the hard indicator with the smooth kernel k below; q is
its derivative and r gives the standard deviation of the smoothed
estimator on the standardized scale.  All kernel functions here are
closed-form in the normal density and CDF except the ones defined by
an integral, which go through the fixed quadrature engine.

The error estimator sigma is treated as known throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gauss
from .gauss import Phi, phi, z_quantile

#: Largest correlation magnitude accepted by the smoothing analysis.
#: The coverage and length functionals degenerate as |rho| -> 1; the
#: linear-model front end cannot produce |rho| = 1 from a design of
#: full rank with distinct parameter and restriction directions, so
#: the cap costs nothing in practice.
RHO_MAX = 0.999

_PRETEST_CONSISTENCY_TOL = 1e-10
_SQRT_ARG_FLOOR = -1e-12


class ConsistencyError(ArithmeticError):
    """An internal identity failed beyond numerical slack.

    Raised when a quantity that is non-negative by construction (for
    example the variance under the square root in r) comes out more
    negative than accumulated rounding could explain.  It signals a
    bug, not bad user input.
    """


@dataclass(frozen=True)
class PretestSpec:
    """Cutoff d and size alpha1 of the preliminary two-sided test.

    The two fields are redundant by design: d is the (1 - alpha1/2)
    normal quantile.  Construct through ``from_size`` or
    ``from_cutoff`` and the pair is consistent by construction; direct
    construction double-checks the identity.
    """

    d: float
    alpha1: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.d) and self.d > 0.0):
            raise ValueError(f"PretestSpec: cutoff d must be positive and finite, got {self.d}")
        if not 0.0 < self.alpha1 < 1.0:
            raise ValueError(f"PretestSpec: test size must be in (0, 1), got {self.alpha1}")
        gap = abs(Phi(self.d) - (1.0 - 0.5 * self.alpha1))
        if gap > _PRETEST_CONSISTENCY_TOL:
            raise ValueError(
                "PretestSpec: cutoff and size disagree "
                f"(|Phi(d) - (1 - alpha1/2)| = {gap:.3e}); "
                "use from_size or from_cutoff"
            )

    @classmethod
    def from_size(cls, alpha1: float) -> "PretestSpec":
        """Spec for a test of size alpha1."""
        alpha1 = float(alpha1)
        if not 0.0 < alpha1 < 1.0:
            raise ValueError(f"PretestSpec.from_size: size must be in (0, 1), got {alpha1}")
        return cls(d=z_quantile(1.0 - 0.5 * alpha1), alpha1=alpha1)

    @classmethod
    def from_cutoff(cls, d: float) -> "PretestSpec":
        """Spec for a test that accepts the restriction when |statistic| <= d."""
        d = float(d)
        if not (math.isfinite(d) and d > 0.0):
            raise ValueError(f"PretestSpec.from_cutoff: cutoff must be positive, got {d}")
        return cls(d=d, alpha1=float(2.0 * Phi(-d)))


@dataclass(frozen=True)
class FittedModel:
    """Everything the interval constructions need from a fitted regression.

    theta_hat is the unrestricted estimate of the scalar parameter of
    interest, gamma_hat the standardized statistic testing the
    restriction, and rho the known correlation between the two
    estimators.  v_theta and v_tau are the design-determined variance
    factors (variances are sigma**2 times these).
    """

    theta_hat: float
    gamma_hat: float
    sigma: float
    v_theta: float
    v_tau: float
    rho: float

    def __post_init__(self) -> None:
        for name in ("theta_hat", "gamma_hat", "sigma", "v_theta", "v_tau", "rho"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"FittedModel: {name} must be finite")
        if self.sigma <= 0.0:
            raise ValueError(f"FittedModel: sigma must be positive, got {self.sigma}")
        if self.v_theta <= 0.0 or self.v_tau <= 0.0:
            raise ValueError("FittedModel: variance factors must be positive")
        if abs(self.rho) > 1.0:
            raise ValueError(f"FittedModel: correlation must satisfy |rho| <= 1, got {self.rho}")


def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not math.isfinite(rho):
        raise ValueError("correlation must be finite")
    if abs(rho) > RHO_MAX:
        raise ValueError(
            f"correlation magnitude {abs(rho)} exceeds the supported cap {RHO_MAX}"
        )
    return rho


def k(gamma: float | np.ndarray, spec: PretestSpec) -> float | np.ndarray:
    """Smoothing kernel: mean of z * 1{|z| <= d} under z ~ N(gamma, 1).

    Closed form
        k(gamma) = phi(d + gamma) - phi(d - gamma)
                   + gamma * (Phi(d - gamma) - Phi(-d - gamma)).

    Odd in gamma, bounded, and decaying like a normal tail once
    |gamma| is a few units past d.
    """
    g = np.asarray(gamma, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("k: gamma must be finite")
    d = spec.d
    out = phi(d + g) - phi(d - g) + g * (Phi(d - g) - Phi(-d - g))
    return float(out) if np.isscalar(gamma) or g.ndim == 0 else out


def q(gamma: float | np.ndarray, spec: PretestSpec) -> float | np.ndarray:
    """Derivative of k:

        q(gamma) = Phi(d - gamma) - Phi(-d - gamma)
                   - d * (phi(d + gamma) + phi(d - gamma)).

    Even in gamma.  q(0) = 1 - alpha1 - 2 d phi(d) < 1, and for the
    usual cutoffs q stays in (-1, 1), which keeps the delta-method
    scale factor below real and positive.
    """
    g = np.asarray(gamma, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("q: gamma must be finite")
    d = spec.d
    out = Phi(d - g) - Phi(-d - g) - d * (phi(d + g) + phi(d - g))
    return float(out) if np.isscalar(gamma) or g.ndim == 0 else out


def _kernel_moments(
    g: np.ndarray, spec: PretestSpec, panels: int, order: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, covariance-with-identity, and variance of k(z), z ~ N(g, 1).

    Returns, for each entry of g,
        mk  = E k(z),
        cov = E k(z) (z - g),
        var = E (k(z) - mk)^2,
    all through the shared rule in the standardized variable.
    """
    rule = gauss.quadrature_rule(panels=panels, order=order)
    z = rule.nodes
    w = rule.weights * phi(z)
    kmat = k(g[None, :] + z[:, None], spec)
    mk = w @ kmat
    cov = (w * z) @ kmat
    var = w @ (kmat - mk[None, :]) ** 2
    return mk, cov, var


def m_k(
    gamma: float | np.ndarray,
    spec: PretestSpec,
    *,
    panels: int = gauss.DEFAULT_PANELS,
    order: int = gauss.DEFAULT_ORDER,
) -> float | np.ndarray:
    """Mean of k(z) under z ~ N(gamma, 1), by quadrature."""
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if g.ndim != 1:
        raise ValueError("m_k: gamma must be scalar or 1-d")
    if not np.all(np.isfinite(g)):
        raise ValueError("m_k: gamma must be finite")
    mk, _, _ = _kernel_moments(g, spec, panels, order)
    return float(mk[0]) if np.isscalar(gamma) or np.asarray(gamma).ndim == 0 else mk


def r(
    gamma: float | np.ndarray,
    rho: float,
    spec: PretestSpec,
    *,
    panels: int = gauss.DEFAULT_PANELS,
    order: int = gauss.DEFAULT_ORDER,
) -> float | np.ndarray:
    """Standard deviation factor of the smoothed estimator.

    r(gamma; rho)^2 = 1 - 2 rho^2 E[k(z)(z - gamma)]
                        + rho^2 Var[k(z)],  z ~ N(gamma, 1).

    The argument of the square root is non-negative by construction.
    Values in [-1e-12, 0) are treated as rounding and clamped to zero;
    anything more negative raises ConsistencyError.  At rho = 0 the
    result is exactly 1.0.
    """
    rho = _check_rho(rho)
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if g.ndim != 1:
        raise ValueError("r: gamma must be scalar or 1-d")
    if not np.all(np.isfinite(g)):
        raise ValueError("r: gamma must be finite")
    _, cov, var = _kernel_moments(g, spec, panels, order)
    arg = 1.0 - 2.0 * rho * rho * cov + rho * rho * var
    bad = arg < _SQRT_ARG_FLOOR
    if np.any(bad):
        worst = float(np.min(arg))
        raise ConsistencyError(
            f"r: squared scale came out {worst:.3e} < {_SQRT_ARG_FLOOR:.0e}; "
            "the kernel moment identities are violated"
        )
    out = np.sqrt(np.maximum(arg, 0.0))
    return float(out[0]) if np.isscalar(gamma) or np.asarray(gamma).ndim == 0 else out


def r_delta(
    gamma: float | np.ndarray, rho: float, spec: PretestSpec
) -> float | np.ndarray:
    """Delta-method version of r, using the local slope q only:

        r_delta(gamma; rho)^2 = 1 - 2 rho^2 q(gamma) + rho^2 q(gamma)^2.

    Same clamping and consistency policy as r.  Since |q| < 1 for the
    cutoffs this package accepts, the argument is bounded away from
    zero and the clamp never fires in practice.
    """
    rho = _check_rho(rho)
    g = np.asarray(gamma, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("r_delta: gamma must be finite")
    qv = Phi(spec.d - g) - Phi(-spec.d - g) - spec.d * (phi(spec.d + g) + phi(spec.d - g))
    arg = 1.0 - 2.0 * rho * rho * qv + rho * rho * qv * qv
    bad = np.asarray(arg < _SQRT_ARG_FLOOR)
    if np.any(bad):
        worst = float(np.min(arg))
        raise ConsistencyError(
            f"r_delta: squared scale came out {worst:.3e} < {_SQRT_ARG_FLOOR:.0e}"
        )
    out = np.sqrt(np.maximum(arg, 0.0))
    return float(out) if np.isscalar(gamma) or g.ndim == 0 else out


def pms_estimate(fit: FittedModel, spec: PretestSpec) -> float:
    """Estimate after the preliminary test: the restricted-fit estimate
    of the parameter when the restriction is accepted (|gamma_hat| <= d),
    the unrestricted estimate otherwise.

    Discontinuous in gamma_hat at +-d with jump size
    |rho| * sigma * sqrt(v_theta) * d.
    """
    scale = fit.sigma * math.sqrt(fit.v_theta)
    if abs(fit.gamma_hat) <= spec.d:
        return fit.theta_hat - fit.rho * scale * fit.gamma_hat
    return fit.theta_hat


def smoothed_estimate(fit: FittedModel, spec: PretestSpec) -> float:
    """Infinite-resample limit of averaging pms_estimate over
    parametric resamples of the data:

        theta_hat - rho * sigma * sqrt(v_theta) * k(gamma_hat).

    Continuous (in fact smooth) in gamma_hat, unlike pms_estimate.
    """
    scale = fit.sigma * math.sqrt(fit.v_theta)
    return fit.theta_hat - fit.rho * scale * float(k(fit.gamma_hat, spec))
