"""Gaussian primitives and the fixed quadrature engine.

Everything downstream reduces to four operations: the standard normal
density, its CDF, its quantile, and integrals of bounded functions
against a shifted standard normal density.  The quadrature engine is a
composite Gauss-Legendre rule on a fixed truncated support.  With the
default half width of 8 the neglected tail mass is 2*Phi(-8), about
1.2e-15, far below every tolerance used in this package.

All rules live in the standardized variable z = h - gamma, so a single
cached rule serves every shift.  Integrands with known discontinuities
pass their breakpoints in; panels are split there so no panel straddles
a jump and the composite rule keeps its full accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import erfc

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_INV_SQRT_2PI = 1.0 / _SQRT_2PI

#: Truncation half width of the integration support.
HALF_WIDTH = 8.0
#: Number of uniform panels the support is divided into.
DEFAULT_PANELS = 40
#: Gauss-Legendre nodes per panel.
DEFAULT_ORDER = 10


def phi(x: float | np.ndarray) -> float | np.ndarray:
    """Standard normal density, elementwise on arrays.

    Rejects non-finite input: the density is only ever needed at
    quadrature nodes and standardized estimates, all of which are
    finite by construction, so an infinity here is a caller bug.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("phi: input must be finite")
    out = _INV_SQRT_2PI * np.exp(-0.5 * arr * arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def Phi(x: float | np.ndarray) -> float | np.ndarray:
    """Standard normal CDF via the complementary error function.

    Computed as erfc(-x / sqrt(2)) / 2, which keeps full relative
    precision in the lower tail.  Infinite endpoints are allowed (they
    arise naturally as degenerate interval ends); NaN is rejected.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise ValueError("Phi: NaN input")
    out = 0.5 * erfc(-arr / _SQRT2)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


# Rational initial estimate for the normal quantile (Acklam's
# coefficients), accurate to about 1.15e-9 everywhere; two Halley
# refinements against Phi then push the error to a few ulp.
_QA = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
       1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_QB = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
       6.680131188771972e+01, -1.328068155288572e+01)
_QC = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
       -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_QD = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
       3.754408661907416e+00)
_Q_TAIL_SPLIT = 0.02425


def _lower_quantile(p: float) -> float:
    """Quantile for p in (0, 0.5], returned as a value <= 0."""
    if p < _Q_TAIL_SPLIT:
        s = math.sqrt(-2.0 * math.log(p))
        x = ((((((_QC[0] * s + _QC[1]) * s + _QC[2]) * s + _QC[3]) * s
               + _QC[4]) * s + _QC[5])
             / ((((_QD[0] * s + _QD[1]) * s + _QD[2]) * s + _QD[3]) * s + 1.0))
        x = -abs(x)
    else:
        t = p - 0.5
        s = t * t
        x = ((((((_QA[0] * s + _QA[1]) * s + _QA[2]) * s + _QA[3]) * s
               + _QA[4]) * s + _QA[5]) * t
             / (((((_QB[0] * s + _QB[1]) * s + _QB[2]) * s + _QB[3]) * s
                 + _QB[4]) * s + 1.0))
    for _ in range(2):
        dens = _INV_SQRT_2PI * math.exp(-0.5 * x * x)
        if dens < 1e-300:
            break
        err = 0.5 * math.erfc(-x / _SQRT2) - p
        u = err / dens
        x = x - u / (1.0 + 0.5 * x * u)
    return x


def z_quantile(a: float) -> float:
    """Inverse of Phi on (0, 1).

    The computation is canonicalized to the lower half, so the exact
    antisymmetry z_quantile(1 - a) == -z_quantile(a) holds whenever
    both probabilities are representable, and z_quantile(0.5) is
    exactly 0.0.
    """
    a = float(a)
    if not 0.0 < a < 1.0:
        raise ValueError(f"z_quantile: probability must be in (0, 1), got {a}")
    if a == 0.5:
        return 0.0
    if a < 0.5:
        return _lower_quantile(a)
    return -_lower_quantile(1.0 - a)


def Phi_interval(
    l: float | np.ndarray,
    u: float | np.ndarray,
    mu: float | np.ndarray,
    v: float | np.ndarray,
) -> float | np.ndarray:
    """Probability that a N(mu, v) variate falls in [l, u].

    The standardized endpoints are put in a canonical position before
    any CDF is evaluated: whenever the interval sits mostly above the
    mean it is reflected to the mirror-image interval below the mean,
    which has the same probability.  Both CDF values are then lower
    tail erfc evaluations and their difference loses nothing to
    cancellation.  Because mirrored inputs canonicalize to the same
    endpoint pair, the reflection identity

        Phi_interval(l, u, mu, v) == Phi_interval(-u, -l, -mu, v)

    holds bit for bit, not merely to rounding.  That exactness is what
    makes every coverage quantity built on top of this function an
    exactly even function of its correlation argument.
    """
    l_arr = np.asarray(l, dtype=float)
    u_arr = np.asarray(u, dtype=float)
    mu_arr = np.asarray(mu, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    if np.any(np.isnan(l_arr)) or np.any(np.isnan(u_arr)):
        raise ValueError("Phi_interval: NaN endpoint")
    if not np.all(np.isfinite(mu_arr)):
        raise ValueError("Phi_interval: mean must be finite")
    if not np.all(np.isfinite(v_arr)) or np.any(v_arr <= 0.0):
        raise ValueError("Phi_interval: variance must be finite and positive")
    if np.any(l_arr > u_arr):
        raise ValueError("Phi_interval: lower endpoint exceeds upper endpoint")

    s = np.sqrt(v_arr)
    a = (l_arr - mu_arr) / s
    b = (u_arr - mu_arr) / s
    flip = a + b > 0.0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    p = 0.5 * (erfc(-hi / _SQRT2) - erfc(-lo / _SQRT2))
    p = np.clip(p, 0.0, 1.0)
    scalar = all(np.isscalar(t) or np.asarray(t).ndim == 0 for t in (l, u, mu, v))
    return float(p) if scalar else p


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """A fixed quadrature rule: nodes, plain Lebesgue weights, support.

    Weights carry no density factor; integrating f against the normal
    density means summing weights * phi(nodes) * f(nodes).  Instances
    are cached and shared, so the arrays are locked read-only.
    """

    nodes: np.ndarray
    weights: np.ndarray
    support: tuple[float, float]

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or weights.ndim != 1 or nodes.size != weights.size:
            raise ValueError("QuadratureRule: nodes and weights must be 1-d and equally long")
        if nodes.size < 2:
            raise ValueError("QuadratureRule: need at least two nodes")
        if not np.all(np.isfinite(nodes)) or not np.all(np.isfinite(weights)):
            raise ValueError("QuadratureRule: non-finite node or weight")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("QuadratureRule: nodes must be strictly increasing")
        if np.any(weights <= 0.0):
            raise ValueError("QuadratureRule: weights must be positive")
        lo, hi = self.support
        if not (lo < hi) or nodes[0] <= lo or nodes[-1] >= hi:
            raise ValueError("QuadratureRule: nodes must lie strictly inside the support")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "support", (float(lo), float(hi)))


@lru_cache(maxsize=None)
def _rule_cached(
    half_width: float, panels: int, order: int, breakpoints: tuple[float, ...]
) -> QuadratureRule:
    base_x, base_w = leggauss(order)
    edges = np.linspace(-half_width, half_width, panels + 1)
    if breakpoints:
        edges = np.unique(np.concatenate([edges, np.asarray(breakpoints, dtype=float)]))
        # A breakpoint within rounding distance of an existing edge
        # would create a degenerate sliver panel whose nodes collide
        # in floating point.  Merge such near-duplicates; the outer
        # boundary always survives.
        tol = 1e-12 * half_width
        kept = [float(edges[0])]
        for e in edges[1:]:
            if e - kept[-1] > tol:
                kept.append(float(e))
        if kept[-1] < edges[-1]:
            kept[-1] = float(edges[-1])
        edges = np.asarray(kept)
    nodes = []
    weights = []
    for e0, e1 in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (e0 + e1)
        half = 0.5 * (e1 - e0)
        nodes.append(mid + half * base_x)
        weights.append(half * base_w)
    return QuadratureRule(
        nodes=np.concatenate(nodes),
        weights=np.concatenate(weights),
        support=(-half_width, half_width),
    )


def quadrature_rule(
    *,
    panels: int = DEFAULT_PANELS,
    order: int = DEFAULT_ORDER,
    half_width: float = HALF_WIDTH,
    breakpoints: Iterable[float] = (),
) -> QuadratureRule:
    """Composite Gauss-Legendre rule on [-half_width, half_width].

    The rule lives in the standardized variable; callers shift it to
    wherever the normal density is centered.  Breakpoints (given in the
    standardized variable) become extra panel edges.  Ones outside the
    open support are dropped: beyond the truncation point they cannot
    affect the integral.
    """
    if panels < 1 or order < 2:
        raise ValueError("quadrature_rule: need panels >= 1 and order >= 2")
    if not half_width > 0.0:
        raise ValueError("quadrature_rule: half_width must be positive")
    bp = tuple(sorted(float(b) for b in breakpoints if -half_width < float(b) < half_width))
    return _rule_cached(float(half_width), int(panels), int(order), bp)


def integrate_against_shifted_normal(
    f: Callable[[np.ndarray], np.ndarray],
    gamma: float,
    *,
    breakpoints: Iterable[float] = (),
    panels: int = DEFAULT_PANELS,
    order: int = DEFAULT_ORDER,
    half_width: float = HALF_WIDTH,
) -> float:
    """Integral of f(h) * phi(h - gamma) dh over the truncated support.

    Parameters
    ----------
    f:
        Integrand, evaluated at arrays of h values.  A scalar-only
        callable works too; it is applied pointwise.
    gamma:
        Center of the normal density.  The support is
        [gamma - half_width, gamma + half_width].
    breakpoints:
        Locations (in h) where f jumps or has a kink.  Panels are split
        there.
    panels, order, half_width:
        Engine knobs; defaults match the package-wide fixed rule.

    A non-finite value of f at any node aborts the integration with an
    error, never a silent wrong value.
    """
    gamma = float(gamma)
    if not math.isfinite(gamma):
        raise ValueError("integrate_against_shifted_normal: gamma must be finite")
    std_breaks = (float(b) - gamma for b in breakpoints)
    rule = quadrature_rule(
        panels=panels, order=order, half_width=half_width, breakpoints=std_breaks
    )
    z = rule.nodes
    try:
        vals = np.asarray(f(gamma + z), dtype=float)
    except (TypeError, ValueError):
        vals = None
    if vals is None or vals.shape != z.shape:
        vals = np.fromiter((float(f(gamma + zi)) for zi in z), dtype=float, count=z.size)
    if not np.all(np.isfinite(vals)):
        raise ValueError(
            "integrate_against_shifted_normal: integrand returned a non-finite value"
        )
    return float(np.dot(rule.weights, phi(z) * vals))
