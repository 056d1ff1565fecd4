"""Closed-form incentive and belief functions for the group contribution game.

Everything here is a pure function of (gamma, position, config), where gamma
is the off-path probability of contributing after observing a defection.
All gamma arguments accept scalars or numpy arrays and broadcast elementwise.

Conventions for a deviating player at position t (m = 1 throughout):

* ``phi_defection``: expected extra contributions (own unit included) from
  contributing rather than defecting when the observed sample already
  contains a defection.
* ``phi_clean``: same gain when the observed sample is a fully contributing
  group (or the empty first-group sample, which is the t = 1 case).
* ``psi``: posterior probability of being at position t conditional on
  having observed a defection.
* ``delta``: expected utility gain of contributing upon witnessing a
  defection; its zeros in gamma are the mixed-equilibrium forgiveness rates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import GameConfig, Sample


class SampleClass(enum.Enum):
    FIRST_GROUP = "first_group"          # the empty sample (0, 0)
    CLEAN_FULL = "clean_full"            # every sampled group fully contributed
    CONTAINS_DEFECTION = "contains_defection"


def classify_sample(sample: Sample, config: GameConfig) -> SampleClass:
    seen, contributed = sample
    if not 0 <= seen <= config.m or not 0 <= contributed <= seen * config.n:
        raise ValueError(f"sample {sample} outside the valid range for {config}")
    if seen == 0:
        return SampleClass.FIRST_GROUP
    if contributed == seen * config.n:
        return SampleClass.CLEAN_FULL
    return SampleClass.CONTAINS_DEFECTION


def _check_position(t: int, b: int, low: int = 1) -> None:
    if not low <= t <= b:
        raise ValueError(f"position t must lie in [{low}, b]=[{low}, {b}], got {t}")


def _as_gamma(gamma):
    g = np.asarray(gamma, dtype=float)
    if np.any((g < 0) | (g > 1)):
        raise ValueError("gamma must lie in [0, 1]")
    return g


def _maybe_scalar(out, gamma):
    return float(out) if np.isscalar(gamma) or np.ndim(gamma) == 0 else out


def phi_defection(gamma, t: int, config: GameConfig):
    """Contribution gain at position t after a sample containing a defection.

    n(1-g)(1-(1-g^n)^(b-t))/g + 1 for g in (0, 1]; the g -> 0 limit is 1 for
    n > 1 and b-t+1 for n = 1 (a lone player can single-handedly restore a
    clean history).
    """
    n, b = config.n, config.b
    _check_position(t, b)
    g = _as_gamma(gamma)
    limit0 = 1.0 if n > 1 else float(b - t + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = 1.0 - g**n
        val = n * (1.0 - g) * (1.0 - x ** (b - t)) / g + 1.0
    out = np.where(g == 0.0, limit0, val)
    return _maybe_scalar(out, gamma)


def phi_clean(gamma, t: int, config: GameConfig):
    """Contribution gain at position t after a fully contributing sample.

    Same numerator as ``phi_defection`` but divided by g^n: here the
    deviator's defection is the only one in her group, so it takes all n
    members of the next group forgiving to wash it out.  Position t = 1
    (the empty sample) is this formula at t = 1, since a first-group
    deviation generates the same downstream sample (1, n-1).
    """
    n, b = config.n, config.b
    _check_position(t, b)
    g = _as_gamma(gamma)
    limit0 = float((b - t) * n + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = 1.0 - g**n
        val = n * (1.0 - g) * (1.0 - x ** (b - t)) / g**n + 1.0
    out = np.where(g == 0.0, limit0, val)
    return _maybe_scalar(out, gamma)


def psi(gamma, t: int, config: GameConfig):
    """Probability of sitting at position t given a witnessed defection.

    Computed from the stable ratio of geometric partial sums in
    x = 1 - gamma^n (numerator: partial sum up to t-2; denominator: total
    over positions 2..b), which stays finite at gamma = 0 where the closed
    form with the gamma^(-n) factor blows up.  The gamma = 0 value is
    2(t-1)/(b(b-1)).
    """
    n, b = config.n, config.b
    _check_position(t, b, low=2)
    g = _as_gamma(gamma)
    x = 1.0 - g**n
    # Running powers of x reused across the partial sums; b is small.
    power = np.ones_like(x)
    partial = np.zeros_like(x)
    numerator = np.zeros_like(x)
    denominator = np.zeros_like(x)
    for k in range(2, b + 1):
        partial = partial + power          # sum_{i=0}^{k-2} x^i
        power = power * x
        denominator = denominator + partial
        if k == t:
            numerator = partial.copy()
    out = np.where(g == 0.0, 2.0 * (t - 1) / (b * (b - 1)), numerator / denominator)
    return _maybe_scalar(out, gamma)


def weighted_phi_sum(gamma, config: GameConfig):
    """S(g) = sum over t = 2..b of psi * phi_defection, the r-free part of delta."""
    g = _as_gamma(gamma)
    total = np.zeros_like(g)
    for t in range(2, config.b + 1):
        total = total + np.asarray(psi(g, t, config)) * np.asarray(
            phi_defection(g, t, config)
        )
    return _maybe_scalar(total, gamma)


def delta(gamma, r: float, config: GameConfig):
    """Expected gain from contributing upon witnessing a defection.

    delta = (r/N) * S(gamma) - 1.  For n > 1 both endpoints collapse to
    r/N - 1 < 0, so any positive interior value yields two mixed roots.
    """
    out = (r / config.N) * np.asarray(weighted_phi_sum(gamma, config)) - 1.0
    return _maybe_scalar(out, gamma)


@dataclass(frozen=True)
class ThresholdResult:
    """A rate-of-return threshold plus whether any admissible r < N meets it."""

    value: float | None
    feasible: bool
    note: str = ""


def threshold_m_gt_1(config: GameConfig) -> ThresholdResult:
    """Minimal r sustaining the pure conditional-contribution profile for m > 1.

    Threshold 2N/(N - n(m+1) + 2); infeasible when the denominator is not
    positive or the threshold reaches N (no admissible r < N exists).
    """
    if config.m <= 1:
        raise ValueError("threshold_m_gt_1 applies only to m > 1")
    return _threshold(config.N, config.N - config.n * (config.m + 1) + 2)


def threshold_m_eq_1(config: GameConfig) -> ThresholdResult:
    """Minimal r sustaining the pure profile for m = 1 and n > 1: 2N/(N-2(n-1))."""
    if config.m != 1:
        raise ValueError("threshold_m_eq_1 applies only to m = 1")
    return _threshold(config.N, config.N - 2 * (config.n - 1))


def _threshold(N: int, denominator: int) -> ThresholdResult:
    if denominator <= 0:
        return ThresholdResult(None, False, "denominator not positive; no valid r < N exists")
    value = 2 * N / denominator
    if value >= N:
        return ThresholdResult(value, False, f"threshold {value:g} >= N={N}; no admissible r")
    return ThresholdResult(value, True)


def onpath_deviation_gain(gamma, r: float, config: GameConfig, sample_class: SampleClass):
    """Gain from contributing on the equilibrium path (clean or empty sample).

    FIRST_GROUP: (r/N) phi_clean(gamma, 1) - 1.  CLEAN_FULL: the deviator is
    uniformly at any position 2..b, so the gain averages phi_clean over those
    positions.  Positive means contributing is strictly preferred.
    """
    if sample_class is SampleClass.CONTAINS_DEFECTION:
        raise ValueError("off-path incentives are measured by delta(), not this function")
    scale = r / config.N
    if sample_class is SampleClass.FIRST_GROUP:
        out = scale * np.asarray(phi_clean(gamma, 1, config)) - 1.0
    else:
        g = _as_gamma(gamma)
        total = np.zeros_like(g)
        for t in range(2, config.b + 1):
            total = total + np.asarray(phi_clean(g, t, config))
        out = scale * total / (config.b - 1) - 1.0
    return _maybe_scalar(out, gamma)
