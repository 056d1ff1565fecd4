"""Equilibrium verdicts built on top of the closed-form incentive functions.

The off-path gain delta(gamma) = (r/N) S(gamma) - 1 is linear in r at fixed
gamma, so the interior maximizer gamma0 of S does not depend on r and the
critical return r_sharp = N / S(gamma0) follows directly.  Above r_sharp the
boundary values delta(0) = delta(1) = r/N - 1 < 0 bracket a positive interior
maximum, giving two mixed-strategy forgiveness rates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import analytics
from .analytics import SampleClass, ThresholdResult
from .core import GameConfig

_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class InternalInconsistencyError(RuntimeError):
    """The solver's numerics contradict a structural guarantee (an analytics bug)."""


@dataclass(frozen=True)
class SolverSettings:
    grid_points: int = 2001
    root_tolerance: float = 1e-10     # on |delta| at a returned root
    max_iterations: int = 200
    bracket_epsilon: float = 1e-9     # excludes exact endpoints 0 and 1

    def __post_init__(self):
        if self.grid_points < 3:
            raise ValueError("grid_points must be at least 3")
        if min(self.root_tolerance, self.max_iterations, self.bracket_epsilon) <= 0:
            raise ValueError("solver settings must be positive")


@dataclass(frozen=True)
class MixedRoots:
    """The outermost pair of forgiveness rates solving delta(gamma) = 0."""

    gamma_low: float
    gamma_high: float
    residual_low: float
    residual_high: float
    all_roots: tuple[float, ...]
    degenerate: bool = False          # r == r_sharp tangency: a single root
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PureVerdict:
    exists: bool
    regime: str                       # "m>1", "m=1,n>1", or "m=1,n=1"
    threshold: Optional[ThresholdResult]
    delta_at_zero: Optional[float]
    source: str = "derived"
    notes: str = ""


@dataclass(frozen=True)
class Lemma2Report:
    """The three on/off-path incentive levels and the inequality chain between them."""

    first_group: float
    clean_mean: float
    defection_weighted: float
    strict_ok: bool
    weak_ok: bool
    at_upper_boundary: bool           # gamma = 1, where all three collapse to 1


@dataclass(frozen=True)
class EquilibriumReport:
    config: GameConfig
    r: float
    pure: PureVerdict
    mixed: Optional[MixedRoots]
    r_sharp: Optional[float]
    gamma_max: Optional[float]
    delta_max: Optional[float]
    lemma2_ok: Optional[bool]
    diagnostics: dict = field(default_factory=dict)


def _golden_max(f, lo: float, hi: float, max_iterations: int, tol: float = 1e-13):
    """Golden-section maximization of a unimodal-on-bracket scalar function."""
    a, b = lo, hi
    c = b - _INV_GOLDEN * (b - a)
    d = a + _INV_GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iterations):
        if abs(b - a) <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_GOLDEN * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def find_delta_max(r: float, config: GameConfig, settings: SolverSettings = SolverSettings()):
    """Locate the interior maximizer gamma0 of delta over (0, 1).

    Maximizes the r-free sum S(gamma) (the maximizer is shared by every r),
    by grid scan plus golden-section refinement on the best bracket.
    Returns (gamma0, delta(gamma0; r)).
    """
    if config.n <= 1:
        raise ValueError(
            "interior maximum requires n > 1; with n = 1 delta is not anchored "
            "to equal boundary values"
        )
    eps = settings.bracket_epsilon
    grid = np.linspace(eps, 1.0 - eps, settings.grid_points)
    values = np.asarray(analytics.weighted_phi_sum(grid, config))
    best = int(np.argmax(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    gamma0, _ = _golden_max(
        lambda g: analytics.weighted_phi_sum(g, config), lo, hi, settings.max_iterations
    )
    if gamma0 <= eps or gamma0 >= 1.0 - eps:
        raise InternalInconsistencyError("maximizer collapsed onto an excluded endpoint")
    return gamma0, analytics.delta(gamma0, r, config)


def find_r_sharp(config: GameConfig, settings: SolverSettings = SolverSettings()) -> float:
    """Critical return above which two mixed equilibria exist: N / S(gamma0)."""
    gamma0, _ = find_delta_max(config.N, config, settings)  # r irrelevant to gamma0
    s_max = analytics.weighted_phi_sum(gamma0, config)
    if s_max <= 1.0:
        raise InternalInconsistencyError(
            f"S(gamma0) = {s_max} <= 1 contradicts interior dominance for n > 1"
        )
    return config.N / s_max


def find_mixed_roots(
    r: float, config: GameConfig, settings: SolverSettings = SolverSettings()
) -> Optional[MixedRoots]:
    """Find the forgiveness rates gamma1 < gamma2 with delta = 0, if any.

    Returns None for r strictly below r_sharp, a degenerate single root at
    the tangency r = r_sharp, and the outermost pair of grid-scan +
    Brent-refined roots above it (any extra interior sign changes are kept
    in ``all_roots``).
    """
    if config.n <= 1:
        raise ValueError("mixed-root search requires n > 1")
    r_sharp = find_r_sharp(config, settings)
    gamma0, delta_at_max = find_delta_max(r, config, settings)
    if abs(r - r_sharp) <= 1e-9 * max(1.0, r_sharp):
        return MixedRoots(
            gamma_low=gamma0,
            gamma_high=gamma0,
            residual_low=delta_at_max,
            residual_high=delta_at_max,
            all_roots=(gamma0,),
            degenerate=True,
            diagnostics={"r_sharp": r_sharp, "gamma_max": gamma0},
        )
    if r < r_sharp:
        return None

    eps = settings.bracket_epsilon
    grid = np.linspace(eps, 1.0 - eps, settings.grid_points)
    values = np.asarray(analytics.delta(grid, r, config))
    signs = np.sign(values)
    crossings = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    if len(crossings) < 2:
        raise InternalInconsistencyError(
            f"expected at least two sign changes of delta for r={r} > r_sharp={r_sharp}, "
            f"found {len(crossings)}"
        )
    roots = []
    for i in crossings:
        root = brentq(
            lambda g: analytics.delta(g, r, config),
            grid[i],
            grid[i + 1],
            xtol=1e-15,
            rtol=4 * np.finfo(float).eps,
            maxiter=settings.max_iterations,
        )
        roots.append(float(root))
    exact_zeros = grid[values == 0.0]
    roots = sorted(set(roots) | set(float(g) for g in exact_zeros))
    lo, hi = roots[0], roots[-1]
    res_lo = analytics.delta(lo, r, config)
    res_hi = analytics.delta(hi, r, config)
    if max(abs(res_lo), abs(res_hi)) >= settings.root_tolerance:
        raise InternalInconsistencyError("root residual exceeds tolerance after refinement")
    return MixedRoots(
        gamma_low=lo,
        gamma_high=hi,
        residual_low=res_lo,
        residual_high=res_hi,
        all_roots=tuple(roots),
        diagnostics={
            "r_sharp": r_sharp,
            "gamma_max": gamma0,
            "delta_max": delta_at_max,
            "grid_points": settings.grid_points,
            "sign_changes": int(len(crossings)),
        },
    )


def verify_pure(config: GameConfig) -> PureVerdict:
    """Does the conditional-contribution pure profile form an equilibrium at config.r?

    m > 1: the on-path condition r >= 2N/(N-n(m+1)+2) suffices (off-path
    defection after a witnessed defection is optimal at any r).  For m = 1
    and n > 1 the bound is 2N/(N-2(n-1)) together with delta(0) < 0.  The
    m = 1, n = 1 case is settled by prior work (existence exactly for
    r in [2, 3-3/(N+1)]) and reported as such, not re-derived here.
    """
    r = config.r
    if config.m > 1:
        threshold = analytics.threshold_m_gt_1(config)
        exists = threshold.feasible and r >= threshold.value
        return PureVerdict(
            exists=exists,
            regime="m>1",
            threshold=threshold,
            delta_at_zero=None,
            notes="off-path: defecting after a witnessed defection is optimal at any r",
        )
    if config.n > 1:
        threshold = analytics.threshold_m_eq_1(config)
        d0 = analytics.delta(0.0, r, config)
        exists = threshold.feasible and r >= threshold.value and d0 < 0
        return PureVerdict(
            exists=exists,
            regime="m=1,n>1",
            threshold=threshold,
            delta_at_zero=d0,
            notes="requires r above the group threshold and delta(0) = r/N - 1 < 0",
        )
    upper = 3.0 - 3.0 / (config.N + 1)
    return PureVerdict(
        exists=2.0 <= r <= upper,
        regime="m=1,n=1",
        threshold=ThresholdResult(2.0, True, f"existence interval [2, {upper:.6g}]"),
        delta_at_zero=None,
        source="literature",
        notes="single-member groups: interval cited from prior work, not derived by this artifact",
    )


def verify_lemma2(gamma: float, config: GameConfig) -> Lemma2Report:
    """Check first-group > clean-sample mean >= defection-weighted incentive levels.

    All three collapse to 1 at gamma = 1, so the strict comparison is only
    claimed on [0, 1); the report flags the boundary instead of failing.
    """
    b = config.b
    first = float(analytics.phi_clean(gamma, 1, config))
    clean_mean = float(
        np.mean([analytics.phi_clean(gamma, t, config) for t in range(2, b + 1)])
    )
    weighted = float(
        sum(
            analytics.psi(gamma, t, config) * analytics.phi_defection(gamma, t, config)
            for t in range(2, b + 1)
        )
    )
    at_boundary = gamma == 1.0
    strict_ok = math.isclose(first, clean_mean) if at_boundary else first > clean_mean
    return Lemma2Report(
        first_group=first,
        clean_mean=clean_mean,
        defection_weighted=weighted,
        strict_ok=strict_ok,
        weak_ok=clean_mean >= weighted - 1e-12,
        at_upper_boundary=at_boundary,
    )


def equilibrium_report(
    config: GameConfig, settings: SolverSettings = SolverSettings()
) -> EquilibriumReport:
    """Full verdict at config.r: pure existence, mixed roots, r_sharp, Lemma 2 grid."""
    pure = verify_pure(config)
    if config.n > 1:
        r_sharp = find_r_sharp(config, settings)
        gamma0, delta_max = find_delta_max(config.r, config, settings)
        mixed = find_mixed_roots(config.r, config, settings)
        lemma_grid = np.linspace(0.0, 1.0, 102)[:-1]
        lemma2_ok = all(
            (rep := verify_lemma2(float(g), config)).strict_ok and rep.weak_ok
            for g in lemma_grid
        )
    else:
        r_sharp = gamma0 = delta_max = mixed = lemma2_ok = None
    return EquilibriumReport(
        config=config,
        r=config.r,
        pure=pure,
        mixed=mixed,
        r_sharp=r_sharp,
        gamma_max=gamma0,
        delta_max=delta_max,
        lemma2_ok=lemma2_ok,
        diagnostics={"grid_points": settings.grid_points},
    )


def _round15(value):
    if isinstance(value, float):
        return float(f"{value:.15g}")
    if isinstance(value, dict):
        return {k: _round15(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round15(v) for v in value]
    return value


def report_to_dict(report: EquilibriumReport) -> dict:
    """Stable JSON-ready form of a report; reals carry 15 significant digits."""
    cfg = report.config
    mixed = report.mixed
    doc = {
        "config": {"N": cfg.N, "b": cfg.b, "n": cfg.n, "m": cfg.m, "r": cfg.r},
        "r": report.r,
        "pure": {
            "exists": report.pure.exists,
            "regime": report.pure.regime,
            "threshold": report.pure.threshold.value if report.pure.threshold else None,
            "threshold_feasible": report.pure.threshold.feasible if report.pure.threshold else None,
            "delta_at_zero": report.pure.delta_at_zero,
            "source": report.pure.source,
            "notes": report.pure.notes,
        },
        "mixed": None
        if mixed is None
        else {
            "gamma_low": mixed.gamma_low,
            "gamma_high": mixed.gamma_high,
            "residual_low": mixed.residual_low,
            "residual_high": mixed.residual_high,
            "all_roots": list(mixed.all_roots),
            "degenerate": mixed.degenerate,
        },
        "r_sharp": report.r_sharp,
        "gamma_max": report.gamma_max,
        "delta_max": report.delta_max,
        "lemma2_ok": report.lemma2_ok,
        "diagnostics": report.diagnostics,
    }
    return _round15(doc)


def report_to_json(report: EquilibriumReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=False)
