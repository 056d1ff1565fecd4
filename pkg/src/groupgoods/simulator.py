"""Independent verification engines for the closed-form incentive functions.

Three layers of evidence, none of which reuses the analytics formulas:

* ``simulate_game`` plays the full protocol (random assignment, sequential
  groups, sampling, optional forced deviation) one game at a time.
* ``estimate_phi`` / ``estimate_psi`` / ``tremble_payoff`` are vectorized
  Monte Carlo estimators over many replications.
* ``enumerate_exact`` computes the contribution gain by exact dynamic
  programming over the group-level chain, usable as a 1e-10 oracle on
  small instances.

All randomness comes from a counter-based Philox generator keyed by the
caller's seed, so results are bit-reproducible for a given seed and
independent of any parallel scheduling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analytics import SampleClass, classify_sample
from .core import Action, GameConfig, sample_of

ENUM_MAX_B = 6
ENUM_MAX_N = 4


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def _require_single_group_window(config: GameConfig) -> None:
    # The group-level chain estimators condition only on the immediate
    # predecessor, which is exact for m = 1 only.
    if config.m != 1:
        raise ValueError("this estimator requires a single-group sample window (m = 1)")


@dataclass(frozen=True)
class StrategyProfile:
    """Symmetric behavior rule: contribute on clean samples, forgive with
    probability ``forgiveness`` after a witnessed defection; an intended
    contribution is replaced by defection with probability ``tremble``."""

    forgiveness: float
    clean_response: float = 1.0
    tremble: float = 0.0

    def __post_init__(self):
        for name in ("forgiveness", "clean_response", "tremble"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.tremble >= 1.0:
            raise ValueError("tremble must be strictly below 1")


@dataclass(frozen=True)
class DeviationSpec:
    """Force one player's action: the ``member``-th player of the group at
    sequence position ``position`` plays ``forced_action`` regardless of
    profile."""

    position: int
    member: int
    forced_action: Action


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    std_error: float
    replications: int
    seed: int
    note: str = ""

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not self.std_error >= 0.0:
            raise ValueError("std_error must be nonnegative")


@dataclass(frozen=True)
class PsiEstimate:
    """Empirical position distribution conditional on witnessing a defection."""

    frequencies: dict[int, float]     # position t = 2..b -> relative frequency
    events: int
    replications: int
    seed: int
    epsilon: float
    insufficient: bool = False


@dataclass(frozen=True)
class GameResult:
    history: tuple[int, ...]          # per-group contributions in sequence order
    payoffs: np.ndarray               # indexed by player id 0..N-1
    positions: np.ndarray             # player id -> 1-based group position


@dataclass(frozen=True)
class ExactPhi:
    """Exact contribution gain and the per-group expectation vectors behind it."""

    phi: float
    expected_contribute: tuple[float, ...]   # E[g_i] for i = t..b, deviator contributes
    expected_defect: tuple[float, ...]       # same under the defect branch


def simulate_game(
    config: GameConfig,
    profile: StrategyProfile,
    seed: int,
    deviation: Optional[DeviationSpec] = None,
) -> GameResult:
    """Play one full game: Nature assigns players and an order, groups act in
    sequence on their samples, and everyone is paid from the common fund."""
    if deviation is not None:
        if not 1 <= deviation.position <= config.b:
            raise ValueError(f"deviation position outside [1, b]: {deviation.position}")
        if not 0 <= deviation.member < config.n:
            raise ValueError(f"deviation member index outside [0, n): {deviation.member}")
    rng = _rng(seed)
    n, b = config.n, config.b
    assignment = rng.permutation(config.N)   # group t gets slots (t-1)n..tn-1
    actions = np.zeros(config.N, dtype=np.int64)
    positions = np.zeros(config.N, dtype=np.int64)
    history: list[int] = []
    for t in range(1, b + 1):
        members = assignment[(t - 1) * n : t * n]
        positions[members] = t
        sample = sample_of(history, t, config)
        clean = classify_sample(sample, config) is not SampleClass.CONTAINS_DEFECTION
        p_intend = profile.clean_response if clean else profile.forgiveness
        draws = rng.random((config.n, 2))
        acts = (draws[:, 0] < p_intend) & (draws[:, 1] >= profile.tremble)
        if deviation is not None and deviation.position == t:
            acts[deviation.member] = deviation.forced_action is Action.CONTRIBUTE
        actions[members] = acts
        history.append(int(acts.sum()))
    total = int(actions.sum())
    payoffs = (config.r / config.N) * total - actions.astype(float)
    return GameResult(tuple(history), payoffs, positions)


def _chain_contributions(
    g_prev: np.ndarray, uniforms: np.ndarray, gamma: float, n: int
) -> np.ndarray:
    """One group-level step: a full predecessor keeps everyone contributing,
    otherwise each member forgives independently with probability gamma.
    ``uniforms`` has shape (reps, n) and is shared across coupled branches."""
    forgiving = (uniforms < gamma).sum(axis=1)
    return np.where(g_prev == n, n, forgiving)


def estimate_phi(
    config: GameConfig,
    gamma: float,
    t: int,
    sample_class: SampleClass,
    replications: int,
    seed: int,
) -> SimEstimate:
    """Paired Monte Carlo estimate of the contribution gain at position t.

    The contribute and defect branches of the deviator consume identical
    uniforms in every downstream group, so the difference estimator only
    carries the variance the deviation actually creates.
    """
    if sample_class not in (SampleClass.CLEAN_FULL, SampleClass.CONTAINS_DEFECTION):
        raise ValueError("estimate_phi handles clean-full or defection samples")
    _require_single_group_window(config)
    if not 1 <= t <= config.b:
        raise ValueError(f"position t outside [1, b]: {t}")
    if sample_class is SampleClass.CONTAINS_DEFECTION and t < 2:
        raise ValueError("a defection-containing sample requires t >= 2")
    note = "replications below 100; estimate unreliable" if replications < 100 else ""
    rng = _rng(seed)
    n, b = config.n, config.b
    reps = replications

    if sample_class is SampleClass.CONTAINS_DEFECTION:
        # Fellow members also saw the defection and forgive with prob gamma.
        others = (rng.random((reps, n - 1)) < gamma).sum(axis=1) if n > 1 else np.zeros(reps)
        g_c = others + 1
        g_d = others.copy()
    else:
        # Fellow members saw a clean sample and contribute for sure.
        g_c = np.full(reps, n)
        g_d = np.full(reps, n - 1)
    diff = (g_c - g_d).astype(float)
    for _ in range(t + 1, b + 1):
        uniforms = rng.random((reps, n))
        g_c = _chain_contributions(g_c, uniforms, gamma, n)
        g_d = _chain_contributions(g_d, uniforms, gamma, n)
        diff += g_c - g_d
    mean = float(diff.mean())
    std_error = float(diff.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return SimEstimate(mean, std_error, reps, seed, note)


def estimate_psi(
    config: GameConfig,
    gamma: float,
    tremble: float,
    replications: int,
    seed: int,
) -> PsiEstimate:
    """Empirical distribution of a player's position given a witnessed defection.

    Plays the trembling profile at the group level and tallies, for every
    group from position 2 on whose sample contains a defection, one event per
    member.  As the tremble vanishes this converges to the closed-form
    posterior.
    """
    if not 0.0 < tremble <= 1.0:
        raise ValueError("estimate_psi needs a strictly positive tremble")
    _require_single_group_window(config)
    rng = _rng(seed)
    n, b = config.n, config.b
    reps = replications
    p_clean = 1.0 - tremble
    p_dirty = gamma * (1.0 - tremble)
    counts = np.zeros(b + 1, dtype=np.int64)
    g_prev = rng.binomial(n, p_clean, size=reps)
    for t in range(2, b + 1):
        dirty = g_prev < n
        counts[t] = int(dirty.sum()) * n      # every member witnesses the sample
        g_prev = np.where(
            dirty,
            rng.binomial(n, p_dirty, size=reps),
            rng.binomial(n, p_clean, size=reps),
        )
    events = int(counts.sum())
    if events == 0:
        return PsiEstimate({}, 0, reps, seed, tremble, insufficient=True)
    freqs = {t: counts[t] / events for t in range(2, b + 1)}
    return PsiEstimate(freqs, events, reps, seed, tremble)


def tremble_payoff(
    config: GameConfig,
    gamma: float,
    epsilon: float,
    replications: int,
    seed: int,
) -> SimEstimate:
    """Ex-ante per-player payoff under the trembling forgiveness profile.

    With a symmetric profile the average realized payoff in one game is
    G(r-1)/N where G is the total fund, so the estimator tracks the
    group-level contribution chain only.
    """
    if not 0.0 <= epsilon <= 0.1:
        raise ValueError("epsilon must lie in [0, 0.1]")
    _require_single_group_window(config)
    rng = _rng(seed)
    n, b = config.n, config.b
    reps = replications
    p_clean = 1.0 - epsilon
    p_dirty = gamma * (1.0 - epsilon)
    g_prev = rng.binomial(n, p_clean, size=reps)
    total = g_prev.astype(np.int64)
    for _ in range(2, b + 1):
        dirty = g_prev < n
        g_prev = np.where(
            dirty,
            rng.binomial(n, p_dirty, size=reps),
            rng.binomial(n, p_clean, size=reps),
        )
        total += g_prev
    payoff = total * (config.r - 1.0) / config.N
    mean = float(payoff.mean())
    std_error = float(payoff.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return SimEstimate(mean, std_error, reps, seed)


def _binom_pmf(n: int, p: float) -> np.ndarray:
    q = 1.0 - p
    return np.array([math.comb(n, k) * p**k * q ** (n - k) for k in range(n + 1)])


def enumerate_exact(
    config: GameConfig,
    gamma: float,
    initial_class: SampleClass,
    t: int,
) -> ExactPhi:
    """Exact contribution gain by dynamic programming on the group chain.

    State: the distribution of a group's contribution count.  A full group
    keeps its successor fully contributing; anything less sends the successor
    to an independent Binomial(n, gamma) draw.  The deviator's two actions
    seed two coupled chains at position t whose expected totals differ by
    exactly the quantity the closed forms claim.
    """
    _require_single_group_window(config)
    n, b = config.n, config.b
    if b > ENUM_MAX_B or n > ENUM_MAX_N:
        raise ValueError(f"exact enumeration limited to b <= {ENUM_MAX_B}, n <= {ENUM_MAX_N}")
    if not 1 <= t <= b:
        raise ValueError(f"position t outside [1, b]: {t}")
    if initial_class is SampleClass.CONTAINS_DEFECTION:
        if t < 2:
            raise ValueError("a defection-containing sample requires t >= 2")
        others = _binom_pmf(n - 1, gamma)        # fellow members forgive w.p. gamma
        dist_d = np.append(others, 0.0)          # deviator defects
        dist_c = np.insert(others, 0, 0.0)       # deviator's unit shifts the count
    elif initial_class in (SampleClass.CLEAN_FULL, SampleClass.FIRST_GROUP):
        dist_c = np.zeros(n + 1)
        dist_c[n] = 1.0                          # fellow members contribute for sure
        dist_d = np.zeros(n + 1)
        dist_d[n - 1] = 1.0
    else:
        raise ValueError(f"unsupported initial class {initial_class}")

    forgive = _binom_pmf(n, gamma)
    counts = np.arange(n + 1, dtype=float)
    exp_c = [float(dist_c @ counts)]
    exp_d = [float(dist_d @ counts)]
    for _ in range(t + 1, b + 1):
        dist_c = dist_c[:n].sum() * forgive + dist_c[n] * np.eye(n + 1)[n]
        dist_d = dist_d[:n].sum() * forgive + dist_d[n] * np.eye(n + 1)[n]
        exp_c.append(float(dist_c @ counts))
        exp_d.append(float(dist_d @ counts))
    phi = float(sum(exp_c) - sum(exp_d))
    return ExactPhi(phi, tuple(exp_c), tuple(exp_d))


ESTIMATE_CSV_FIELDS = (
    "N", "b", "n", "m", "r", "gamma", "epsilon", "t",
    "mean", "std_error", "replications", "seed",
)


@dataclass(frozen=True)
class EstimateRow:
    config: GameConfig
    gamma: float
    estimate: SimEstimate
    epsilon: float = 0.0
    t: Optional[int] = None


def write_estimates_csv(path, rows: list[EstimateRow], header_lines: list[str] = ()) -> None:
    """One CSV row per estimate; optional '#'-prefixed provenance header."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(ESTIMATE_CSV_FIELDS)
        for row in rows:
            cfg, est = row.config, row.estimate
            writer.writerow(
                [
                    cfg.N, cfg.b, cfg.n, cfg.m, f"{cfg.r:.17g}",
                    f"{row.gamma:.17g}", f"{row.epsilon:.17g}",
                    "" if row.t is None else row.t,
                    f"{est.mean:.17g}", f"{est.std_error:.17g}",
                    est.replications, est.seed,
                ]
            )
