"""Domain types for the sequential group contribution game.

A population of N players is split into b groups of n members each.
Groups act in a random order; every member of a group observes an
aggregate sample of the contributions of up to m immediately preceding
groups, and chooses whether to put one unit into a common fund that is
scaled by r and split equally among all N players.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence


class Action(enum.Enum):
    CONTRIBUTE = "C"
    DEFECT = "D"


class Sample(NamedTuple):
    """Aggregate observation handed to a group: (groups seen, contributions seen)."""

    observed_groups: int
    observed_contributions: int


class InvalidConfig(ValueError):
    """Raised when a game configuration violates an integrity constraint."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(violations))


@dataclass(frozen=True)
class GameConfig:
    """The game primitives (N, b, n, m, r).

    N: total player count, b: number of groups, n: group size,
    m: sample window in groups, r: rate of return on the common fund.
    Instances are immutable; construct through ``validate_config`` to get
    a full violation list instead of the first failure.
    """

    N: int
    b: int
    n: int
    m: int
    r: float

    def __post_init__(self):
        violations = config_violations(self.N, self.b, self.n, self.m, self.r)
        if violations:
            raise InvalidConfig(violations)


def config_violations(N, b, n, m, r) -> list[str]:
    """Return every violated integrity constraint (empty list = valid)."""
    violations = []
    for name, value in (("N", N), ("b", b), ("n", n), ("m", m)):
        if not isinstance(value, int) or isinstance(value, bool):
            violations.append(f"{name} must be an integer, got {value!r}")
    if violations:
        return violations
    if N < 1:
        violations.append(f"N must be positive, got {N}")
    if b < 2:
        violations.append(f"b must be at least 2, got {b}")
    if n < 1:
        violations.append(f"n must be positive, got {n}")
    if N != n * b:
        violations.append(f"N must equal n*b (symmetric groups), got N={N}, n*b={n * b}")
    if m < 1:
        violations.append(f"m must be at least 1, got {m}")
    elif b >= 2 and m >= b:
        violations.append(f"m must be smaller than b for position uncertainty to bind, got m={m}, b={b}")
    try:
        r_val = float(r)
    except (TypeError, ValueError):
        violations.append(f"r must be a real number, got {r!r}")
        return violations
    if not r_val > 1:
        violations.append(f"r must exceed 1, got {r}")
    if not r_val < N:
        violations.append(f"r must be below N={N}, got {r}")
    return violations


def validate_config(N, b, n, m, r) -> GameConfig:
    """Build a GameConfig, raising InvalidConfig with the full violation list."""
    violations = config_violations(N, b, n, m, r)
    if violations:
        raise InvalidConfig(violations)
    return GameConfig(N=N, b=b, n=n, m=m, r=r)


def payoff(action: Action, others_contributions: int, config: GameConfig):
    """Utility of one player given the total contributions of everyone else.

    Contributing adds one unit to the fund at private cost 1; the fund is
    scaled by r and split across all N players.  Exact (Fraction) arithmetic
    is used whenever r is an int or Fraction, so oracle comparisons are
    bit-stable.
    """
    if not 0 <= others_contributions <= config.N - 1:
        raise ValueError(
            f"others_contributions must lie in [0, N-1]=[0, {config.N - 1}], got {others_contributions}"
        )
    r = config.r
    per_unit = Fraction(r, config.N) if isinstance(r, (int, Fraction)) else r / config.N
    if action is Action.CONTRIBUTE:
        return per_unit * (others_contributions + 1) - 1
    return per_unit * others_contributions


def sample_of(history: Sequence[int], t: int, config: GameConfig) -> Sample:
    """Sample shown to group t given the realized per-group contributions so far.

    The window covers the min(m, t-1) immediately preceding groups; the first
    group always sees (0, 0).
    """
    if not 1 <= t <= config.b:
        raise ValueError(f"position t must lie in [1, b]=[1, {config.b}], got {t}")
    if len(history) != t - 1:
        raise ValueError(f"history must have exactly t-1={t - 1} entries, got {len(history)}")
    for g in history:
        if not 0 <= g <= config.n:
            raise ValueError(f"group contribution {g} outside [0, n]=[0, {config.n}]")
    window = min(config.m, t - 1)
    return Sample(window, sum(history[t - 1 - window : t - 1]))


def save_config(config: GameConfig, path) -> None:
    """Write the config as flat key=value lines; r keeps exact decimal text."""
    lines = [
        f"N={config.N}",
        f"b={config.b}",
        f"n={config.n}",
        f"m={config.m}",
        f"r={config.r!r}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_config(path) -> GameConfig:
    """Parse a flat key=value config file written by ``save_config``."""
    values = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, raw = line.partition("=")
        values[key.strip()] = raw.strip()
    missing = [k for k in ("N", "b", "n", "m", "r") if k not in values]
    if missing:
        raise InvalidConfig([f"config file missing keys: {', '.join(missing)}"])
    try:
        N, b, n, m = (int(values[k]) for k in ("N", "b", "n", "m"))
        r = float(values["r"])
    except ValueError as exc:
        raise InvalidConfig([f"config file has a malformed value: {exc}"]) from exc
    return validate_config(N, b, n, m, r)
