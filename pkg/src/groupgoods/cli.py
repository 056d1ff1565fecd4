"""Batch command-line front end.

Subcommands: thresholds, delta-curve, equilibria, verify, figure1, simulate.
Exit codes: 0 success, 1 validation failure, 2 internal inconsistency,
3 insufficient simulation data.  Every output file embeds a run manifest
('#'-prefixed header lines for CSV, a "manifest" object for JSON).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, analytics, equilibrium, simulator
from .analytics import SampleClass
from .core import GameConfig, InvalidConfig, load_config, validate_config
from .equilibrium import InternalInconsistencyError, SolverSettings

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INCONSISTENT = 2
EXIT_INSUFFICIENT = 3

DEFAULT_CONFIG = dict(N=20, b=4, n=5, m=1, r=8.0)


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: GameConfig
    settings: SolverSettings
    seed: int | None = None
    outputs: tuple[str, ...] = ()
    version: str = __version__
    extra: dict = field(default_factory=dict)

    def lines(self) -> list[str]:
        cfg = self.config
        out = [
            f"groupgoods version: {self.version}",
            f"command: {self.command}",
            f"config: N={cfg.N} b={cfg.b} n={cfg.n} m={cfg.m} r={cfg.r!r}",
            f"solver: grid_points={self.settings.grid_points} "
            f"root_tolerance={self.settings.root_tolerance:g} "
            f"bracket_epsilon={self.settings.bracket_epsilon:g}",
        ]
        if self.seed is not None:
            out.append(f"seed: {self.seed}")
        for path in self.outputs:
            out.append(f"output: {path}")
        for key, value in self.extra.items():
            out.append(f"{key}: {value}")
        return out

    def as_dict(self) -> dict:
        cfg = self.config
        return {
            "version": self.version,
            "command": self.command,
            "config": {"N": cfg.N, "b": cfg.b, "n": cfg.n, "m": cfg.m, "r": cfg.r},
            "seed": self.seed,
            "outputs": list(self.outputs),
            **self.extra,
        }


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groupgoods",
        description="Equilibria of a public goods game played by groups under position uncertainty",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, need_r_flag=True):
        p.add_argument("--config", type=Path, help="flat key=value config file; explicit flags win")
        p.add_argument("--N", type=int, help="total player count")
        p.add_argument("--b", type=int, help="number of groups")
        p.add_argument("--n", type=int, help="group size")
        p.add_argument("--m", type=int, help="sample window in groups")
        if need_r_flag:
            p.add_argument("--r", type=float, help="rate of return on the common fund")
        p.add_argument("--grid", type=int, default=SolverSettings().grid_points,
                       help="solver/curve grid points")
        p.add_argument("--out", type=Path, help="output file (or prefix for figure1)")
        p.add_argument("--format", choices=("csv", "json"), default=None,
                       help="output format where both make sense")
        p.add_argument("--seed", type=int, default=20260826, help="simulation seed")

    p = sub.add_parser("thresholds", help="pure-equilibrium rate-of-return thresholds")
    add_common(p)

    p = sub.add_parser("delta-curve", help="emit (gamma, delta) CSV plus a root summary")
    add_common(p)

    p = sub.add_parser("equilibria", help="full equilibrium report as JSON")
    add_common(p)

    p = sub.add_parser("verify", help="run the oracle verification suites")
    add_common(p)
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.add_argument("--reps", type=int, default=None, help="override Monte Carlo replications")

    p = sub.add_parser("figure1", help="emit the two mixed-equilibrium curves (n=5 solid, n=1 dashed)")
    add_common(p)

    p = sub.add_parser("simulate", help="Monte Carlo estimates under the trembling profile")
    add_common(p)
    p.add_argument("--mode", choices=("payoff", "phi", "psi"), default="payoff")
    p.add_argument("--gamma", type=float, default=0.5, help="forgiveness probability")
    p.add_argument("--epsilon", type=float, default=0.01, help="tremble probability")
    p.add_argument("--t", type=int, default=2, help="deviator position for phi estimation")
    p.add_argument("--reps", type=int, default=100_000)
    return parser


def _resolve_config(args) -> GameConfig:
    values = dict(DEFAULT_CONFIG)
    if args.config is not None:
        cfg = load_config(args.config)
        values = dict(N=cfg.N, b=cfg.b, n=cfg.n, m=cfg.m, r=cfg.r)
    for key in ("N", "b", "n", "m", "r"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return validate_config(**values)


def _settings(args) -> SolverSettings:
    return SolverSettings(grid_points=args.grid)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_curve(path: Path, gammas, deltas, manifest: RunManifest) -> None:
    with open(path, "w") as fh:
        for line in manifest.lines():
            fh.write(f"# {line}\n")
        fh.write("gamma,delta\n")
        for g, d in zip(gammas, deltas):
            fh.write(f"{_fmt(g)},{_fmt(d)}\n")


def read_curve(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a delta-curve CSV back into (gamma, delta) arrays."""
    gammas, deltas = [], []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#") or line.startswith("gamma"):
            continue
        g, d = line.split(",")
        gammas.append(float(g))
        deltas.append(float(d))
    return np.array(gammas), np.array(deltas)


def cmd_thresholds(args) -> int:
    config = _resolve_config(args)
    rows = []
    if config.m > 1:
        applies = "m>1"
        t_high = analytics.threshold_m_gt_1(config)
        rows.append(("m>1 threshold 2N/(N-n(m+1)+2)", t_high, True))
    else:
        applies = "m=1,n>1" if config.n > 1 else "m=1,n=1"
        alt = GameConfig(config.N, config.b, config.n, 2, config.r) if config.b > 2 else None
        if alt is not None:
            rows.append(("m>1 threshold (at m=2, for reference)", analytics.threshold_m_gt_1(alt), False))
    if config.m == 1:
        rows.append(("m=1 threshold 2N/(N-2(n-1))", analytics.threshold_m_eq_1(config), True))
    verdict = equilibrium.verify_pure(config)

    if args.format == "json":
        doc = {
            "applies": applies,
            "thresholds": [
                {"name": name, "value": t.value, "feasible": t.feasible,
                 "applies": flag, "note": t.note}
                for name, t, flag in rows
            ],
            "pure_exists_at_r": verdict.exists,
            "pure_interval": _pure_interval(config, rows),
            "source": verdict.source,
        }
        _emit(args, json.dumps(doc, indent=2))
        return EXIT_OK
    lines = [f"regime: {applies}   (N={config.N}, b={config.b}, n={config.n}, m={config.m}, r={config.r:g})"]
    for name, t, flag in rows:
        mark = "*" if flag else " "
        value = "none" if t.value is None else f"{t.value:.6g}"
        feas = "feasible" if t.feasible else f"infeasible ({t.note})"
        lines.append(f" {mark} {name}: {value}  [{feas}]")
    lines.append(f"pure equilibrium r-interval: {_pure_interval(config, rows)}")
    lines.append(f"pure equilibrium at r={config.r:g}: {'yes' if verdict.exists else 'no'}"
                 + (f"  [{verdict.source}]" if verdict.source != "derived" else ""))
    _emit(args, "\n".join(lines))
    return EXIT_OK


def _pure_interval(config: GameConfig, rows) -> str:
    if config.m == 1 and config.n == 1:
        return f"[2, {3 - 3 / (config.N + 1):.6g}] (literature; not derived by this artifact)"
    applicable = [t for _, t, flag in rows if flag]
    t = applicable[0]
    if not t.feasible:
        return "empty (threshold infeasible under r < N)"
    return f"[{t.value:.6g}, {config.N}) with r < N"


def cmd_delta_curve(args) -> int:
    config = _resolve_config(args)
    settings = _settings(args)
    gammas = np.linspace(0.0, 1.0, max(args.grid, 3))   # endpoints 0 and 1 exact
    deltas = np.asarray(analytics.delta(gammas, config.r, config))
    extra = {}
    if config.n > 1:
        gamma0, delta_max = equilibrium.find_delta_max(config.r, config, settings)
        roots = equilibrium.find_mixed_roots(config.r, config, settings)
        extra["gamma_max"] = _fmt(gamma0)
        extra["delta_max"] = _fmt(delta_max)
        if roots is None:
            extra["roots"] = "none (r below r_sharp)"
        else:
            extra["roots"] = f"{_fmt(roots.gamma_low)},{_fmt(roots.gamma_high)}"
            extra["roots_degenerate"] = str(roots.degenerate)
    out = args.out or Path("delta_curve.csv")
    manifest = RunManifest("delta-curve", config, settings, outputs=(str(out),), extra=extra)
    _write_curve(out, gammas, deltas, manifest)
    summary = [f"wrote {out} ({len(gammas)} points)"]
    summary += [f"{k}: {v}" for k, v in extra.items()]
    print("\n".join(summary))
    return EXIT_OK


def cmd_equilibria(args) -> int:
    config = _resolve_config(args)
    settings = _settings(args)
    report = equilibrium.equilibrium_report(config, settings)
    doc = equilibrium.report_to_dict(report)
    doc["manifest"] = RunManifest("equilibria", config, settings).as_dict()
    _emit(args, json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_figure1(args) -> int:
    """Reproduce the two mixed-equilibrium curves.

    The original figure's parameters are unpublished; these defaults keep the
    group-vs-single contrast at equal N: solid b=4, n=5 and dashed b=20, n=1,
    both N=20, with the shared r set to the smallest integer above r_sharp of
    the group configuration.
    """
    settings = _settings(args)
    solid_cfg = validate_config(20, 4, 5, 1, DEFAULT_CONFIG["r"])
    r_sharp = equilibrium.find_r_sharp(solid_cfg, settings)
    r = float(math.floor(r_sharp) + 1)
    solid_cfg = validate_config(20, 4, 5, 1, r)
    dashed_cfg = validate_config(20, 20, 1, 1, r)

    prefix = args.out or Path("figure1")
    solid_path = Path(f"{prefix}_solid_n5.csv")
    dashed_path = Path(f"{prefix}_dashed_n1.csv")
    gammas = np.linspace(0.0, 1.0, max(args.grid, 3))

    roots = equilibrium.find_mixed_roots(r, solid_cfg, settings)
    note = {"reconstruction": "figure parameters unpublished; defaults are a reconstruction",
            "r": _fmt(r), "r_sharp_solid": _fmt(r_sharp)}
    solid = np.asarray(analytics.delta(gammas, r, solid_cfg))
    _write_curve(solid_path, gammas, solid,
                 RunManifest("figure1", solid_cfg, settings, outputs=(str(solid_path),),
                             extra={**note, "curve": "solid n=5",
                                    "roots": f"{_fmt(roots.gamma_low)},{_fmt(roots.gamma_high)}"}))
    dashed = np.asarray(analytics.delta(gammas, r, dashed_cfg))
    _write_curve(dashed_path, gammas, dashed,
                 RunManifest("figure1", dashed_cfg, settings, outputs=(str(dashed_path),),
                             extra={**note, "curve": "dashed n=1"}))
    print(f"wrote {solid_path} and {dashed_path}")
    print(f"shared r = {r:g} (smallest integer above r_sharp = {r_sharp:.6g})")
    print(f"solid roots: gamma1 = {roots.gamma_low:.6g}, gamma2 = {roots.gamma_high:.6g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _resolve_config(args)
    settings = _settings(args)
    manifest = RunManifest("simulate", config, settings, seed=args.seed,
                           extra={"mode": args.mode})
    if args.mode == "psi":
        est = simulator.estimate_psi(config, args.gamma, args.epsilon, args.reps, args.seed)
        if est.insufficient:
            print("insufficient data: no defection-containing samples observed", file=sys.stderr)
            return EXIT_INSUFFICIENT
        doc = manifest.as_dict()
        doc.update(
            gamma=args.gamma, epsilon=args.epsilon, events=est.events,
            frequencies={str(t): f for t, f in sorted(est.frequencies.items())},
        )
        _emit(args, json.dumps(doc, indent=2))
        return EXIT_OK
    if args.mode == "phi":
        rows = [
            simulator.EstimateRow(
                config, args.gamma,
                simulator.estimate_phi(config, args.gamma, args.t, cls, args.reps, args.seed),
                t=args.t,
            )
            for cls in (SampleClass.CLEAN_FULL, SampleClass.CONTAINS_DEFECTION)
        ]
    else:
        rows = [
            simulator.EstimateRow(
                config, args.gamma,
                simulator.tremble_payoff(config, args.gamma, args.epsilon, args.reps, args.seed),
                epsilon=args.epsilon,
            )
        ]
    out = args.out or Path(f"simulate_{args.mode}.csv")
    simulator.write_estimates_csv(out, rows, header_lines=manifest.lines())
    for row in rows:
        print(f"mean={row.estimate.mean:.6g} std_error={row.estimate.std_error:.3g} "
              f"replications={row.estimate.replications}")
    print(f"wrote {out}")
    return EXIT_OK


def _verify_checks(config: GameConfig, level: str, reps: int | None, seed: int):
    """Yield (name, ok, detail) for every oracle/invariant check."""
    b, n = config.b, config.n
    grid = np.linspace(0.0, 1.0, 21)
    r = config.r

    d0 = analytics.delta(0.0, r, config)
    d1 = analytics.delta(1.0, r, config)
    target = r / config.N - 1.0
    if n > 1:
        yield ("boundary-identity", abs(d0 - target) < 1e-9 and abs(d1 - target) < 1e-9,
               f"delta(0)={d0:.3g} delta(1)={d1:.3g} target={target:.3g}")

    sums = [abs(sum(analytics.psi(g, t, config) for t in range(2, b + 1)) - 1.0) for g in grid]
    yield ("psi-normalization", max(sums) < 1e-12, f"max |sum-1| = {max(sums):.2e}")

    zero_ok = all(
        analytics.psi(0.0, t, config) == 2 * (t - 1) / (b * (b - 1)) for t in range(2, b + 1)
    )
    yield ("psi-zero-limit", zero_ok, "psi(0, t) == 2(t-1)/(b(b-1))")

    cfg1 = validate_config(b, b, 1, 1, min(r, b - 0.5) if b > 1 else r)
    n1_err = max(
        abs(analytics.phi_defection(g, t, cfg1) - ((1 - (1 - g) ** (b - t + 1)) / g if g > 0 else b - t + 1))
        for g in grid for t in range(1, b + 1)
    )
    yield ("n1-reduction", n1_err < 1e-12, f"max err = {n1_err:.2e}")

    interior = np.linspace(0.01, 0.99, 99)
    if n > 1:
        vals = np.asarray(analytics.phi_defection(interior, 2, config))
        yield ("phi-defection-gt1", bool(np.all(vals > 1.0)), "phi > 1 on (0,1)")

    mono_ok = all(
        analytics.phi_defection(g, t, config) >= analytics.phi_defection(g, t + 1, config) - 1e-12
        and analytics.phi_clean(g, t, config) >= analytics.phi_clean(g, t + 1, config) - 1e-12
        for g in grid for t in range(1, b)
    )
    yield ("phi-monotone-in-t", mono_ok, "both phi variants weakly decreasing in t")

    dom_ok = all(
        analytics.phi_clean(g, t, config) >= analytics.phi_defection(g, t, config) - 1e-12
        for g in grid for t in range(1, b + 1)
    )
    yield ("clean-ge-defection", dom_ok, "phi_clean >= phi_defection pointwise")

    g_small = 1e-8
    rel = abs(analytics.phi_clean(g_small, 2, config) - analytics.phi_clean(0.0, 2, config)) / analytics.phi_clean(0.0, 2, config)
    yield ("limit-consistency", rel < 1e-5, f"rel err at gamma=1e-8: {rel:.2e}")

    enum_sizes = [(3, 2), (4, 3)] if level == "fast" else [(2, 2), (3, 2), (3, 3), (4, 2), (4, 3)]
    worst = 0.0
    for eb, en in enum_sizes:
        ecfg = validate_config(eb * en, eb, en, 1, 1.5)
        for g in (0.0, 0.25, 0.5, 0.75, 1.0):
            for t in range(1, eb + 1):
                ex = simulator.enumerate_exact(ecfg, g, SampleClass.CLEAN_FULL, t)
                worst = max(worst, abs(ex.phi - analytics.phi_clean(g, t, ecfg)))
                if t >= 2:
                    ex = simulator.enumerate_exact(ecfg, g, SampleClass.CONTAINS_DEFECTION, t)
                    worst = max(worst, abs(ex.phi - analytics.phi_defection(g, t, ecfg)))
    yield ("enumeration-oracle", worst < 1e-10, f"max |enum - closed| = {worst:.2e}")

    mc_reps = reps or (20_000 if level == "fast" else 100_000)
    mc_cfg = config if config.m == 1 else validate_config(config.N, config.b, config.n, 1, config.r)
    worst_z = 0.0
    for g in (0.2, 0.5, 0.8):
        for cls, closed_fn in (
            (SampleClass.CLEAN_FULL, analytics.phi_clean),
            (SampleClass.CONTAINS_DEFECTION, analytics.phi_defection),
        ):
            est = simulator.estimate_phi(mc_cfg, g, 2, cls, mc_reps, seed)
            closed = closed_fn(g, 2, mc_cfg)
            z = abs(est.mean - closed) / max(est.std_error, 1e-300)
            worst_z = max(worst_z, z)
    yield ("monte-carlo-phi", worst_z < 4.0, f"worst |z| = {worst_z:.2f} at {mc_reps} reps")


def cmd_verify(args) -> int:
    config = _resolve_config(args)
    t0 = time.time()
    failures = 0
    for name, ok, detail in _verify_checks(config, args.level, args.reps, args.seed):
        print(f"{'PASS' if ok else 'FAIL'}  {name:24s} {detail}")
        failures += not ok
    print(f"{'all checks passed' if failures == 0 else f'{failures} check(s) FAILED'} "
          f"({time.time() - t0:.1f} s, level={args.level})")
    return EXIT_OK if failures == 0 else EXIT_INCONSISTENT


def _emit(args, text: str) -> None:
    out = getattr(args, "out", None)
    if out is not None:
        Path(out).write_text(text + "\n")
        print(f"wrote {out}")
    else:
        print(text)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "thresholds": cmd_thresholds,
        "delta-curve": cmd_delta_curve,
        "equilibria": cmd_equilibria,
        "verify": cmd_verify,
        "figure1": cmd_figure1,
        "simulate": cmd_simulate,
    }
    try:
        return handlers[args.command](args)
    except InvalidConfig as exc:
        for violation in exc.violations:
            print(f"invalid config: {violation}", file=sys.stderr)
        return EXIT_VALIDATION
    except InternalInconsistencyError as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT


if __name__ == "__main__":
    sys.exit(main())
