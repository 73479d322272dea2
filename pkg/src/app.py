import argparse
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from config import RunConfig, load_config, parse_value, sweep_threads
from core_types import (
    ConfigError,
    DomainError,
    Equilibrium,
    IntegratorConfig,
    NoConvergenceError,
    NonFiniteStateError,
    ParameterError,
    ParamSet,
    RuleFamilyMismatchError,
    UnknownExampleError,
    VerdictKind,
    equilibrium_family,
    format_complex,
    to_state,
    validate_params,
)
from integrator import convergence_metrics, integrate
from reporting import fmt, fmt_q_tilde, plot_orbits, write_sweep_csv, write_trajectory_csv
from stability import (
    CrossCheckReport,
    RuleId,
    claim_matches,
    cross_check,
    eigvals_equilibrium,
    eigvals_general,
    matignon,
    stable_interval,
)
from systems import jacobian_controlled, jacobian_uncontrolled

logger = logging.getLogger(__name__)

# File path for the reproduce fixture table (kept next to this module)
DEFAULT_CASES_FILE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "example_cases.json")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2
EXIT_NUMERICAL = 3

SWEEP_FIELDS = ("a", "b", "c1", "c2", "c3", "k", "m", "q")
EIGEN_ROUTE_TOL = 1e-9


def load_example_cases(file_path=DEFAULT_CASES_FILE):
    """
    Load the reproduce fixtures from a JSON file.

    Args:
        file_path (str): Path to the JSON fixture table.

    Returns:
        dict: Fixture entries keyed by example id, in file order.
    """
    try:
        with open(file_path, "r") as f:
            cases = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Example table {file_path} not found.") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{file_path} contains invalid JSON: {exc}") from None
    return {case["id"]: case for case in cases}


# ---------------------------------------------------------------- simulate

@dataclass
class SimulationResult:
    trajectory: object
    metrics: object
    csv_path: Optional[Path]
    svg_paths: list


def cmd_simulate(cfg, out=None, svg=None) -> SimulationResult:
    """
    Integrate a run configuration and write its trajectory CSV (and orbit SVGs).

    The CSV is written even when the run diverged; the caller checks
    `result.trajectory.diverged`.
    """
    tr = integrate(cfg.params, cfg.equilibrium, cfg.integrator, cfg.controlled)
    metrics = convergence_metrics(tr, cfg.equilibrium)
    csv_path = Path(out or cfg.out or "trajectory.csv")
    write_trajectory_csv(tr, metrics.distances, csv_path)
    svg_paths = plot_orbits(tr, svg) if svg else []
    return SimulationResult(tr, metrics, csv_path, svg_paths)


# ---------------------------------------------------------------- analyze

@dataclass
class AnalysisReport:
    params: ParamSet
    equilibrium: Equilibrium
    q: float
    controlled: bool
    closed_eigs: object
    general_eigs: object
    routes_agree: bool
    verdict: object
    cross: Optional[CrossCheckReport] = None


def _sorted_spectrum(eigs):
    return sorted(eigs.lambdas, key=lambda z: (round(z.real, 9), round(z.imag, 9)))


def eigen_routes_agree(closed, general, tol=EIGEN_ROUTE_TOL) -> bool:
    pairs = zip(_sorted_spectrum(closed), _sorted_spectrum(general))
    return all(abs(x - y) <= tol * max(1.0, abs(x)) for x, y in pairs)


def cmd_analyze(p: ParamSet, xe: Equilibrium, q: float, controlled: bool = True,
                claim: Optional[str] = None) -> AnalysisReport:
    """
    Classify an equilibrium through every available route.

    Eigenvalues come from the closed form and from the general solver applied
    to the Jacobian; the controlled system is also checked against its region
    rule via cross_check.
    """
    validate_params(p)
    state = to_state(xe)
    closed = eigvals_equilibrium(xe, p, controlled)
    jac = jacobian_controlled(state, p, xe) if controlled else jacobian_uncontrolled(state, p)
    general = eigvals_general(jac)
    agree = eigen_routes_agree(closed, general)
    if not agree:
        logger.error("Eigenvalue routes differ: %s vs %s", closed.lambdas, general.lambdas)
    verdict = matignon(closed, q)
    cross = cross_check(xe, p, q, claim=claim) if controlled else None
    return AnalysisReport(p, xe, q, controlled, closed, general, agree, verdict, cross)


def _spectrum_text(eigs):
    return ", ".join(format_complex(z) for z in eigs.lambdas)


def format_analysis_text(report: AnalysisReport) -> str:
    xe = report.equilibrium
    family = equilibrium_family(xe).value
    lines = [
        f"equilibrium: (0, {xe.k:g}, {xe.m:g}, 0, 0) [{family}]",
        f"system: {'controlled' if report.controlled else 'uncontrolled'}",
        f"eigenvalues (closed form): {_spectrum_text(report.closed_eigs)}",
        f"eigenvalues (general solver): {_spectrum_text(report.general_eigs)}",
        f"eigenvalue routes agree: {'yes' if report.routes_agree else 'NO'}",
        f"critical order q~: {fmt_q_tilde(report.closed_eigs.q_tilde)}",
        f"verdict at q={report.q:g}: {report.verdict}",
    ]
    cross = report.cross
    if cross is None:
        lines.append("closed-form rule: n/a (uncontrolled system)")
    else:
        lines.append(f"closed-form rule {cross.rule.value}: {cross.closed_form.kind} [{cross.closed_form.note}]")
        agree = {True: "agree", False: "DISAGREE", None: "not comparable (closed form undetermined)"}[cross.agree]
        lines.append(f"cross-check: {agree}")
        if cross.claim is not None:
            lines.append(f"stated claim '{cross.claim}': {'agrees' if cross.claim_agrees else 'DISAGREES'}")
    return "\n".join(lines) + "\n"


def format_analysis_csv(report: AnalysisReport) -> str:
    buf = io.StringIO()
    buf.write("key,value\n")
    rows = [
        ("k", fmt(report.equilibrium.k)),
        ("m", fmt(report.equilibrium.m)),
        ("controlled", str(report.controlled).lower()),
        ("q", fmt(report.q)),
    ]
    for i, z in enumerate(report.closed_eigs.lambdas, start=1):
        rows.append((f"lambda{i}_re", fmt(z.real)))
        rows.append((f"lambda{i}_im", fmt(z.imag)))
    rows += [
        ("routes_agree", str(report.routes_agree).lower()),
        ("q_tilde", fmt_q_tilde(report.closed_eigs.q_tilde)),
        ("verdict", report.verdict.kind.label),
        ("verdict_code", str(report.verdict.kind.code)),
    ]
    if report.cross is not None:
        agree = "" if report.cross.agree is None else str(report.cross.agree).lower()
        rows += [
            ("rule", report.cross.rule.value),
            ("rule_verdict", report.cross.closed_form.kind.label),
            ("cross_check_agree", agree),
        ]
    for key, value in rows:
        buf.write(f"{key},{value}\n")
    return buf.getvalue()


# ---------------------------------------------------------------- sweep

@dataclass(frozen=True)
class Axis:
    field: str
    lo: float
    hi: float
    n: int

    def values(self):
        return np.linspace(self.lo, self.hi, self.n)


def parse_axis(text: str) -> Axis:
    """
    Parse 'field:lo:hi:n'.

    Raises:
        ConfigError: On unknown fields or degenerate grids. n = 1 is allowed
        only with lo == hi.
    """
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigError(f"Axis '{text}' must look like field:lo:hi:n.")
    name, lo_text, hi_text, n_text = parts
    if name not in SWEEP_FIELDS:
        raise ConfigError(f"Cannot sweep '{name}'; choose from {', '.join(SWEEP_FIELDS)}.")
    try:
        lo, hi, n = float(lo_text), float(hi_text), int(n_text)
    except ValueError:
        raise ConfigError(f"Axis '{text}' has non-numeric bounds or count.") from None
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ConfigError(f"Axis '{text}' bounds must be finite.")
    if n < 1 or (n == 1 and lo != hi) or (n > 1 and not lo < hi):
        raise ConfigError(f"Axis '{text}' is degenerate: need n >= 2 and lo < hi, or n = 1 and lo = hi.")
    return Axis(name, lo, hi, n)


def evaluate_cell(cfg, assignments: dict):
    """Verdict and q~ for one grid cell; invalid parameter cells are Skipped."""
    xe = Equilibrium(assignments.get("k", cfg.equilibrium.k), assignments.get("m", cfg.equilibrium.m))
    p = cfg.params.replace(**{key: value for key, value in assignments.items() if key not in ("k", "m")})
    try:
        validate_params(p)
    except ParameterError as exc:
        logger.debug("Skipping cell %s: %s", assignments, exc)
        return VerdictKind.SKIPPED, None
    eigs = eigvals_equilibrium(xe, p, cfg.controlled)
    verdict = matignon(eigs, p.q)
    logger.debug("Cell %s -> %s", assignments, verdict.kind)
    return verdict.kind, eigs.q_tilde


def cmd_sweep(cfg, axis1: Axis, axis2: Axis, out=None, threads=None):
    """
    Classify every cell of a two-axis grid.

    Cells are evaluated concurrently; rows come back in row-major order
    (axis1 outer, axis2 inner).

    Returns:
        list: (value1, value2, VerdictKind, q_tilde) tuples.
    """
    if axis1.field == axis2.field:
        raise ConfigError(f"Both axes sweep '{axis1.field}'.")
    grid = [(float(v1), float(v2)) for v1 in axis1.values() for v2 in axis2.values()]
    workers = threads or sweep_threads()

    def run(cell):
        return evaluate_cell(cfg, {axis1.field: cell[0], axis2.field: cell[1]})

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run, grid))
    cells = [(v1, v2, kind, q_tilde) for (v1, v2), (kind, q_tilde) in zip(grid, results)]
    if out is not None:
        write_sweep_csv((axis1.field, axis2.field), cells, out)
    return cells


# ---------------------------------------------------------------- reproduce

@dataclass
class ReproduceResult:
    example_id: str
    claim: str
    analysis: AnalysisReport
    match: bool
    simulation: Optional[SimulationResult] = None
    text: str = ""


def _case_inputs(case):
    p = ParamSet(q=float(case["q"]), **{key: float(v) for key, v in case["params"].items()})
    xe = Equilibrium(float(case["equilibrium"]["k"]), float(case["equilibrium"]["m"]))
    return p, xe


def _interval_text(interval):
    if interval is None:
        return "none (sign conditions fail)"
    lo, hi = interval
    return f"({lo:g}, {hi:g})"


def cmd_reproduce(example_id: str, out_dir=None, cases=None) -> ReproduceResult:
    """
    Rerun a fixture and compare the stated claim with the computed verdict.

    Raises:
        UnknownExampleError: If the id is not in the fixture table.
    """
    cases = load_example_cases() if cases is None else cases
    if example_id not in cases:
        raise UnknownExampleError(example_id, list(cases))
    case = cases[example_id]
    p, xe = _case_inputs(case)
    controlled = bool(case.get("controlled", True))
    claim = case["claim"]
    analysis = cmd_analyze(p, xe, p.q, controlled, claim=claim if controlled else None)
    match = claim_matches(claim, analysis.verdict)

    lines = [f"example {example_id}: {case['citation']}", format_analysis_text(analysis).rstrip("\n")]
    if analysis.cross is not None and analysis.cross.rule is not RuleId.P31:
        rule = analysis.cross.rule
        free = xe.k if rule is RuleId.P32 else None
        lines.append(f"stable interval ({rule.value}): {_interval_text(stable_interval(rule, p, k=free))}")

    simulation = None
    if "simulate" in case:
        sim = case["simulate"]
        run_cfg = RunConfig(
            p, xe, IntegratorConfig(h=float(sim["h"]), N=int(sim["N"]), epsilon=float(sim["epsilon"])), controlled
        )
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            stem = Path(out_dir) / ("example_" + example_id.replace(".", "_"))
            simulation = cmd_simulate(run_cfg, out=stem.with_suffix(".csv"), svg=stem.with_suffix(".svg"))
        else:
            tr = integrate(p, xe, run_cfg.integrator, controlled)
            simulation = SimulationResult(tr, convergence_metrics(tr, xe), None, [])
        m = simulation.metrics
        lines.append(
            f"simulation: {len(simulation.trajectory)} states, "
            f"initial distance {m.initial_distance:.6g}, final distance {m.final_distance:.6g}"
        )

    lines.append(f"claim: {claim}; computed: {analysis.verdict.kind}")
    lines.append(f"result: {'MATCH' if match else 'MISMATCH'}")
    return ReproduceResult(example_id, claim, analysis, match, simulation, "\n".join(lines) + "\n")


# ---------------------------------------------------------------- CLI

class CliParser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; 2 is reserved for divergence here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_overrides(parser):
    for key in ("a", "b", "c1", "c2", "c3", "q", "k", "m", "h", "epsilon"):
        parser.add_argument(f"--{key}", type=float, default=None)
    parser.add_argument("--N", type=int, default=None)
    parser.add_argument("--controlled", dest="controlled", action="store_const", const=True, default=None)
    parser.add_argument("--uncontrolled", dest="controlled", action="store_const", const=False)
    parser.add_argument("--perturbation", default=None, help="five comma-separated offsets for x(0)")
    parser.add_argument("--out", default=None)


def build_parser():
    parser = CliParser(prog="fractoda", description="Fractional-order Toda lattice with two controls.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="integrate with the fractional Euler method")
    simulate.add_argument("--config", required=True)
    simulate.add_argument("--svg", default=None, help="base path for the five orbit SVGs")
    _add_overrides(simulate)

    analyze = sub.add_parser("analyze", help="classify an equilibrium")
    for key in ("a", "b", "c1", "c2", "c3"):
        analyze.add_argument(f"--{key}", type=float, required=True)
    analyze.add_argument("--k", type=float, default=0.0)
    analyze.add_argument("--m", type=float, default=0.0)
    analyze.add_argument("--q", type=float, default=0.8)
    analyze.add_argument("--uncontrolled", action="store_true")
    analyze.add_argument("--format", choices=("text", "csv"), default="text")

    sweep = sub.add_parser("sweep", help="classify a two-parameter grid")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--axis1", required=True)
    sweep.add_argument("--axis2", required=True)
    _add_overrides(sweep)

    reproduce = sub.add_parser("reproduce", help="rerun a stored example ('all' runs every one)")
    reproduce.add_argument("example_id")
    reproduce.add_argument("--out", default=None, help="directory for CSV/SVG output")
    return parser


def _config_from_args(args):
    cfg = load_config(args.config)
    perturbation = None
    if args.perturbation is not None:
        perturbation = parse_value("perturbation", args.perturbation)
    overrides = {key: getattr(args, key) for key in ("a", "b", "c1", "c2", "c3", "q", "k", "m", "h", "N",
                                                     "epsilon", "controlled", "out")}
    return cfg.with_overrides(perturbation=perturbation, **overrides)


def _run(args) -> int:
    logger.info("Running %s", args.command)
    if args.command == "simulate":
        cfg = _config_from_args(args)
        logger.debug("Run configuration: %s", cfg)
        result = cmd_simulate(cfg, svg=args.svg)
        tr = result.trajectory
        print(f"wrote {len(tr)} rows to {result.csv_path}")
        for path in result.svg_paths:
            print(f"wrote {path}")
        if tr.diverged:
            print(f"error: trajectory diverged at step {tr.diverged_at}", file=sys.stderr)
            return EXIT_DIVERGED
        return EXIT_OK

    if args.command == "analyze":
        p = ParamSet(args.a, args.b, args.c1, args.c2, args.c3, args.q)
        try:
            target = Equilibrium(args.k, args.m)
        except NonFiniteStateError as exc:
            raise ConfigError(str(exc)) from exc
        report = cmd_analyze(p, target, args.q, controlled=not args.uncontrolled)
        text = format_analysis_csv(report) if args.format == "csv" else format_analysis_text(report)
        sys.stdout.write(text)
        return EXIT_OK if report.routes_agree else EXIT_NUMERICAL

    if args.command == "sweep":
        cfg = _config_from_args(args)
        out = cfg.out or "sweep.csv"
        cells = cmd_sweep(cfg, parse_axis(args.axis1), parse_axis(args.axis2), out=out)
        print(f"wrote {len(cells)} cells to {out}")
        return EXIT_OK

    cases = load_example_cases()
    ids = list(cases) if args.example_id == "all" else [args.example_id]
    for example_id in ids:
        result = cmd_reproduce(example_id, out_dir=args.out, cases=cases)
        sys.stdout.write(result.text + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s [%(levelname)s] %(name)s: %(message)s")
    try:
        return _run(args)
    except (ConfigError, ParameterError, UnknownExampleError, RuleFamilyMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoConvergenceError, NonFiniteStateError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
