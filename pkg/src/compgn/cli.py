"""Command-line front end: ``list``, ``solve`` and ``check``.

Exit codes: 0 converged (solve) or all checks passed (check), 1 usage
error, unknown problem or unwritable output, 2 diverging iterates, 3 an
exhausted budget or inner-solver failure; ``check`` exits 4 when a check
fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import diagnostics as dg
from . import registry
from .driver import (BACKTRACK_BUDGET, CONVERGED, DIVERGING, INNER_FAILURE, OUTER_BUDGET,
                     SolverConfig, run)
from .problem import CompositeProblem, SmoothMap
from .subproblem import InnerConfig
from .trace import format_reports, write_reports, write_trace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGING = 2
EXIT_BUDGET = 3
EXIT_CHECK_FAILED = 4

STATUS_EXIT = {
    CONVERGED: EXIT_OK,
    DIVERGING: EXIT_DIVERGING,
    OUTER_BUDGET: EXIT_BUDGET,
    BACKTRACK_BUDGET: EXIT_BUDGET,
    INNER_FAILURE: EXIT_BUDGET,
}

# flag name -> SolverConfig field
_CONFIG_FLAGS = {
    "mu0": "mu0",
    "tau": "tau",
    "tol": "step_tolerance",
    "max_iter": "max_outer_iterations",
    "inner_tol": "tolerance",
    "max_inner_iter": "max_inner_iterations",
    "divergence_bound": "divergence_norm_bound",
    "max_backtracks": "max_backtracks_per_iteration",
}

log = logging.getLogger("compgn")


class UsageError(Exception):
    pass


@dataclass
class RunSpec:
    problem: str
    params: Dict[str, object] = field(default_factory=dict)
    overrides: Dict[str, object] = field(default_factory=dict)
    x0: Optional[List[float]] = None
    trace: Optional[str] = None
    report: Optional[str] = None
    seed: int = 0
    samples: int = 100
    timestamp: bool = True
    corrupt_jacobian: Optional[float] = None

    def entry(self) -> registry.RegistryEntry:
        try:
            return registry.get(self.problem)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None

    def build(self) -> CompositeProblem:
        try:
            problem = self.entry().build(**self.params)
        except TypeError as exc:
            raise UsageError(f"bad parameters for {self.problem}: {exc}") from None
        if self.corrupt_jacobian is not None:
            problem = corrupt_jacobian(problem, self.corrupt_jacobian)
        return problem

    def config(self) -> SolverConfig:
        overrides = dict(self.entry().solver_overrides)
        overrides.update(self.overrides)
        try:
            return SolverConfig().with_overrides(**overrides)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid solver settings: {exc}") from None

    def start(self, problem: CompositeProblem) -> np.ndarray:
        x0 = self.x0 if self.x0 is not None else self.entry().x0
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (problem.n,):
            raise UsageError(f"x0 must have {problem.n} entries, got {x0.size}")
        return x0


def corrupt_jacobian(problem: CompositeProblem, factor: float) -> CompositeProblem:
    """Same problem with the jacobian oracle scaled by ``factor`` (a negative control)."""
    F = problem.F
    bad = SmoothMap(F.n, F.m, F.value, lambda x: factor * F.jacobian(x), F.hess_vec)
    return replace(problem, F=bad)


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_params(items: Sequence[str]) -> Dict[str, object]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--param expects key=value, got {item!r}")
        out[key] = _parse_scalar(value)
    return out


def _parse_x0(text: str) -> List[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"cannot parse x0 {text!r}") from None


def load_spec_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read spec file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("spec file must hold a JSON object")
    return data


def build_spec(args: argparse.Namespace) -> RunSpec:
    """Merge the optional spec file with the flags; flags win."""
    data = load_spec_file(args.spec) if getattr(args, "spec", None) else {}
    known = {"problem", "params", "x0", "trace", "report", "seed", "samples", "no_timestamp",
             "corrupt_jacobian"} | set(_CONFIG_FLAGS)
    unknown = set(data) - known
    if unknown:
        raise UsageError(f"unknown keys in spec file: {', '.join(sorted(unknown))}")

    def pick(name):
        value = getattr(args, name, None)
        return value if value is not None else data.get(name)

    problem = pick("problem")
    if not problem:
        raise UsageError("no problem given (use --problem or a spec file)")
    params = dict(data.get("params", {}))
    params.update(_parse_params(getattr(args, "param", None)))
    overrides = {}
    for flag, cfg_field in _CONFIG_FLAGS.items():
        value = pick(flag)
        if value is not None:
            overrides[cfg_field] = value
    x0 = pick("x0")
    if isinstance(x0, str):
        x0 = _parse_x0(x0)
    spec = RunSpec(problem=problem, params=params, overrides=overrides, x0=x0,
                   trace=pick("trace"), report=pick("report"))
    if pick("seed") is not None:
        spec.seed = int(pick("seed"))
    if pick("samples") is not None:
        spec.samples = int(pick("samples"))
    spec.timestamp = not (getattr(args, "no_timestamp", False) or data.get("no_timestamp", False))
    if pick("corrupt_jacobian") is not None:
        spec.corrupt_jacobian = float(pick("corrupt_jacobian"))
    return spec


# ---------------------------------------------------------------- verbs ---


def cmd_list(args, out) -> int:
    names = list(registry.REGISTRY)
    width = max(len(n) for n in names)
    for name in names:
        entry = registry.REGISTRY[name]
        tag = " [fixture]" if entry.fixture else ""
        out.write(f"{name:<{width}}  {entry.notes}{tag}\n")
    return EXIT_OK


def cmd_solve(spec: RunSpec, out) -> int:
    problem = spec.build()
    config = spec.config()
    x0 = spec.start(problem)
    outcome = run(problem, x0, config)
    meta = {"problem": spec.problem, "seed": spec.seed, "x0": x0, "mu0": config.mu0,
            "tau": config.tau, "step_tolerance": config.step_tolerance}
    meta.update({f"param.{k}": v for k, v in spec.params.items()})
    if spec.trace:
        try:
            write_trace(spec.trace, outcome, meta, timestamp=spec.timestamp)
        except OSError as exc:
            log.error("cannot write trace %s: %s", spec.trace, exc)
            return EXIT_USAGE
    out.write(f"status={outcome.status} iterations={outcome.iterations} "
              f"objective={outcome.final_objective:.17g} "
              f"x={np.array2string(outcome.final_x, precision=10, separator=',')}\n")
    if outcome.message:
        out.write(outcome.message + "\n")
    return STATUS_EXIT[outcome.status]


def check_suite(problem: CompositeProblem, entry: registry.RegistryEntry, config: SolverConfig,
                x0, n_samples: int = 100, seed: int = 0,
                value_samples: int = 20) -> List[dg.CheckReport]:
    """All diagnostics for one problem, as a list of reports."""
    lower, upper = entry.sample_box
    pts = dg.sample_points(lower, upper, n_samples, seed, D=problem.D)
    rng = np.random.default_rng(seed + 1)
    partners = np.array([problem.D.project(p + 0.5 * rng.standard_normal(problem.n)) for p in pts])
    few = pts[:value_samples]

    reports = [dg.chain_rule_check(problem, pts, seed=seed),
               dg.h_partial_checks(problem, pts, partners, seed=seed)]
    reports += dg.value_function_inequalities(problem, few, cfg=config.inner, seed=seed)
    reports += dg.value_gradient_check(problem, few, mu=1.0, seed=seed)

    outcome = run(problem, x0, config.with_overrides(max_outer_iterations=50))
    reports.append(dg.descent_chain_check(problem, outcome, max_iterations=50))
    reports.append(dg.CheckReport.from_deviations(
        "step_acceptance", dg.step_acceptance_violations(problem, outcome), 1e-8,
        note=outcome.status))
    obj = np.array([r.objective for r in outcome.trace] + [outcome.final_objective])
    reports.append(dg.CheckReport.from_deviations("objective_monotone", np.diff(obj), 1e-9))

    grid = [config.mu0 * config.tau ** j for j in range(config.max_backtracks_per_iteration + 1)]
    probe = dg.mu_bar_probe(problem, (lower, upper), grid, config.inner,
                            n_samples=value_samples, seed=seed)
    note = f"mu_bar={probe.mu_bar:.6g}" if probe.found else "mu_bar=none"
    reports.append(dg.CheckReport("mu_bar", 0.0 if probe.found else np.inf, 0.0,
                                  probe.samples, note=note))
    return reports


def cmd_check(spec: RunSpec, out) -> int:
    problem = spec.build()
    config = spec.config()
    x0 = spec.start(problem)
    reports = check_suite(problem, spec.entry(), config, x0, spec.samples, spec.seed)
    if spec.report:
        try:
            write_reports(spec.report, reports)
        except OSError as exc:
            log.error("cannot write report %s: %s", spec.report, exc)
            return EXIT_USAGE
    for r in reports:
        out.write(f"{'PASS' if r.passed else 'FAIL'} {r.name:<20} max={r.max_violation:.3e} "
                  f"tol={r.tolerance:.1e} samples={r.samples} skipped={r.skipped} {r.note}\n")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


# ---------------------------------------------------------------- parser ---


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", help="registry name (see `list`)")
    p.add_argument("--spec", help="JSON file with run settings; flags override it")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="builder parameter, repeatable")
    p.add_argument("--x0", help="starting point, comma separated")
    p.add_argument("--mu0", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--tol", type=float, help="step tolerance on ||x_{k+1} - x_k||")
    p.add_argument("--max-iter", type=int, help="outer iteration cap")
    p.add_argument("--inner-tol", type=float, help="inner residual tolerance")
    p.add_argument("--max-inner-iter", type=int)
    p.add_argument("--divergence-bound", type=float)
    p.add_argument("--max-backtracks", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-timestamp", action="store_true", help="omit the creation time")
    p.add_argument("--corrupt-jacobian", type=float, help=argparse.SUPPRESS)
    p.add_argument("-v", "--verbose", action="store_true")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="compgn",
                     description="Backtracking composite Gauss-Newton solver and diagnostics.")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sub.add_parser("list", help="list registry problems")
    solve = sub.add_parser("solve", help="run the solver and write a trace")
    _add_run_flags(solve)
    solve.add_argument("--trace", help="trace CSV path")
    check = sub.add_parser("check", help="run the diagnostic suite")
    _add_run_flags(check)
    check.add_argument("--samples", type=int, help="sample points for the FD checks")
    check.add_argument("--report", help="report CSV path")
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.verb == "list":
        return cmd_list(args, out)
    try:
        spec = build_spec(args)
        if args.verb == "solve":
            return cmd_solve(spec, out)
        return cmd_check(spec, out)
    except UsageError as exc:
        sys.stderr.write(f"compgn: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
