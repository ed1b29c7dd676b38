import sys
import csv
import json
import time
import logging
import argparse
import dataclasses
from typing import IO, Any, Callable, Optional, Sequence
from dataclasses import field, dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from polypade import __version__
from polypade.interp.k11 import (
    K11Point,
    k11_check,
    k11_construct,
    mobius_from_c00,
    cf2_general_check,
    automorphism_transform,
)
from polypade.util.symbols import Symbol, complex_json, parse_complex, resolve_symbol
from polypade.interp.cf_interp import (
    CFData,
    Infeasible,
    VerifyOptions,
    IterationLimit,
    InfeasibleData,
    AglerCertificate,
    RATIONAL_MAX_SIZE,
    FeasibilityOptions,
    CoefficientMismatch,
    DegreeBoundViolated,
    cf_inner_sequence,
    build_realization,
    agler_feasibility,
    verify_interpolant,
)
from polypade.approx.pade_driver import (
    PadeReport,
    PadeOptions,
    pade_step,
    pfister_sequence,
    approximation_error,
)
from polypade.series.polyseries import TruncatedPoly, as_multi_index, taylor_from_evaluator
from polypade.approx.takagi_engine import ConEigOptions

logger = logging.getLogger(__name__)

SPEC_SCHEMA = "polypade.spec/1"
REPORT_SCHEMA = "polypade.report/1"
SPEC_FIELDS = {"schema", "d", "function", "schedule", "options", "data", "bound", "point", "rho", "kappa", "compacts"}
TAYLOR_RADIUS_KEY = "radius"
PFISTER_RADIUS_KEY = "check_radius"
SWEEP_COLUMNS = ("n", "sigma", "remainder_l2", "bound_l2", "min_qstar_modulus", "sup_err")
PFISTER_COLUMNS = ("kappa", "sup_error", "unimodular_error", "taylor_error")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


@dataclass
class ProblemSpec:
    d: int = 2
    function: Optional[dict[str, Any]] = None
    schedule: list[tuple[int, ...]] = field(default_factory=list)
    options: dict[str, Any] = field(default_factory=dict)
    data: Optional[list[dict[str, Any]]] = None
    bound: Optional[tuple[int, ...]] = None
    point: Optional[dict[str, Any]] = None
    rho: Optional[float] = None
    kappa: list[int] = field(default_factory=list)
    compacts: list[float] = field(default_factory=lambda: [0.5])

    @classmethod
    def from_json(cls, raw: dict[str, Any]) -> "ProblemSpec":
        """
        :raises ValueError: on unknown fields or a schema other than polypade.spec/1
        """
        if not isinstance(raw, dict):
            raise ValueError("A spec must be a JSON object")
        if raw.get("schema") == REPORT_SCHEMA:
            raw = raw["spec"]
        unknown = set(raw) - SPEC_FIELDS
        if unknown:
            raise ValueError(f"Unknown spec fields {sorted(unknown)}")
        schema = raw.get("schema", SPEC_SCHEMA)
        if schema != SPEC_SCHEMA:
            raise ValueError(f"Unsupported schema {schema!r}, expected {SPEC_SCHEMA}")
        return cls(
            d=int(raw.get("d", 2)),
            function=raw.get("function"),
            schedule=[as_multi_index(n) for n in raw.get("schedule", [])],
            options=dict(raw.get("options", {})),
            data=raw.get("data"),
            bound=None if raw.get("bound") is None else as_multi_index(raw["bound"]),
            point=raw.get("point"),
            rho=None if raw.get("rho") is None else float(raw["rho"]),
            kappa=[int(k) for k in raw.get("kappa", [])],
            compacts=[float(r) for r in raw.get("compacts", [0.5])],
        )

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"schema": SPEC_SCHEMA, "d": self.d}
        for name in ("function", "data", "point", "rho"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        if self.bound is not None:
            out["bound"] = list(self.bound)
        out["schedule"] = [list(n) for n in self.schedule]
        out["options"] = self.options
        if self.kappa:
            out["kappa"] = self.kappa
        out["compacts"] = self.compacts
        return out

    def symbol(self) -> Symbol:
        if self.function is None:
            raise ValueError("This command needs a 'function' entry")
        return resolve_symbol(self.function, self.d)


@dataclass
class RunReport:
    command: str
    spec: dict[str, Any]
    results: list[dict[str, Any]]
    wall_time: float
    seed: int
    version: str = __version__
    rows: list[dict[str, Any]] = field(default_factory=list, repr=False)
    columns: Sequence[str] = ()
    exit_code: int = EXIT_OK

    def to_json(self) -> dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA,
            "command": self.command,
            "spec": self.spec,
            "results": self.results,
            "wall_time": self.wall_time,
            "version": self.version,
            "seed": self.seed,
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, (complex, np.complexfloating)):
        return complex_json(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _apply_options(record: Any, options: dict[str, Any], used: set[str]) -> Any:
    """Copy matching keys of `options` onto a frozen option record, converted to the field type."""
    updates = {}
    for f in dataclasses.fields(record):
        if f.name in options:
            current = getattr(record, f.name)
            value = options[f.name]
            if isinstance(current, tuple):
                value = tuple(float(v) for v in (value if isinstance(value, (list, tuple)) else str(value).split(",")))
            elif isinstance(current, bool):
                value = str(value).lower() in ("1", "true", "yes")
            elif isinstance(current, int) or (current is None and f.name.endswith("grid")):
                value = int(value)
            else:
                value = float(value)
            updates[f.name] = value
            used.add(f.name)
    return dataclasses.replace(record, **updates)


def _reject_unused(options: dict[str, Any], used: set[str]) -> None:
    unknown = set(options) - used
    if unknown:
        raise ValueError(f"Unknown tolerance keys {sorted(unknown)}")


def _pade_options(options: dict[str, Any], used: set[str]) -> PadeOptions:
    prefixed = {k[len("con_eig_") :]: v for k, v in options.items() if k.startswith("con_eig_")}
    con_eig = _apply_options(ConEigOptions(), prefixed, set())
    used.update(f"con_eig_{k}" for k in prefixed)
    return dataclasses.replace(_apply_options(PadeOptions(), options, used), con_eig=con_eig)


def _taylor_radius(options: dict[str, Any], used: set[str]) -> float:
    if TAYLOR_RADIUS_KEY in options:
        used.add(TAYLOR_RADIUS_KEY)
        return float(options[TAYLOR_RADIUS_KEY])
    return 0.5


def _pade_result(report: PadeReport) -> dict[str, Any]:
    return {
        "n": list(report.n),
        "sigma": report.sigma,
        "multiplicity": report.multiplicity,
        "con_residual": report.con_residual,
        "q": report.q.to_json(),
        "q_star": report.q_star.to_json(),
        "remainder_l2": report.remainder_l2,
        "bound_l2": report.bound_l2,
        "sup_gap_bound_l2": report.sup_gap_bound_l2,
        "sup_gap_bound_holds": report.sup_gap_bound_holds,
        "sup_estimate": report.sup_estimate,
        "min_qstar_modulus": {str(r): m for r, m in report.probe.min_modulus.items()},
        "taylor_match_depth": None if report.taylor_match_depth is None else list(report.taylor_match_depth),
        "table_truncated": report.table_truncated,
    }


def _pade_steps(spec: ProblemSpec, workers: int) -> tuple[Symbol, list[PadeReport], set[str]]:
    if not spec.schedule:
        raise ValueError("The schedule must not be empty")
    used: set[str] = set()
    options = _pade_options(spec.options, used)
    radius = _taylor_radius(spec.options, used)
    _reject_unused(spec.options, used)
    symbol = spec.symbol()

    def step(n: tuple[int, ...]) -> PadeReport:
        table = symbol.table(tuple(2 * k for k in n), radius)
        return pade_step(table, symbol, n, options)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        reports = list(pool.map(step, spec.schedule))
    return symbol, reports, used


def cmd_takagi(spec: ProblemSpec, seed: int = 0, workers: int = 1) -> RunReport:
    start = time.perf_counter()
    _, reports, _ = _pade_steps(spec, workers)
    results = [_pade_result(r) for r in reports]
    return RunReport("takagi", spec.to_json(), results, time.perf_counter() - start, seed)


def cmd_pade_sweep(spec: ProblemSpec, seed: int = 0, workers: int = 1) -> RunReport:
    start = time.perf_counter()
    symbol, reports, _ = _pade_steps(spec, workers)
    rows = []
    for report in reports:
        err, _ = approximation_error(report, symbol, spec.compacts[0])
        rows.append(
            {
                "n": "x".join(str(k) for k in report.n),
                "sigma": report.sigma,
                "remainder_l2": report.remainder_l2,
                "bound_l2": report.bound_l2,
                "min_qstar_modulus": report.probe.interior_min,
                "sup_err": err,
            }
        )
    results = [_pade_result(r) for r in reports]
    return RunReport("pade-sweep", spec.to_json(), results, time.perf_counter() - start, seed, rows=rows, columns=SWEEP_COLUMNS)


def _cf_options(spec: ProblemSpec, seed: int) -> tuple[FeasibilityOptions, VerifyOptions]:
    used: set[str] = set()
    feas = _apply_options(FeasibilityOptions(), spec.options, used)
    verify = dataclasses.replace(_apply_options(VerifyOptions(), spec.options, used), seed=seed)
    _reject_unused(spec.options, used)
    return feas, verify


def _certificate_result(cert: AglerCertificate) -> dict[str, Any]:
    return {"eq_residual": cert.eq_residual, "min_eig": cert.min_eig, "iterations": cert.iterations}


def _data_bound(spec: ProblemSpec) -> tuple[int, ...]:
    """
    The box of a coefficient table: the 'bound' entry, or the only schedule entry.

    :raises ValueError: if neither is given or the bound has the wrong number of variables
    """
    if spec.bound is not None:
        bound = spec.bound
    elif len(spec.schedule) == 1:
        bound = spec.schedule[0]
    else:
        raise ValueError("Coefficient data needs a 'bound' (or a single schedule entry) giving its box")
    if len(bound) != spec.d:
        raise ValueError(f"Bound {list(bound)} does not have d = {spec.d} entries")
    return bound


def cmd_cf_interp(spec: ProblemSpec, seed: int = 0, workers: int = 1) -> RunReport:
    start = time.perf_counter()
    feas, verify = _cf_options(spec, seed)
    results: list[dict[str, Any]] = []
    exit_code = EXIT_OK
    if spec.data is not None:
        data = CFData.from_table(TruncatedPoly.from_json(spec.data, _data_bound(spec)))
        outcome = agler_feasibility(data, feas)
        if isinstance(outcome, Infeasible):
            results.append({"feasible": False, **dataclasses.asdict(outcome)})
            exit_code = EXIT_INFEASIBLE
        else:
            realization = build_realization(outcome, data)
            check = verify_interpolant(realization, data, verify)
            realized = taylor_from_evaluator(realization, data.box)
            results.append(
                {
                    "feasible": True,
                    "certificate": _certificate_result(outcome),
                    "u22": realization.u22,
                    "unitarity_defect": realization.unitarity_defect,
                    "coefficients": [
                        {"alpha": list(a), "data": complex_json(c), "realized": complex_json(r)}
                        for a, c, r in zip(data.box.indices, data.c, realized.coeffs)
                    ],
                    **dataclasses.asdict(check),
                }
            )
    else:
        symbol = spec.symbol()
        for n in spec.schedule or [(1,) * spec.d]:
            try:
                approx = cf_inner_sequence(symbol, spec.d, max(n), feas, verify.vtol)
            except (InfeasibleData, IterationLimit) as e:
                results.append({"n": max(n), "feasible": False, "reason": str(e)})
                exit_code = max(exit_code, EXIT_INFEASIBLE)
                continue
            except (CoefficientMismatch, DegreeBoundViolated) as e:
                logger.error(f"n = {max(n)}: {e}")
                results.append({"n": max(n), "feasible": True, "error": str(e)})
                exit_code = EXIT_ERROR if exit_code == EXIT_OK else exit_code
                continue
            entry: dict[str, Any] = {
                "n": max(n),
                "feasible": True,
                "certificate": _certificate_result(approx.certificate),
                "coeff_error": approx.coeff_error,
                "degree_bound": approx.degree_bound,
                "rational": None,
            }
            if approx.rational is not None:
                entry["degree"] = list(approx.rational.degree)
                entry["rational"] = approx.rational.rational.to_json()
            else:
                entry["rational_skipped"] = f"state dimension {approx.degree_bound} above {RATIONAL_MAX_SIZE}"
            results.append(entry)
    return RunReport("cf-interp", spec.to_json(), results, time.perf_counter() - start, seed, exit_code=exit_code)


def cmd_k11(spec: ProblemSpec, seed: int = 0, workers: int = 1) -> RunReport:
    start = time.perf_counter()
    if spec.point is None:
        raise ValueError("k11 needs a 'point' with c00, c01, c10, c11")
    unknown = set(spec.point) - {"c00", "c01", "c10", "c11"}
    if unknown:
        raise ValueError(f"Unknown point fields {sorted(unknown)}")
    c01, c10, c11 = (parse_complex(spec.point.get(k, 0.0)) for k in ("c01", "c10", "c11"))
    point = K11Point(c01, c10, c11, c00=parse_complex(spec.point.get("c00", 1.0)))
    result: dict[str, Any] = {}
    if abs(point.c00 - 1) > 1e-12:
        mobius = mobius_from_c00(point.c00)
        result["cf2_general_member"] = cf2_general_check(point.c00, point.c01, point.c10, point.c11)
        point = automorphism_transform(point, mobius.d1, mobius.d2)
        result["normalized"] = {k: complex_json(getattr(point, k)) for k in ("c01", "c10", "c11")}
    verdict = k11_check(point.c01, point.c10, point.c11)
    result.update({"member": verdict.member, "slack1": verdict.slack1, "slack2": verdict.slack2})
    if verdict.member:
        interp = k11_construct(point.c01, point.c10, point.c11)
        result["interpolant"] = {
            "g": interp.g.to_json(),
            "sigma": None if interp.sigma is None else complex_json(interp.sigma),
            "tau": None if interp.tau is None else complex_json(interp.tau),
            "taylor": interp.taylor().to_json(),
        }
    code = EXIT_OK if verdict.member else EXIT_INFEASIBLE
    return RunReport("k11", spec.to_json(), [result], time.perf_counter() - start, seed, exit_code=code)


def cmd_pfister(spec: ProblemSpec, seed: int = 0, workers: int = 1) -> RunReport:
    start = time.perf_counter()
    if spec.rho is None or not spec.kappa:
        raise ValueError("pfister needs 'rho' and a nonempty 'kappa' list")
    if TAYLOR_RADIUS_KEY in spec.options:
        raise ValueError(f"pfister takes its own Taylor data, set the check torus with {PFISTER_RADIUS_KEY!r}")
    used: set[str] = set()
    radius = float(spec.options.get(PFISTER_RADIUS_KEY, 0.5))
    used.add(PFISTER_RADIUS_KEY)
    _reject_unused(spec.options, used)
    approximants = pfister_sequence(spec.symbol(), spec.d, spec.rho, spec.kappa, radius)
    rows = [
        {
            "kappa": a.kappa,
            "sup_error": a.sup_error,
            "unimodular_error": a.unimodular_error,
            "taylor_error": a.taylor_error,
        }
        for a in approximants
    ]
    results = [dict(row, phi=a.phi.to_json()) for row, a in zip(rows, approximants)]
    return RunReport("pfister", spec.to_json(), results, time.perf_counter() - start, seed, rows=rows, columns=PFISTER_COLUMNS)


COMMANDS: dict[str, Callable[..., RunReport]] = {
    "takagi": cmd_takagi,
    "pade-sweep": cmd_pade_sweep,
    "cf-interp": cmd_cf_interp,
    "k11": cmd_k11,
    "pfister": cmd_pfister,
}


def write_report(report: RunReport, fmt: str, stream: IO[str]) -> None:
    if fmt == "csv":
        if not report.columns:
            raise ValueError(f"{report.command} has no tabular output, use --format json")
        writer = csv.DictWriter(stream, fieldnames=list(report.columns), lineterminator="\n")
        writer.writeheader()
        for row in report.rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    else:
        json.dump(_jsonable(report.to_json()), stream, indent=2)
        stream.write("\n")


def _parse_tol(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ValueError(f"Tolerance override {item!r} is not KEY=VALUE")
        out[key.strip()] = value.strip()
    return out


def _spec_from_args(args: argparse.Namespace) -> ProblemSpec:
    if args.spec:
        with open(args.spec, encoding="utf-8") as f:
            spec = ProblemSpec.from_json(json.load(f))
    else:
        spec = ProblemSpec(d=args.d)
    if args.builtin:
        params = json.loads(args.params) if args.params else {}
        spec.function = {"kind": "builtin", "name": args.builtin, "params": params}
    if args.n:
        spec.schedule = [as_multi_index([int(k) for k in n.split(",")]) for n in args.n]
    if args.radius is not None:
        spec.options[TAYLOR_RADIUS_KEY] = args.radius
    if args.check_radius is not None:
        spec.options[PFISTER_RADIUS_KEY] = args.check_radius
    if args.bound:
        spec.bound = as_multi_index([int(k) for k in args.bound.split(",")])
    if args.rho is not None:
        spec.rho = args.rho
    if args.kappa:
        spec.kappa = list(args.kappa)
    if args.point:
        spec.point = dict(zip(("c00", "c01", "c10", "c11"), args.point))
    if args.max_iters is not None:
        spec.options["max_iters"] = args.max_iters
    spec.options.update(_parse_tol(args.tol))
    return spec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polypade", description="Polydisk rational approximation tools")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="JSON problem spec (or a previous report)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", action="append", default=[], metavar="KEY=VALUE")
    common.add_argument("--out", help="output path, stdout when omitted")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("--d", type=int, default=2)
    common.add_argument("--builtin", help="builtin symbol name")
    common.add_argument("--params", help="builtin parameters as JSON")
    common.add_argument("--n", action="append", help="multi-degree like 1,1 (repeatable)")
    common.add_argument("--radius", type=float, help="Taylor sampling radius for takagi and pade-sweep")
    common.add_argument("--check-radius", type=float, dest="check_radius", help="pfister check torus radius")
    common.add_argument("--bound", help="box of cf-interp coefficient data, like 1,1")
    common.add_argument("--rho", type=float)
    common.add_argument("--kappa", type=int, action="append")
    common.add_argument("--point", nargs=4, metavar=("C00", "C01", "C10", "C11"))
    common.add_argument("--max-iters", type=int, dest="max_iters")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig()
    logging.getLogger("polypade").setLevel(logging.DEBUG if args.verbose else logging.WARNING)
    try:
        spec = _spec_from_args(args)
        report = COMMANDS[args.command](spec, seed=args.seed, workers=args.workers)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as f:
                write_report(report, args.format, f)
        else:
            write_report(report, args.format, sys.stdout)
    except (ValueError, KeyError, TypeError, OSError, RuntimeError) as e:
        print(f"polypade: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
