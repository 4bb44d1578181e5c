"""Command-line front end: validate, constants, certify, solve."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .certificates import (
    CertificateError,
    RadiusBox,
    certify,
    compute_constants,
    parse_tag,
)
from .expr import ExprError, constant_value, parse_expression
from .problem import ConfigError, ProblemSpec, load_config, paper_example, spec_to_config, validate_spec
from .solver import SolverConfig, SolverError, grid_shift, localize, multi_start_solve, refine

SCHEMA_VERSION = "1"
SIG_DIGITS = 9
LOW_RESOLUTION = 256
GRID_SHIFT_LIMIT = 5e-4

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VALIDATION = 2
EXIT_INCONCLUSIVE = 3
EXIT_NO_SOLUTION = 4


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; that code means validation failure here.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def round_sig(obj, digits: int = SIG_DIGITS):
    """Round every float in a nested structure to ``digits`` significant digits."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return str(obj)
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, int):
        return obj
    if isinstance(obj, dict):
        return {str(k): round_sig(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v, digits) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return round_sig(obj.item(), digits)
    return obj


def emit_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def fmt(x: float) -> str:
    return f"{x:.{SIG_DIGITS}g}"


def parse_ladder(tokens) -> list:
    """``["rho1,rho2:TAG", ...]`` (tokens may also be space-separated in one string)."""
    items = [piece for tok in tokens for piece in tok.split()]
    if not items:
        raise InputError("empty ladder")
    ladder = []
    for item in items:
        radii, sep, tag = item.partition(":")
        parts = radii.split(",")
        if not sep or len(parts) != 2:
            raise InputError(f"malformed ladder entry {item!r}; expected rho1,rho2:TAG")
        try:
            values = [constant_value(parse_expression(p.strip())) for p in parts]
        except ExprError as exc:
            raise InputError(f"malformed radius in {item!r}: {exc}") from None
        if any(v is None for v in values):
            raise InputError(f"radii must be constants in {item!r}")
        try:
            ladder.append((RadiusBox(*values), parse_tag(tag)))
        except (ValueError, CertificateError) as exc:
            raise InputError(f"{item!r}: {exc}") from None
    return ladder


def parse_starts(text: str) -> tuple:
    starts = []
    for item in text.split():
        parts = item.split(",")
        try:
            a1, a2 = (float(constant_value(parse_expression(p))) for p in parts)
        except (ExprError, TypeError, ValueError):
            raise InputError(f"malformed start {item!r}; expected a1,a2") from None
        starts.append((a1, a2))
    if not starts:
        raise InputError("no start amplitudes given")
    return tuple(starts)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="plapcert", description=__doc__)
    parser.add_argument("--version", action="version", version=f"plapcert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("config", nargs="?", help="problem config (INI)")
        p.add_argument("--paper-example", action="store_true", help="use the built-in worked example")
        p.add_argument("--n", type=int, help="grid cells (default from config, 1024)")
        p.add_argument("--tol", type=float, help="solver step tolerance")
        p.add_argument("--out", type=Path, help="write the JSON report here")
        p.add_argument("--json", action="store_true", help="print the JSON report to stdout")
        p.add_argument("--resolution", type=int, help="growth-bound lattice points per axis")

    common(sub.add_parser("validate", help="check the standing hypotheses"))
    common(sub.add_parser("constants", help="compute the cone constants"))
    p = sub.add_parser("certify", help="apply the existence theorem to a radius ladder")
    common(p)
    p.add_argument("--ladder", nargs="+", required=True, metavar="RHO1,RHO2:TAG")
    p = sub.add_parser("solve", help="find fixed points by damped Picard iteration")
    common(p)
    p.add_argument("--ladder", nargs="+", metavar="RHO1,RHO2:TAG", help="certify and localize solutions")
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--max-iterations", type=int, default=2000)
    p.add_argument("--starts", help='start amplitudes, e.g. "0.3,0.3 1,1" (default: 5x5 grid)')
    p.add_argument("--ceiling", type=float, help="divergence ceiling (default 1000 x largest ladder radius)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv-dir", type=Path, help="where CSVs go (default: next to --out, else cwd)")
    return parser


def _load(args) -> tuple[ProblemSpec, str]:
    if args.paper_example == bool(args.config):
        raise InputError("give exactly one of CONFIG or --paper-example")
    try:
        if args.paper_example:
            spec, source = paper_example(), "<paper example>"
        else:
            spec, source = load_config(args.config), str(args.config)
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from None
    if args.n is not None:
        if args.n < 2:
            raise InputError("--n must be at least 2")
        spec = spec.with_numerics(n=args.n)
    if args.resolution is not None:
        if args.resolution < 2:
            raise InputError("--resolution must be at least 2")
        spec = spec.with_numerics(lattice=args.resolution)
    return spec, source


def _base_report(command: str, spec: ProblemSpec, source: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "plapcert",
        "version": __version__,
        "command": command,
        "source": source,
        "spec": spec_to_config(spec),
        "numerics": asdict(spec.numerics),
        "warnings": [],
        "timing": {},
    }


def _timed(report: dict, key: str, fn, *a, **kw):
    t0 = time.perf_counter()
    out = fn(*a, **kw)
    report["timing"][key] = time.perf_counter() - t0
    return out


def _condition_table(cert) -> list:
    rows = []
    for (box, tag), res in zip(cert.ladder, cert.boxes):
        for comp in res.get(tag).comparisons:
            rows.append({
                "box": [box.rho1, box.rho2],
                "tag": tag,
                "component": comp.component,
                "kind": comp.estimate.kind,
                "value": comp.estimate.value,
                "raw_value": comp.estimate.raw,
                "relation": comp.direction,
                "threshold": comp.threshold,
                "raw_threshold": comp.raw_threshold,
                "margin": comp.margin,
                "status": comp.status,
                "witness": list(comp.estimate.witness),
            })
    return rows


def _cmd_validate(args, spec, report, out) -> int:
    val = _timed(report, "validate", validate_spec, spec)
    report["validation"] = val.to_dict()
    for name, c in val.conditions.items():
        line = f"{name}: {c.verdict}"
        if c.witness:
            line += f"  witness {c.witness}"
        out.append(line)
    return EXIT_OK if val.ok else EXIT_VALIDATION


def _cmd_constants(args, spec, report, out) -> int:
    const = _timed(report, "constants", compute_constants, spec)
    report["constants"] = const.to_dict()
    for k, v in const.to_dict().items():
        out.append(f"{k} = {fmt(v)}")
    return EXIT_OK


def _certify(spec, ladder, report, out):
    const = _timed(report, "constants", compute_constants, spec)
    report["constants"] = const.to_dict()
    cert = _timed(report, "certify", certify, spec, ladder, const)
    report["certificate"] = cert.to_dict()
    report["conditions"] = _condition_table(cert)
    for row in report["conditions"]:
        out.append(
            f"({fmt(row['box'][0])}, {fmt(row['box'][1])}) {row['tag']} f{row['component']}: "
            f"{fmt(row['raw_value'])} {row['relation']} {fmt(row['raw_threshold'])}  [{row['status']}]"
        )
    out.extend(cert.explanation)
    out.append(f"conclusion: {cert.conclusion}")
    for loc in cert.localization:
        out.append(f"  norm in {loc.label()}  ({loc.region})")
    return cert


def _cmd_certify(args, spec, report, out) -> int:
    ladder = parse_ladder(args.ladder)
    val = _timed(report, "validate", validate_spec, spec)
    report["validation"] = val.to_dict()
    if not val.ok:
        out.append("hypotheses fail: " + ", ".join(k for k, c in val.conditions.items() if not c.ok))
        return EXIT_VALIDATION
    cert = _certify(spec, ladder, report, out)
    return EXIT_OK if cert.conclusive else EXIT_INCONCLUSIVE


def _write_csvs(records, directory: Path, stem: str, trivial: float) -> list:
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    summary = directory / f"{stem}_summary.csv"
    with summary.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "norm", "norm_u", "norm_v", "residual", "sigma", "iterations", "interval", "note", "file"])
        for k, rec in enumerate(records, start=1):
            name = f"{stem}_solution_{k}.csv"
            note = "zero state" if rec.norm < trivial else "positive solution"
            w.writerow([k, fmt(rec.norms[2]), fmt(rec.norms[0]), fmt(rec.norms[1]), fmt(rec.residual),
                        fmt(rec.sigma), rec.iterations, rec.interval or "", note, name])
            with (directory / name).open("w", newline="", encoding="utf-8") as sol:
                sw = csv.writer(sol)
                sw.writerow(["t", "u", "v"])
                for t, u, v in zip(rec.state.grid.nodes, rec.state.u.values, rec.state.v.values):
                    sw.writerow([fmt(t), fmt(u), fmt(v)])
            files.append(str(directory / name))
    return [str(summary)] + files


def _cmd_solve(args, spec, report, out) -> int:
    ladder = parse_ladder(args.ladder) if args.ladder else None
    val = _timed(report, "validate", validate_spec, spec)
    report["validation"] = val.to_dict()
    if not val.ok:
        report["warnings"].append("hypotheses fail; solutions carry no certificate")
    cert = None
    ceiling = args.ceiling
    if ladder:
        cert = _certify(spec, ladder, report, out)
        if ceiling is None:
            ceiling = 1e3 * max(max(b.rho1, b.rho2) for b, _ in cert.ladder)
    if args.max_iterations < 1 or args.workers < 1:
        raise InputError("--max-iterations and --workers must be positive")
    try:
        cfg = SolverConfig(
            damping=args.damping,
            max_iterations=args.max_iterations,
            tol=args.tol if args.tol is not None else SolverConfig.tol,
            starts=parse_starts(args.starts) if args.starts else SolverConfig().starts,
            ceiling=ceiling if ceiling is not None else SolverConfig.ceiling,
            workers=args.workers,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    result = _timed(report, "solve", multi_start_solve, spec, cfg)
    records = list(result.records)
    if cert is not None and cert.conclusive:
        localize(records, cert)

    trivial = max(1e-6, 100 * cfg.tol)
    positive = [r for r in records if r.norm >= trivial]
    n = spec.numerics.n
    shifts = []
    t0 = time.perf_counter()
    for rec in positive:
        try:
            shifts.append(grid_shift(rec, refine(spec, rec, 2 * n, cfg)))
        except SolverError as exc:
            shifts.append(None)
            report["warnings"].append(f"grid-convergence check failed to re-solve: {exc}")
    report["timing"]["grid_check"] = time.perf_counter() - t0
    report["grid_convergence"] = {"n": n, "refined_n": 2 * n, "shifts": shifts, "limit": GRID_SHIFT_LIMIT}
    known = [s for s in shifts if s is not None]
    if n < LOW_RESOLUTION:
        worst = f"{max(known):.3g}" if known else "n/a"
        report["warnings"].append(
            f"low resolution n={n} (< {LOW_RESOLUTION}); grid-convergence check: "
            f"largest shift {worst} between n={n} and n={2 * n}"
        )
    if any(s > GRID_SHIFT_LIMIT for s in known):
        report["warnings"].append(
            f"grid-convergence check: solution moved by more than {GRID_SHIFT_LIMIT:g} between n={n} and n={2 * n}"
        )

    report["solver"] = {**asdict(cfg), "starts": [list(s) for s in cfg.starts]}
    report["solutions"] = [r.to_dict() for r in records]
    report["start_failures"] = [{"start": list(f.start), "reason": f.reason} for f in result.failures]

    if args.csv_dir is not None:
        directory = args.csv_dir
    elif args.out is not None:
        directory = args.out.parent
    else:
        directory = Path(".")
    stem = args.out.stem if args.out is not None else "plapcert"
    report["csv_files"] = _write_csvs(records, directory, stem, trivial)

    for rec in records:
        tag = "zero state" if rec.norm < trivial else (rec.interval or "")
        out.append(f"norm {fmt(rec.norm)}  residual {fmt(rec.residual)}  sigma {fmt(rec.sigma)}  {tag}".rstrip())
    out.append(f"{len(positive)} positive solution(s); {len(result.failures)} start(s) failed")
    return EXIT_OK if positive else EXIT_NO_SOLUTION


_COMMANDS = {
    "validate": _cmd_validate,
    "constants": _cmd_constants,
    "certify": _cmd_certify,
    "solve": _cmd_solve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out: list[str] = []
    try:
        spec, source = _load(args)
        report = _base_report(args.command, spec, source)
        t0 = time.perf_counter()
        code = _COMMANDS[args.command](args, spec, report, out)
        report["timing"]["total"] = time.perf_counter() - t0
    except (InputError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report["exit_code"] = code
    report["warnings_present"] = bool(report["warnings"])
    text = emit_report(round_sig(report))
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text, encoding="utf-8")
    if args.json:
        sys.stdout.write(text)
    else:
        for line in out:
            print(line)
        for w in report["warnings"]:
            print(f"warning: {w}")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
