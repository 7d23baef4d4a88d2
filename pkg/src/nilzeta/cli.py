"""Command line entry point: ``nilzeta <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 mismatch or failed check,
3 budget exceeded, 4 inconclusive oracle stability.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .conegen import ConeGenerationError, system_from_json, system_to_json
from .evaluator import ConsistencyError, local_counts
from .extension import (
    EXTENSION_CATALOG,
    CocycleError,
    UsageError,
    fin_subgroups,
    load_group,
    normalize_variant,
    verify_cocycle,
)
from .malcev import CATALOG_HELP, PresentationError, verify_presentation
from .oracle import DEFAULT_BUDGET, BudgetError, QuotientInvalidError
from .polyring import is_prime
from .zeta import GapError, assemble_global, dumps, k_label, oracle_compare

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_BUDGET, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return v


def _prime(text: str) -> int:
    v = int(text)
    if not is_prime(v):
        raise argparse.ArgumentTypeError(f"{text} is not prime")
    return v


def _workers_default() -> int:
    env = os.environ.get("NILZETA_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nilzeta",
        description="Subgroup zeta functions of virtually nilpotent groups via cone integrals.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("catalog", help="list built-in groups")

    def group_args(p, required=True):
        p.add_argument("--group", required=required, help="catalog name or JSON file")
        p.add_argument("--variant", default="subgroup", help="subgroup (<=) or normal")

    def k_args(p):
        p.add_argument("--K", default=None,
                       help="'all' or comma separated indices into the list of subgroups of F")

    def out_args(p, formats=("table", "json", "csv")):
        p.add_argument("--format", default="table", choices=formats)
        p.add_argument("--output", default=None, help="write to a file instead of stdout")

    p = sub.add_parser("verify", help="check presentation and cocycle axioms")
    p.add_argument("--group", required=True)
    p.add_argument("--samples", type=_positive, default=200)

    p = sub.add_parser("conditions", help="dump the cone condition system as JSON")
    group_args(p, required=False)
    k_args(p)
    p.add_argument("--output", default=None)
    p.add_argument("--load", default=None, help="re-load a dumped system and echo it")

    p = sub.add_parser("local", help="local subgroup counts from the cone integral")
    group_args(p)
    k_args(p)
    p.add_argument("--prime", type=_prime, action="append", required=True)
    p.add_argument("--kmax", type=_positive, default=2)
    p.add_argument("--workers", type=_positive, default=None)
    p.add_argument("--dump-conditions", default=None, help="also write the system JSON here")
    out_args(p)

    p = sub.add_parser("global", help="Dirichlet coefficients a_1..a_nmax")
    group_args(p)
    p.add_argument("--nmax", type=_positive, default=10)
    p.add_argument("--workers", type=_positive, default=None)
    out_args(p)

    p = sub.add_parser("oracle-compare", help="cone pipeline vs finite-quotient oracle")
    group_args(p)
    k_args(p)
    p.add_argument("--prime", type=_prime, action="append", required=True)
    p.add_argument("--kmax", type=_positive, default=2)
    p.add_argument("--e", type=_positive, default=None, help="oracle level (default kmax)")
    p.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET)
    p.add_argument("--workers", type=_positive, default=None)
    out_args(p)
    return ap


def _select_K(V, variant: str, desc: str | None):
    Ks = fin_subgroups(V.F, variant)
    if desc is None:
        if V.F.order == 1:
            return Ks
        desc = "all"
    if desc == "all":
        return Ks
    try:
        idx = [int(s) for s in desc.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad --K value {desc!r}") from exc
    for i in idx:
        if not 0 <= i < len(Ks):
            raise UsageError(f"--K index {i} out of range (0..{len(Ks) - 1})")
    return [Ks[i] for i in idx]


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _series_table(rows) -> str:
    lines = [f"{'K':<10} {'p':>3}  counts"]
    for K, s in rows:
        lines.append(f"{K:<10} {s.p:>3}  {' '.join(str(c) for c in s.counts())}")
    return "\n".join(lines)


def _series_csv(rows) -> str:
    out = ["K,p,k,count,a_raw"]
    for K, s in rows:
        for k, c in enumerate(s.counts()):
            out.append(f"{K},{s.p},{k},{c},{s.a_raw[k]}")
    return "\n".join(out)


def cmd_catalog(args) -> int:
    print("tau-groups:")
    for name, text in CATALOG_HELP.items():
        print(f"  {name:<22} {text}")
    print("extensions:")
    for name, make in EXTENSION_CATALOG.items():
        doc = (make.__doc__ or "").strip().splitlines()
        print(f"  {name:<22} {doc[0] if doc else ''}")
    return EXIT_OK


def cmd_verify(args) -> int:
    V = load_group(args.group, verify=False)
    rep = verify_presentation(V.N, samples=args.samples)
    for line in rep.lines():
        print(line)
    ok = rep.ok
    if V.F.order > 1:
        crep = verify_cocycle(V)
        for line in crep.lines():
            print(line)
        ok = ok and crep.ok
    print("verdict:", "pass" if ok else "fail")
    return EXIT_OK if ok else EXIT_MISMATCH


def _systems(V, variant, Ks):
    from .conegen import relative_conditions

    return [(K, relative_conditions(V, K, variant)) for K in Ks]


def cmd_conditions(args) -> int:
    if args.load:
        system = system_from_json(json.loads(Path(args.load).read_text(encoding="utf-8")))
        _emit(dumps(system_to_json(system)), args.output)
        return EXIT_OK
    if not args.group:
        raise UsageError("conditions needs --group or --load")
    variant = normalize_variant(args.variant)
    V = load_group(args.group)
    systems = _systems(V, variant, _select_K(V, variant, args.K))
    if len(systems) == 1:
        payload = system_to_json(systems[0][1])
    else:
        payload = {"schema": 1, "systems": [system_to_json(s) for _, s in systems]}
    _emit(dumps(payload), args.output)
    return EXIT_OK


def cmd_local(args) -> int:
    variant = normalize_variant(args.variant)
    V = load_group(args.group)
    Ks = _select_K(V, variant, args.K)
    workers = args.workers or _workers_default()
    if args.dump_conditions:
        systems = _systems(V, variant, Ks)
        payload = (system_to_json(systems[0][1]) if len(systems) == 1
                   else {"schema": 1, "systems": [system_to_json(s) for _, s in systems]})
        Path(args.dump_conditions).write_text(dumps(payload) + "\n", encoding="utf-8")
    rows = []
    for K in Ks:
        for p in args.prime:
            rows.append((k_label(K), local_counts(V, p, args.kmax, variant, K, workers)))
    if args.format == "json":
        payload = [dict(s.to_json(), K_label=K) for K, s in rows]
        text = dumps(payload[0] if len(payload) == 1 else {"schema": 1, "series": payload})
    elif args.format == "csv":
        text = _series_csv(rows)
    else:
        text = _series_table(rows)
    _emit(text, args.output)
    return EXIT_OK


def cmd_global(args) -> int:
    V = load_group(args.group)
    series = assemble_global(V, args.variant, args.nmax, workers=args.workers or _workers_default())
    if args.format == "json":
        text = dumps(series.to_json())
    elif args.format == "csv":
        text = series.to_csv()
    else:
        text = "\n".join(f"{n:>4}  {a}" for n, a in enumerate(series.coeffs, start=1))
    _emit(text, args.output)
    return EXIT_OK


def cmd_oracle_compare(args) -> int:
    variant = normalize_variant(args.variant)
    V = load_group(args.group)
    Ks = _select_K(V, variant, args.K)
    report = oracle_compare(V, variant, args.prime, args.kmax, Ks, args.e, args.budget,
                            args.workers or _workers_default())
    if args.format == "json":
        text = dumps(report.to_json())
    elif args.format == "csv":
        text = report.to_csv()
    else:
        text = report.table()
    _emit(text, args.output)
    return {"agree": EXIT_OK, "mismatch": EXIT_MISMATCH, "inconclusive": EXIT_INCONCLUSIVE}[
        report.verdict
    ]


COMMANDS = {
    "catalog": cmd_catalog,
    "verify": cmd_verify,
    "conditions": cmd_conditions,
    "local": cmd_local,
    "global": cmd_global,
    "oracle-compare": cmd_oracle_compare,
}


def parse_and_run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, PresentationError, CocycleError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except GapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConsistencyError, ConeGenerationError, QuotientInvalidError) as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


def main() -> None:
    sys.exit(parse_and_run())


if __name__ == "__main__":
    main()
