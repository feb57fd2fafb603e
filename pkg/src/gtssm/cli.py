"""``gtssm`` command line.

Exit codes: 0 success/pass, 1 verification failure, 2 usage error,
3 group not solvable.  Results go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import group_core as gc
from . import s3_reference as s3
from .affine import AffineMap1D, classify
from .compiler import DEFAULT_VERIFY_DEPTH, compile_group
from .errors import GtssmError, NotSolvable
from .ssm import FinitePrecisionConfig, load_model, save_model
from .tasks import gen_dataset, write_dataset
from .verifier import divergence_demo, verify_exhaustive, verify_random

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NOT_SOLVABLE = 0, 1, 2, 3
PRECISION_ENV = "GTSSM_PRECISION_DIGITS"


class UsageError(Exception):
    pass


def parse_complex(text: str) -> complex:
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}")


def precision_from_env() -> FinitePrecisionConfig:
    raw = os.environ.get(PRECISION_ENV)
    if raw is None:
        return FinitePrecisionConfig()
    try:
        digits = int(raw)
        return FinitePrecisionConfig(round_digits=digits)
    except ValueError:
        raise UsageError(f"{PRECISION_ENV} must be an integer in [4, 15], got {raw!r}") from None


def _group(spec: str) -> gc.FiniteGroup:
    try:
        return gc.construct_group(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _emit(doc, fmt: str, table_lines=None):
    if fmt == "json":
        print(json.dumps(doc, indent=2, default=_json_default))
    else:
        for line in table_lines if table_lines is not None else _table(doc):
            print(line)


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _table(doc: dict, indent: str = "") -> list[str]:
    width = max((len(k) for k in doc), default=0)
    lines = []
    for k, v in doc.items():
        if isinstance(v, dict):
            lines.append(f"{indent}{k}:")
            lines.extend(_table(v, indent + "  "))
        else:
            lines.append(f"{indent}{k.ljust(width)}  {v}")
    return lines


def cmd_group_info(args) -> int:
    G = _group(args.spec)
    info = {
        "spec": G.spec,
        "order": G.order,
        "abelian": gc.is_abelian(G),
    }
    code = EXIT_OK
    try:
        series = gc.derived_series(G)
        info.update(solvable=True, derived_length=series.length, series=series.orders())
    except NotSolvable as exc:
        info.update(solvable=False, derived_length="not solvable", residual_order=exc.residual.order)
        print(f"{G.spec} is not solvable", file=sys.stderr)
        code = EXIT_NOT_SOLVABLE
    if info["abelian"]:
        info["invariant_factors"] = list(gc.abelian_decomposition(G).cyclic_orders)
    _emit(info, args.format)
    return code


def cmd_synthesize(args) -> int:
    G = _group(args.spec)
    model = compile_group(G, precision_from_env(), verify_depth=args.verify_depth)
    save_model(model, args.out)
    _emit({"group": G.spec, "layers": model.n_layers, "dims": model.dims,
           "out": str(args.out), "self_check_depth": args.verify_depth}, args.format)
    return EXIT_OK


def cmd_verify(args) -> int:
    model = load_model(args.model)
    if os.environ.get(PRECISION_ENV) is not None:
        model = model.with_precision(precision_from_env())
    G = _group(model.group_spec)
    if args.exhaustive is not None:
        report = verify_exhaustive(model, G, args.exhaustive)
    else:
        if args.len is None:
            raise UsageError("--random needs --len")
        report = verify_random(model, G, args.random, args.len, args.seed)
    doc = report.to_dict()
    if args.format == "json":
        _emit(doc, "json")
    else:
        cx = report.first_counterexample
        lines = [
            f"verdict            {report.verdict}",
            f"mode               {report.mode}",
            f"sequences checked  {report.sequences_checked}",
            f"prefixes checked   {report.prefixes_checked}",
            f"max modulus drift  {report.max_modulus_drift:.3e}",
            f"max decode dist    {report.max_decode_distance:.3e}",
        ]
        if cx is not None:
            lines.append(f"counterexample     {cx.sequence} step {cx.step}: "
                         f"expected {cx.expected}, decoded {cx.decoded}")
        _emit(doc, "table", lines)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_classify(args) -> int:
    m = AffineMap1D(args.lam, args.b)
    cls = classify(m, args.tol)
    doc = {"lambda": m.lam, "b": m.b, "class": cls.kind.value, "center": cls.center}
    if args.format == "table":
        doc = {k: ("none" if v is None else v) for k, v in doc.items()}
    _emit(doc, args.format)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    G = _group(args.group)
    header, records = gen_dataset(G, args.count, args.len, args.seed)
    n = write_dataset(args.out, header, records)
    print(f"wrote {n} records to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_s3_demo(args) -> int:
    G = s3.s3_group()
    table = s3.reproduce_cayley()
    published = s3.published_cayley()
    states = [{"state": [q1, [q2.real, q2.imag]], "element": label}
              for (q1, q2), label in s3.state_table()]
    mismatches = [[G.label(a), G.label(b)] for a in range(6) for b in range(6)
                  if table[a][b] != published[a][b]]
    if args.format == "json":
        _emit({"labels": list(G.element_labels),
               "cayley": [[G.label(x) for x in row] for row in table],
               "states": states,
               "differs_from_published": mismatches}, "json")
        return EXIT_OK
    labels = G.element_labels
    w = max(len(x) for x in labels) + 1
    lines = ["⊙".ljust(w) + "|" + "".join(l.ljust(w) for l in labels)]
    lines.append("-" * len(lines[0]))
    for a, row in enumerate(table):
        lines.append(labels[a].ljust(w) + "|" + "".join(G.label(x).ljust(w) for x in row))
    lines.append("")
    lines.append("automaton state -> element")
    for (q1, q2), label in s3.state_table():
        lines.append(f"  ({q1:+d}, {q2.real:+.4f}{q2.imag:+.4f}i)  {label}")
    if mismatches:
        lines.append("")
        lines.append(f"{len(mismatches)} entries differ from the published table: "
                     + ", ".join(f"{a}⊙{b}" for a, b in mismatches))
    _emit(None, "table", lines)
    return EXIT_OK


def cmd_divergence_demo(args) -> int:
    out = divergence_demo(args.lambda1, args.c1, args.lambda2, args.c2, args.repeats,
                          inf_threshold=args.inf_threshold, bound=args.bound)
    doc = {
        "alpha1": out.alpha1, "alpha2": out.alpha2, "block_length": out.block_length,
        "translation": out.translation, "repeats": args.repeats,
        "final_displacement": out.displacements[-1] if out.displacements else 0.0,
        "expected_displacement": out.expected_final, "relative_error": out.relative_error,
        "monotone": out.monotone, "crossing_step": out.crossing_step,
        "projected_crossing_step": out.projected_crossing_step,
    }
    _emit(doc, args.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gtssm", description="Compile groups into diagonal SSMs and verify them.")
    sub = p.add_subparsers(dest="command", required=True)

    def fmt(sp, default="table"):
        sp.add_argument("--format", choices=["json", "table"], default=default)

    sp = sub.add_parser("group-info", help="order, solvability and derived series")
    sp.add_argument("spec")
    fmt(sp)
    sp.set_defaults(func=cmd_group_info)

    sp = sub.add_parser("synthesize", help="compile a group and write the model JSON")
    sp.add_argument("spec")
    sp.add_argument("--out", required=True)
    sp.add_argument("--verify-depth", type=int, default=DEFAULT_VERIFY_DEPTH)
    fmt(sp)
    sp.set_defaults(func=cmd_synthesize)

    sp = sub.add_parser("verify", help="check a model against prefix products")
    sp.add_argument("--model", required=True)
    mode = sp.add_mutually_exclusive_group(required=True)
    mode.add_argument("--exhaustive", type=int, metavar="L")
    mode.add_argument("--random", type=int, metavar="N")
    sp.add_argument("--len", type=int)
    sp.add_argument("--seed", type=int, default=0)
    fmt(sp, default="json")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("classify", help="classify h -> lambda h + b")
    sp.add_argument("--lambda", dest="lam", type=parse_complex, required=True)
    sp.add_argument("--b", type=parse_complex, default=0j)
    sp.add_argument("--tol", type=float, default=1e-9)
    fmt(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("gen-data", help="write a state-tracking dataset")
    sp.add_argument("--group", required=True)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--len", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("s3-demo", help="print the S3 cascade's Cayley table and state map")
    fmt(sp)
    sp.set_defaults(func=cmd_s3_demo)

    sp = sub.add_parser("divergence-demo", help="drive two neutral rotations apart")
    for name in ("lambda1", "c1", "lambda2", "c2"):
        sp.add_argument(f"--{name}", type=parse_complex, required=True)
    sp.add_argument("--repeats", type=int, default=100)
    sp.add_argument("--bound", type=int, default=720)
    sp.add_argument("--inf-threshold", type=float, default=1e12)
    fmt(sp)
    sp.set_defaults(func=cmd_divergence_demo)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except NotSolvable as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NOT_SOLVABLE
    except (GtssmError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
