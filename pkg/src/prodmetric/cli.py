"""Command-line interface: ``prodmetric <subcommand> [flags]``.

Exit codes: 0 when the question was answered (a refutation is an answer),
1 for bad input, 2 for evaluation failures and internal errors. Flags
``--seed``, ``--samples``, ``--threads`` and ``--format`` fall back to the
environment variables ``PRODMETRIC_SEED`` and so on before the defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import spaces as sp
from .checkers import (
    ClassSpec,
    SearchConfig,
    Verdict,
    classify,
    condition_implies,
    falsify,
)
from .core import (
    Mode,
    Triplet1D,
    TripletND,
    is_triplet_nd,
    parse_combiner,
    parse_condition,
    parse_conditions,
)
from .errors import EvaluationError, InputError, NotAmenableOnThisInstance, ProdMetricError
from .expr import format_number
from .topsis import DecisionProblem, rank

ENV_PREFIX = "PRODMETRIC_"
_DEFAULTS = {"seed": 0, "samples": 100_000, "threads": 1, "format": "human"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _env_default(name: str, cast):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return _DEFAULTS[name]
    try:
        return cast(raw)
    except ValueError:
        raise InputError(f"environment variable {ENV_PREFIX}{name.upper()}={raw!r} is not a valid {name}") from None


def _format_choice(value: str) -> str:
    if value not in ("human", "structured"):
        raise ValueError(value)
    return value


def _vec(values) -> str:
    return "(" + ", ".join(format_number(v) for v in values) + ")"


def _parse_floats(text: str, field: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"--{field}: expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="RNG seed (default 0)")
    common.add_argument("--samples", type=int, help="samples per check (default 100000)")
    common.add_argument("--threads", type=int, help="worker threads; never changes results (default 1)")
    common.add_argument("--format", choices=("human", "structured"), help="output style")
    common.add_argument("--out", help="also write the result (or resulting space) to this file")

    parser = _Parser(prog="prodmetric", description="Property-preserving combiners of semimetric spaces.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", parents=[common], help="class-membership report for a combiner")
    p.add_argument("--combiner", required=True, help="builtin:<name> or expr:<expression>")
    p.add_argument("--arity", type=int, required=True)
    p.add_argument("--reference-k", type=float, default=2.0, help="constant given to B/S inputs (default 2)")
    p.add_argument(
        "--class",
        dest="classes",
        action="append",
        default=[],
        metavar="SOURCE->TARGET",
        help='extra parametrized class, e.g. "B:2,B:2->B:2" (repeatable)',
    )

    p = sub.add_parser("falsify", parents=[common], help="search for a triplet image violation")
    p.add_argument("--combiner", required=True)
    p.add_argument("--source", required=True, help='per-coordinate conditions, e.g. "B:2,B:2"')
    p.add_argument("--target", required=True, help='target condition, e.g. "M"')

    p = sub.add_parser("implies", parents=[common], help="does generator g stay below h pointwise")
    p.add_argument("g")
    p.add_argument("h")

    p = sub.add_parser("oracle", parents=[common], help="minimal b-metric and strong b-metric constants")
    p.add_argument("--space", required=True, help="space file")

    p = sub.add_parser("glue", parents=[common], help="glue two spaces or a chain of triplet blocks")
    p.add_argument("--space", action="append", default=[], help="space file (give exactly two)")
    p.add_argument("--chain", help='triplet blocks, e.g. "1,2,6;1,2,12"')

    p = sub.add_parser("product", parents=[common], help="product of spaces under a combiner")
    p.add_argument("--space", action="append", required=True, help="space file (one per coordinate)")
    p.add_argument("--combiner", required=True)
    p.add_argument("--cap", type=int, default=sp.DEFAULT_PRODUCT_CAP)

    p = sub.add_parser("triplet", parents=[common], help="test a (G_1..G_n)-triangle triplet")
    p.add_argument("--cond", required=True, help='per-coordinate conditions, e.g. "M,B:2"')
    p.add_argument("--a", required=True, help="comma-separated coordinates")
    p.add_argument("--b", required=True)
    p.add_argument("--c", required=True)
    p.add_argument("--mode", choices=[m.value for m in Mode])

    p = sub.add_parser("topsis", parents=[common], help="rank alternatives with a combiner distance")
    p.add_argument("--problem", required=True, help="decision problem file")
    p.add_argument("--combiner", required=True)
    return parser


def _config(args) -> SearchConfig:
    kwargs = dict(seed=args.seed, samples=args.samples, threads=args.threads)
    if getattr(args, "reference_k", None) is not None:
        kwargs["reference_K"] = args.reference_k
    return SearchConfig(**kwargs)


def _read_space(path: str) -> sp.FiniteSemimetricSpace:
    if not Path(path).is_file():
        raise InputError(f"space file {path!r} does not exist")
    return sp.FiniteSemimetricSpace.load(path)


def _verdict_text(v: Verdict) -> str:
    lines = [f"{v.status.value}: {v.detail}"]
    w = v.witness
    if w is not None:
        d = w.to_dict()
        if d["kind"] == "triplet":
            lines.append(f"witness ({_vec(d['a'])}, {_vec(d['b'])}, {_vec(d['c'])})")
            lines.append(f"image {_vec(d['image'])} under target {d['target']}")
        elif d["kind"] == "point":
            lines.append(f"witness {_vec(d['point'])}, F = {format_number(d['value'])}")
        elif d["kind"] == "pair":
            lines.append(f"witness {_vec(d['a'])} <= {_vec(d['b'])}")
        elif d["kind"] == "generator":
            lines.append(f"witness (a, b) = ({format_number(d['a'])}, {format_number(d['b'])})")
    if v.certificate:
        lines.append(f"certificate: {v.certificate}")
    return "\n".join(lines)


def _profile_text(profile: sp.RelaxationProfile, space: sp.FiniteSemimetricSpace) -> str:
    d = profile.to_dict(space)
    return "\n".join(
        [
            f"k_b = {format_number(profile.k_b)}  worst triple {d['worst_triple_b']}",
            f"k_s = {format_number(profile.k_s)}  worst triple {d['worst_triple_s']}",
        ]
    )


class _Output:
    def __init__(self, args):
        self.structured = args.format == "structured"
        self.out = args.out

    def emit(self, data: dict, text: str, file_payload: str | None = None):
        print(json.dumps(data, indent=2) if self.structured else text)
        if self.out:
            payload = file_payload if file_payload is not None else json.dumps(data, indent=2)
            Path(self.out).write_text(payload + "\n")


def _cmd_classify(args, out: _Output):
    F = parse_combiner(args.combiner, args.arity)
    extra = []
    for text in args.classes:
        src, sep, tgt = text.partition("->")
        if not sep:
            raise InputError(f"--class: expected SOURCE->TARGET, got {text!r}")
        extra.append(ClassSpec(tuple(parse_conditions(src)), parse_condition(tgt)))
    report = classify(F, args.arity, _config(args), extra)
    out.emit(report.to_dict(), report.to_text())


def _cmd_falsify(args, out: _Output):
    source = parse_conditions(args.source)
    target = parse_condition(args.target)
    F = parse_combiner(args.combiner, len(source))
    v = falsify(F, source, target, _config(args))
    out.emit(v.to_dict(), _verdict_text(v))


def _cmd_implies(args, out: _Output):
    v = condition_implies(parse_condition(args.g), parse_condition(args.h), _config(args))
    out.emit(v.to_dict(), _verdict_text(v))


def _cmd_oracle(args, out: _Output):
    space = _read_space(args.space)
    sp.require_valid(space)
    profile = sp.min_relaxation(space, threads=args.threads)
    out.emit(profile.to_dict(space), _profile_text(profile, space))


def _emit_space(space: sp.FiniteSemimetricSpace, args, out: _Output, what: str):
    profile = sp.min_relaxation(space, threads=args.threads)
    data = {"space": space.to_dict(), "profile": profile.to_dict(space)}
    text = f"{what}: {len(space)} points, diameter {format_number(space.diameter)}\n" + _profile_text(
        profile, space
    )
    print(json.dumps(data, indent=2) if out.structured else text)
    if out.out:
        space.save(out.out)


def _cmd_glue(args, out: _Output):
    if args.chain is not None:
        if args.space:
            raise InputError("give either --space twice or --chain, not both")
        blocks = []
        for part in args.chain.split(";"):
            values = _parse_floats(part, "chain")
            if len(values) != 3:
                raise InputError(f"--chain: each block needs three numbers, got {part!r}")
            blocks.append(Triplet1D(*values))
        space = sp.glue_chain(blocks)
    else:
        if len(args.space) != 2:
            raise InputError("--space: glue needs exactly two space files (or use --chain)")
        space = sp.glue_pair(_read_space(args.space[0]), _read_space(args.space[1]))
    _emit_space(space, args, out, "glued space")


def _cmd_product(args, out: _Output):
    spaces = [_read_space(path) for path in args.space]
    F = parse_combiner(args.combiner, len(spaces))
    space = sp.product_space(spaces, F, cap=args.cap)
    _emit_space(space, args, out, "product space")


def _cmd_triplet(args, out: _Output):
    conds = parse_conditions(args.cond)
    t = TripletND(_parse_floats(args.a, "a"), _parse_floats(args.b, "b"), _parse_floats(args.c, "c"))
    ok = is_triplet_nd(conds, t, args.mode)
    modes = [args.mode or c.default_mode.value for c in conds]
    data = {"conditions": [str(c) for c in conds], "modes": modes, "a": list(t.a), "b": list(t.b), "c": list(t.c), "is_triplet": ok}
    text = f"({_vec(t.a)}, {_vec(t.b)}, {_vec(t.c)}) is {'' if ok else 'not '}a ({args.cond})-triangle triplet"
    print(json.dumps(data, indent=2) if out.structured else text)
    if out.out:
        if t.n != 1:
            raise InputError("--out writes the three-point space and needs a one-coordinate triplet")
        sp.space_from_triplet(t.coordinate(0)).save(out.out)


def _cmd_topsis(args, out: _Output):
    problem = DecisionProblem.load(args.problem)
    F = parse_combiner(args.combiner, len(problem.criteria))
    result = rank(problem, F)
    data = result.to_dict()
    lines = [f"{'rank':<5} {'alternative':<20} closeness"]
    for pos, i in enumerate(result.ranking, start=1):
        flag = "  (tie: equals both ideals)" if i in result.ties else ""
        lines.append(f"{pos:<5} {problem.alternatives[i]:<20} {float(result.closeness[i])!r}{flag}")
    out.emit(data, "\n".join(lines))


COMMANDS = {
    "classify": _cmd_classify,
    "falsify": _cmd_falsify,
    "implies": _cmd_implies,
    "oracle": _cmd_oracle,
    "glue": _cmd_glue,
    "product": _cmd_product,
    "triplet": _cmd_triplet,
    "topsis": _cmd_topsis,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        for name, cast in (("seed", int), ("samples", int), ("threads", int), ("format", _format_choice)):
            if getattr(args, name) is None:
                setattr(args, name, _env_default(name, cast))
        COMMANDS[args.command](args, _Output(args))
    except (InputError, NotAmenableOnThisInstance) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EvaluationError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return 2
    except ProdMetricError as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
