"""Command-line front end.

Exit codes: 0 success, 1 an assertion failed, 2 usage or validation error,
3 inconclusive (a search cap was reached).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .algebra_core import CATALOG_NAMES, AlgebraError, BudgetExceeded, catalog, dump_algebra, load_algebra_file
from .clone_engine import (
    DEFAULT_CLONE_CAP,
    DEFAULT_LEVEL_CAP,
    CapExceeded,
    UnreliableOnPartialClone,
    free_algebra,
    level,
)
from .relations import EXACT_TOLERANCE_LIMIT, all_congruences, all_tolerances, distributive_failure, modular_failure
from .suites import DAY_DEFAULT_MAX_SIZE, SUITES, run_suite
from .term_calculus import (
    SequenceError,
    SequenceKind,
    check_sequence,
    check_tm,
    double_star_transform,
    sequence_from_json,
    star_transform,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _load(spec: str):
    """A file path, or the bare name of a bundled algebra."""
    if not Path(spec).exists() and spec in CATALOG_NAMES:
        return catalog(spec)
    try:
        return load_algebra_file(spec)
    except OSError as e:
        raise UsageError(f"cannot read {spec}: {e.strerror or e}") from None


def _emit(args, payload: dict, text: str):
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(text)


def _show_partition(c):
    return "|".join(",".join(map(str, b)) for b in c.as_list())


def cmd_info(args) -> int:
    A = _load(args.algebra)
    L = all_congruences(A)
    d = {
        "name": A.name,
        "size": A.size,
        "signature": [[s, k] for s, k in A.signature],
        "congruences": len(L),
        "modular": modular_failure(L) is None,
        "distributive": distributive_failure(L) is None,
    }
    if A.size <= EXACT_TOLERANCE_LIMIT:
        d["tolerances"] = len(all_tolerances(A))
    sig = ", ".join(f"{s}/{k}" for s, k in A.signature) or "(none)"
    lines = [f"{A.name}: {A.size} elements", f"operations: {sig}", f"congruences: {len(L)}",
             f"Con modular: {d['modular']}", f"Con distributive: {d['distributive']}"]
    if "tolerances" in d:
        lines.append(f"tolerances: {d['tolerances']}")
    _emit(args, d, "\n".join(lines))
    return EXIT_OK


def cmd_conlat(args) -> int:
    A = _load(args.algebra)
    L = all_congruences(A)
    mod, dist = modular_failure(L), distributive_failure(L)
    d = {
        "algebra": A.name,
        "congruences": [c.as_list() for c in L],
        "modular": mod is None,
        "distributive": dist is None,
        "modular_failure": None if mod is None else [L.index(c) for c in mod],
        "distributive_failure": None if dist is None else [L.index(c) for c in dist],
    }
    lines = [f"{i}: {_show_partition(c)}" for i, c in enumerate(L)]
    lines.append(f"modular: {mod is None}" + ("" if mod is None else f" (fails at {d['modular_failure']})"))
    lines.append(f"distributive: {dist is None}" + ("" if dist is None else f" (fails at {d['distributive_failure']})"))
    _emit(args, d, "\n".join(lines))
    return EXIT_OK


def cmd_level(args) -> int:
    A = _load(args.algebra)
    kind = SequenceKind.parse(args.kind)
    if kind is SequenceKind.DAY and A.size > DAY_DEFAULT_MAX_SIZE and not args.allow_large:
        raise UsageError(f"Day levels for algebras of size > {DAY_DEFAULT_MAX_SIZE} need --allow-large")
    try:
        rep = level(A, kind, args.cap_n, args.cap_clone, threads=args.threads)
    except (CapExceeded, UnreliableOnPartialClone) as e:
        _emit(args, {"algebra": A.name, "kind": kind.value, "level": None, "cap": args.cap_n,
                     "error": str(e)}, f"inconclusive: {e}")
        return EXIT_CAP
    if rep.found:
        lines = [str(rep)] + [f"  t_{i} = {t}" for i, t in enumerate(rep.witness_terms)]
        if args.tables:
            lines += [f"  t_{i} table: {w.tolist()}" for i, w in enumerate(rep.witness)]
    else:
        lines = [f"{kind.value} level: none up to {rep.cap}"
                 + (" (search space exhausted)" if rep.exhausted else "")]
    _emit(args, rep.to_dict(), "\n".join(lines))
    return EXIT_OK if rep.found else EXIT_CAP


def cmd_free(args) -> int:
    A = _load(args.algebra)
    if args.arity < 0:
        raise UsageError("--arity must be nonnegative")
    try:
        F, gens = free_algebra(A, args.arity, args.cap_clone, args.threads)
    except CapExceeded as e:
        print(f"inconclusive: {e}", file=sys.stderr)
        return EXIT_CAP
    print(dump_algebra(F, generators=gens))
    return EXIT_OK


def cmd_star(args) -> int:
    A = _load(args.algebra)
    kind = SequenceKind.parse(args.kind)
    if kind not in (SequenceKind.GUMM, SequenceKind.ALVIN):
        raise UsageError("star applies to Gumm or alvin sequences")
    try:
        seq = sequence_from_json(Path(args.sequence).read_text(), A)
    except OSError as e:
        raise UsageError(f"cannot read {args.sequence}: {e.strerror or e}") from None
    rep = check_sequence(A, seq, kind)
    if not rep.valid:
        v = rep.first()
        raise UsageError(f"input is not a valid {kind.value} sequence: ({v.tag}) fails for t_{v.index} at {v.point}")
    transform = double_star_transform if args.double else star_transform
    out = list(seq)
    for _ in range(args.times):
        out = transform(A, out)
    after = check_sequence(A, out, kind)
    d = {"algebra": A.name, "kind": kind.value, "times": args.times, "double": args.double,
         "valid": after.valid, "sequence": [t.tolist() for t in out]}
    lines = [f"applied {'double ' if args.double else ''}star {args.times} time(s); "
             f"{kind.value} sequence valid: {after.valid}"]
    ok = after.valid
    if args.check_tm:
        tols = all_tolerances(A)
        bad = [] if len(out) < 2 else [str(t) for t in tols if not check_tm(A, out[1], t, args.check_tm).valid]
        ok = ok and not bad
        d["check_tm"] = {"m": args.check_tm, "tolerances": len(tols), "failures": bad}
        lines.append(f"{'PASS' if not bad else 'FAIL'}: s_1 has (T_{args.check_tm}) on all {len(tols)} tolerances")
    if args.json:
        print(json.dumps(d, sort_keys=True, indent=2))
    else:
        print("\n".join(lines))
        print(json.dumps([t.tolist() for t in out]))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args) -> int:
    A = _load(args.algebra)
    params = {}
    if args.suite == "corollary6":
        params.update(clause=args.clause, ell=args.ell, n=args.n)
    elif args.clause or args.ell or args.n is not None:
        raise UsageError("--clause, --ell and --n apply to the corollary6 suite only")
    rep = run_suite(args.suite, A, threads=args.threads, cap_n=args.cap_n, cap_clone=args.cap_clone,
                    day_max_size=None if args.allow_large else DAY_DEFAULT_MAX_SIZE, **params)
    if args.json:
        print(rep.to_json())
    else:
        print(rep)
    return rep.exit_code


def _positive(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maltsev", description="Maltsev-condition levels and congruence identities of finite algebras.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, caps=True):
        sp.add_argument("algebra", help="JSON algebra file or bundled name (" + ", ".join(CATALOG_NAMES) + ")")
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--threads", type=_positive, default=1)
        if caps:
            sp.add_argument("--cap-n", type=_positive, default=DEFAULT_LEVEL_CAP, help="largest sequence length searched")
            sp.add_argument("--cap-clone", type=_positive, default=DEFAULT_CLONE_CAP, help="largest clone generated")
            sp.add_argument("--allow-large", action="store_true", help="allow Day levels for algebras of size > 2")

    sp = sub.add_parser("info", help="size, signature and lattice summary")
    common(sp, caps=False)
    sp.set_defaults(fn=cmd_info)

    sp = sub.add_parser("conlat", help="congruence lattice")
    common(sp, caps=False)
    sp.set_defaults(fn=cmd_conlat)

    sp = sub.add_parser("level", help="least length of a term sequence of the given kind")
    common(sp)
    sp.add_argument("--kind", default="alvin", choices=[k.value for k in SequenceKind])
    sp.add_argument("--tables", action="store_true", help="print witness tables too")
    sp.set_defaults(fn=cmd_level)

    sp = sub.add_parser("free", help="free algebra on k generators as JSON")
    common(sp)
    sp.add_argument("--arity", type=int, default=3)
    sp.set_defaults(fn=cmd_free)

    sp = sub.add_parser("star", help="apply the star transformation to a sequence")
    common(sp, caps=False)
    sp.add_argument("sequence", help="JSON file: array of ternary tables")
    sp.add_argument("--kind", default="gumm", choices=["gumm", "alvin"])
    sp.add_argument("--times", type=int, default=1)
    sp.add_argument("--double", action="store_true", help="use the double star")
    sp.add_argument("--check-tm", type=_positive, default=None, metavar="M")
    sp.set_defaults(fn=cmd_star)

    sp = sub.add_parser("verify", help="run a verification suite")
    common(sp)
    sp.add_argument("--suite", required=True, choices=list(SUITES))
    sp.add_argument("--clause", type=int, choices=[1, 2, 3, 4])
    sp.add_argument("--ell", type=_positive)
    sp.add_argument("--n", type=int, default=None, help="Gumm bound (default: computed level)")
    sp.set_defaults(fn=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.fn(args)
    except (UsageError, AlgebraError, SequenceError, BudgetExceeded, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
