"""Command-line front end.

Exit codes: 0 success, 1 negative result (synthesis failed, certificate
rejected, bench audit failed), 2 bad input.  ``simulate`` and ``fixlab``
report their findings and exit 0.
"""
from __future__ import annotations

import argparse
import json
import pathlib
import sys
import time
from fractions import Fraction
from importlib import resources
from typing import Optional

from . import bench, fixlab
from .certificate import certificate_from_json, certificate_to_json, dump_certificate
from .checker import Flavor, audit_invariant, check_certificate
from .mutate import main as mutate_main
from .synthesis import Strategy, synthesize

OK, NEGATIVE, BAD_INPUT = 0, 1, 2
BUNDLED = ("programs", "corpus", "data")


class UsageError(Exception):
    pass


def resolve(name: Optional[str]) -> Optional[pathlib.Path]:
    """A path as given, or else a file of that name shipped with the package."""
    if name is None:
        return None
    p = pathlib.Path(name)
    if p.exists():
        return p
    if p.parent == pathlib.Path("."):
        for sub in BUNDLED:
            cand = pathlib.Path(str(resources.files("lexrsm") / sub / p.name))
            if cand.exists():
                return cand
    raise UsageError(f"no such file: {name}")


def rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _emit(obj, as_json: bool, text: str) -> None:
    print(json.dumps(obj, indent=2) if as_json else text)


def _model(args, permissive: bool = False):
    path = resolve(args.file)
    inv = resolve(args.inv) if getattr(args, "inv", None) else bench.find_inv(path)
    return bench.load_model(path, inv, infer=not getattr(args, "verbatim_inv", False), permissive=permissive)


def _audit_verbatim(args, model) -> None:
    if getattr(args, "verbatim_inv", False):
        audit = audit_invariant(model.pcfg, model.inv)
        if not audit.ok:
            raise UsageError("invariants are not inductive:\n" + audit.report())


def cmd_synth(args) -> int:
    model = _model(args)
    _audit_verbatim(args, model)
    for loc, atoms in model.lost.items():
        print(f"warning: dropped non-inductive annotation at {loc}: {', '.join(map(str, atoms))}",
              file=sys.stderr)
    deadline = time.perf_counter() + args.timeout if args.timeout else None
    try:
        res = synthesize(model.pcfg, model.inv, Strategy.parse(args.method), c=args.c,
                         max_dim=args.max_dim, deadline=deadline)
    except TimeoutError:
        print(f"timeout after {args.timeout} s")
        return NEGATIVE
    if not res:
        _emit({"status": "failure", "reason": res.reason, "unranked": list(res.unranked)}, args.json,
              f"no {args.method.upper()} certificate ({res.reason}); unranked transitions: "
              + ", ".join(res.unranked))
        return NEGATIVE
    doc = certificate_to_json(res)
    if args.out:
        dump_certificate(res, args.out)
    if args.json:
        print(json.dumps(doc, indent=2))
    else:
        print(f"{args.method.upper()} certificate of dimension {res.dimension}")
        for loc in model.pcfg.locations:
            print(f"  {loc}: (" + ", ".join(str(e) for e in res.eta.exprs[loc]) + ")")
        print("  level map: " + ", ".join(f"{t}:{k}" for t, k in res.lv.items()))
        if args.out:
            print(f"written to {args.out}")
    return OK


def cmd_check(args) -> int:
    model = _model(args)
    _audit_verbatim(args, model)
    try:
        cert = certificate_from_json(json.loads(resolve(args.cert).read_text()))
    except (ValueError, KeyError, TypeError) as e:
        raise UsageError(f"malformed certificate {args.cert}: {e}") from None
    missing = set(model.pcfg.locations) - set(cert.eta.exprs)
    if missing:
        raise UsageError(f"certificate lacks locations {sorted(missing)}")
    c = args.c if args.c is not None else cert.c
    verdict = check_certificate(model.pcfg, model.inv, cert.eta, cert.lv, Flavor.parse(args.flavor), c=c)
    _emit(verdict.to_json(), args.json, verdict.report())
    return OK if verdict.ok else NEGATIVE


def cmd_bench(args) -> int:
    corpus = resolve(args.corpus) if args.corpus else bench.default_corpus()
    strategies = [Strategy.parse(s) for s in args.methods.split(",")] if args.methods else bench.STRATEGIES
    rows = bench.run_bench(corpus, timeout=args.timeout, strategies=strategies, only=args.only,
                           progress=(lambda r, s: print(f"{r.name} {s}: {r.cells[s].outcome}",
                                                        file=sys.stderr)) if args.verbose else None)
    expected = bench.load_expected(corpus)
    text = bench.to_markdown(rows, expected)
    if args.out:
        out = pathlib.Path(args.out)
        if out.suffix == ".csv":
            out.write_text(bench.to_csv(rows))
        elif out.suffix == ".json":
            out.write_text(json.dumps(bench.to_json(rows), indent=1) + "\n")
        else:
            out.write_text(text)
    print(text, end="")
    bad = bench.monotonicity_violations(rows) or bench.roundtrip_failures(rows)
    return NEGATIVE if bad else OK


def _init(text: Optional[str]) -> dict:
    out = {}
    for part in (text or "").split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise UsageError(f"bad initial valuation {part!r}; expected name=value")
        k, v = part.split("=", 1)
        try:
            out[k.strip()] = float(Fraction(v.strip()))
        except ValueError:
            raise UsageError(f"bad value for {k.strip()}: {v!r}") from None
    return out


def cmd_simulate(args) -> int:
    from .simulator import estimate_termination, parse_scheduler

    model = _model(args, permissive=True)
    try:
        sched = parse_scheduler(args.scheduler)
        stats = estimate_termination(model.lowered, sched, _init(args.init), n_runs=args.runs,
                                     max_steps=args.max_steps, seed=args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    _emit(stats.to_json(), args.json, stats.report())
    return OK


def cmd_fixlab(args) -> int:
    try:
        inst = fixlab.load_instance(resolve(args.instance))
    except (ValueError, KeyError, TypeError) as e:
        raise UsageError(f"malformed instance {args.instance}: {e}") from None
    report: dict = {"nodes": inst.size(), "horizon": inst.horizon, "n": inst.n}
    for fl in args.flavor or ():
        report[f"flavor_{fl}"] = fixlab.check_flavor(inst, fl).to_json()
    verdict = None
    lines = [f"instance: {inst.size()} nodes, horizon {inst.horizon}, dimension {inst.n}"]
    for fl in args.flavor or ():
        lines.append(f"{fl}: {'ok' if report[f'flavor_{fl}']['ok'] else 'violated'}")
    if args.eps is not None:
        try:
            if args.gamma is None:
                verdict = fixlab.is_eps_fixable(inst, args.eps, require_sc=not args.no_sc_check)
                label = "ε-fixable" if verdict else "not ε-fixable"
            else:
                verdict = fixlab.is_eps_gamma_fixable(inst, args.eps, args.gamma,
                                                      require_sc=not args.no_sc_check)
                label = "(ε,γ)-fixable" if verdict else "not (ε,γ)-fixable"
        except fixlab.NotSCLexRSM as e:
            raise UsageError(str(e)) from None
        report.update({"eps": str(args.eps), "gamma": None if args.gamma is None else str(args.gamma),
                       "fixable": verdict, "verdict": label})
        lines.append(f"ε = {args.eps}" + (f", γ = {args.gamma}" if args.gamma is not None else "")
                     + f": {label}")
    _emit(report, args.json, "\n".join(lines))
    return OK


def cmd_mutate(args) -> int:
    return mutate_main([args.src, args.out])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lexrsm", description="Lexicographic ranking supermartingales "
                                 "for probabilistic programs: synthesis, checking and experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, inv=True):
        p.add_argument("file", help="program (.pp)")
        if inv:
            p.add_argument("inv", nargs="?", help="invariant annotations (.inv; default: the .inv file next to the program)")
            p.add_argument("--verbatim-inv", action="store_true",
                           help="use the annotations as given instead of closing them under the program")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("synth", help="synthesize a certificate")
    common(p)
    p.add_argument("--method", default="smc", choices=[s.value for s in Strategy])
    p.add_argument("--max-dim", type=int, default=None)
    p.add_argument("--c", type=rational, default=Fraction(1), help="ranking constant")
    p.add_argument("--out", help="write the certificate here (JSON)")
    p.add_argument("--timeout", type=float, default=None, help="seconds")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("check", help="check a certificate")
    p.add_argument("file")
    p.add_argument("inv")
    p.add_argument("cert", help="certificate JSON")
    p.add_argument("--flavor", default="sc_mclc", help="st | lw | sc | sc_mclc | llex")
    p.add_argument("--c", type=rational, default=None)
    p.add_argument("--verbatim-inv", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("bench", help="run every strategy on a corpus")
    p.add_argument("corpus", nargs="?", help="directory of .pp/.inv files (default: shipped corpus)")
    p.add_argument("--timeout", type=float, default=bench.DEFAULT_TIMEOUT, help="seconds per cell")
    p.add_argument("--out", help="table file (.md, .csv or .json)")
    p.add_argument("--only", nargs="*", help="benchmark or model names")
    p.add_argument("--methods", help="comma-separated subset of str,lwn,smc,emc")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("simulate", help="Monte-Carlo termination estimate")
    common(p, inv=False)
    p.add_argument("--runs", type=int, default=10_000)
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--scheduler", default="uniform", help="uniform[:seed] | first | policy:<json>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", help="initial valuation, e.g. x=1,y=-100")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("fixlab", help="fixability checks on a finite instance")
    p.add_argument("instance", help="instance JSON")
    p.add_argument("--eps", type=rational)
    p.add_argument("--gamma", type=rational)
    p.add_argument("--flavor", action="append", choices=fixlab.FLAVORS)
    p.add_argument("--no-sc-check", action="store_true", help="skip the SC precondition")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_fixlab)

    p = sub.add_parser("mutate", help="write p.l./p.a. mutants of a program directory")
    p.add_argument("src")
    p.add_argument("out")
    p.set_defaults(fn=cmd_mutate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return BAD_INPUT if e.code else OK
    try:
        return args.fn(args)
    except (UsageError, bench.InputError) as e:
        print(f"error: {e}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
