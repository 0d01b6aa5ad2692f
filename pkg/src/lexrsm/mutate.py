"""Probabilistic mutations of deterministic benchmark programs.

``pl`` turns every loop ``while g do P od`` into
``while g do if prob(1/2) then P else skip fi od``.  ``pa`` does that and
also replaces each in-loop assignment ``x := f(x) + a`` with a non-zero
constant ``a`` by ``x := f(x) + unif(a - 1, a + 1)``.  Assignments outside
loops (initialisations) are left alone.

Run as ``python -m lexrsm.mutate SRC_DIR OUT_DIR`` to write ``NAME_pl.pp``
and ``NAME_pa.pp`` next to copies of the originals.  Programs that are
already probabilistic, and files that are themselves mutants, are copied
unchanged.
"""
from __future__ import annotations

import argparse
import pathlib
import sys
from dataclasses import replace
from fractions import Fraction

from .frontend import parse, pretty
from .frontend.ast import Assign, If, Prob, Program, Skip, While
from .linear import LinExpr
from .pcfg import Uniform

MODES = ("pl", "pa")
HALF = Fraction(1, 2)


def _stmts(stmts, assign: bool, in_loop: bool) -> tuple:
    return tuple(_stmt(s, assign, in_loop) for s in stmts)


def _stmt(s, assign: bool, in_loop: bool):
    if isinstance(s, Assign):
        if assign and in_loop and s.rand is None and s.expr.const != 0:
            a = s.expr.const
            return Assign(s.var, s.expr - LinExpr.constant(a), Uniform(a - 1, a + 1))
        return s
    if isinstance(s, If):
        return replace(s, then=_stmts(s.then, assign, in_loop), orelse=_stmts(s.orelse, assign, in_loop))
    if isinstance(s, While):
        body = _stmts(s.body, assign, True)
        return replace(s, body=(If(Prob(HALF), body, (Skip(),)),))
    return s


def is_probabilistic(program: Program) -> bool:
    def block(stmts):
        for s in stmts:
            if isinstance(s, Assign) and s.rand is not None:
                return True
            if isinstance(s, If) and (isinstance(s.cond, Prob) or block(s.then) or block(s.orelse)):
                return True
            if isinstance(s, While) and block(s.body):
                return True
        return False

    return block(program.body)


def mutate_program(program: Program, mode: str) -> Program:
    if mode not in MODES:
        raise ValueError(f"unknown mutation mode {mode!r}; expected one of {MODES}")
    return Program(_stmts(program.body, mode == "pa", False))


def mutate(text: str, mode: str) -> str:
    return pretty(mutate_program(parse(text), mode))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python -m lexrsm.mutate", description=__doc__.split("\n\n")[0])
    ap.add_argument("src", type=pathlib.Path, help="directory of deterministic .pp programs")
    ap.add_argument("out", type=pathlib.Path, help="output directory")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for path in sorted(args.src.glob("*.pp")):
        text = path.read_text()
        if path.parent.resolve() != args.out.resolve():
            (args.out / path.name).write_text(text)
        if path.stem.endswith(tuple(f"_{m}" for m in MODES)) or is_probabilistic(parse(text)):
            continue
        for mode in MODES:
            (args.out / f"{path.stem}_{mode}.pp").write_text(mutate(text, mode))
    return 0


if __name__ == "__main__":
    sys.exit(main())
