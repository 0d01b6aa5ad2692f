"""Syntax tree of the probabilistic while-language."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from ..linear import LinExpr, _fmt_num
from ..pcfg import DiracConst, Distribution, Normal, Uniform


# numeric expressions kept symbolic only for parametrized probabilities

@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Arith"
    right: "Arith"


@dataclass(frozen=True)
class Neg:
    arg: "Arith"


Arith = Union[Num, Var, BinOp, Neg]


def eval_arith(a: Arith, env) -> Fraction:
    """Exact value of ``a``; ``^`` needs an integer exponent."""
    if isinstance(a, Num):
        return a.value
    if isinstance(a, Var):
        return Fraction(env[a.name])
    if isinstance(a, Neg):
        return -eval_arith(a.arg, env)
    x, y = eval_arith(a.left, env), eval_arith(a.right, env)
    if a.op == "+":
        return x + y
    if a.op == "-":
        return x - y
    if a.op == "*":
        return x * y
    if a.op == "/":
        return x / y
    if y.denominator != 1:
        raise ValueError(f"non-integer exponent {y}")
    return x ** int(y)


# boolean expressions

@dataclass(frozen=True)
class BConst:
    value: bool


@dataclass(frozen=True)
class Cmp:
    op: str  # one of < <= > >= = !=
    left: LinExpr
    right: LinExpr


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Not:
    arg: "BExpr"


BExpr = Union[BConst, Cmp, And, Or, Not]


@dataclass(frozen=True)
class Star:
    pass


@dataclass(frozen=True)
class Prob:
    """``prob(p)``; ``expr`` is set instead of ``p`` for parametrized probabilities."""

    p: Optional[Fraction] = None
    expr: Optional[Arith] = None


Cond = Union[BExpr, Star, Prob]


@dataclass(frozen=True)
class NdetRange:
    lo: Fraction
    hi: Fraction


# statements

@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Assign:
    """``var := expr`` plus an optional additive random or nondeterministic term."""

    var: str
    expr: LinExpr
    rand: Optional[Union[Distribution, NdetRange]] = None


@dataclass(frozen=True)
class If:
    cond: Cond
    then: tuple
    orelse: tuple = ()


@dataclass(frozen=True)
class While:
    cond: Union[BExpr, Star]
    body: tuple
    invariant: Optional[BExpr] = None


Stmt = Union[Skip, Assign, If, While]


@dataclass(frozen=True)
class Program:
    body: tuple

    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}

        def lin(e: LinExpr):
            for v in e.variables():
                seen.setdefault(v, None)

        def arith(a):
            if isinstance(a, Var):
                seen.setdefault(a.name, None)
            elif isinstance(a, BinOp):
                arith(a.left)
                arith(a.right)
            elif isinstance(a, Neg):
                arith(a.arg)

        def cond(c):
            if isinstance(c, Cmp):
                lin(c.left)
                lin(c.right)
            elif isinstance(c, (And, Or)):
                for a in c.args:
                    cond(a)
            elif isinstance(c, Not):
                cond(c.arg)
            elif isinstance(c, Prob) and c.expr is not None:
                arith(c.expr)

        def block(stmts):
            for s in stmts:
                if isinstance(s, Assign):
                    seen.setdefault(s.var, None)
                    for v in sorted(s.expr.variables()):
                        seen.setdefault(v, None)
                elif isinstance(s, If):
                    cond(s.cond)
                    block(s.then)
                    block(s.orelse)
                elif isinstance(s, While):
                    cond(s.cond)
                    if s.invariant is not None:
                        cond(s.invariant)
                    block(s.body)

        block(self.body)
        return tuple(seen)


# --- pretty printing -----------------------------------------------------

def _lin(e: LinExpr) -> str:
    return str(e)


def _num(q: Fraction) -> str:
    return _fmt_num(q)


def pretty_arith(a: Arith) -> str:
    if isinstance(a, Num):
        return _num(a.value) if a.value >= 0 else f"({_num(a.value)})"
    if isinstance(a, Var):
        return a.name
    if isinstance(a, Neg):
        return f"(-{pretty_arith(a.arg)})"
    return f"({pretty_arith(a.left)} {a.op} {pretty_arith(a.right)})"


def pretty_bexpr(b: BExpr) -> str:
    if isinstance(b, BConst):
        return "true" if b.value else "false"
    if isinstance(b, Cmp):
        return f"{_lin(b.left)} {b.op} {_lin(b.right)}"
    if isinstance(b, And):
        return " and ".join(_paren(a) for a in b.args)
    if isinstance(b, Or):
        return " or ".join(_paren(a) for a in b.args)
    return f"not {_paren(b.arg)}"


def _paren(b: BExpr) -> str:
    s = pretty_bexpr(b)
    return f"({s})" if isinstance(b, (And, Or, Not)) else s


def pretty_cond(c: Cond) -> str:
    if isinstance(c, Star):
        return "star"
    if isinstance(c, Prob):
        return f"prob({_num(c.p) if c.p is not None else pretty_arith(c.expr)})"
    return pretty_bexpr(c)


def pretty_dist(d: Distribution) -> str:
    if isinstance(d, Uniform):
        return f"unif({_num(d.lo)}, {_num(d.hi)})"
    if isinstance(d, Normal):
        return f"norm({_num(d.mu)}, {_num(d.sigma)})"
    assert isinstance(d, DiracConst)
    return f"dirac({_num(d.value)})"


def _rhs(s: Assign) -> str:
    if s.rand is None:
        return _lin(s.expr)
    r = (f"ndet({_num(s.rand.lo)}, {_num(s.rand.hi)})" if isinstance(s.rand, NdetRange)
         else f"sample({pretty_dist(s.rand)})")
    if s.expr.is_zero():
        return r
    return f"{_lin(s.expr)} + {r}"


def pretty(program: Program, indent: str = "  ") -> str:
    lines: list[str] = []

    def block(stmts, depth):
        pad = indent * depth
        for i, s in enumerate(stmts):
            sep = ";" if i < len(stmts) - 1 else ""
            if isinstance(s, Skip):
                lines.append(f"{pad}skip{sep}")
            elif isinstance(s, Assign):
                lines.append(f"{pad}{s.var} := {_rhs(s)}{sep}")
            elif isinstance(s, If):
                lines.append(f"{pad}if {pretty_cond(s.cond)} then")
                block(s.then or (Skip(),), depth + 1)
                if s.orelse:
                    lines.append(f"{pad}else")
                    block(s.orelse, depth + 1)
                lines.append(f"{pad}fi{sep}")
            else:
                inv = f" @invariant({pretty_bexpr(s.invariant)})" if s.invariant is not None else ""
                lines.append(f"{pad}while {pretty_cond(s.cond)}{inv} do")
                block(s.body or (Skip(),), depth + 1)
                lines.append(f"{pad}od{sep}")

    block(program.body, 0)
    return "\n".join(lines) + "\n"
