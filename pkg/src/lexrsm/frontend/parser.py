"""Recursive-descent parser for ``.pp`` programs and ``.inv`` annotation files."""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ..linear import LinExpr
from ..pcfg import DiracConst, ModelError, Normal, Uniform
from .ast import (And, Arith, Assign, BConst, BinOp, Cmp, If, Neg, NdetRange, Not, Num,
                  Or, Prob, Program, Skip, Star, Var, While)


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.msg = msg
        self.line = line
        self.col = col


KEYWORDS = {"while", "do", "od", "if", "then", "else", "fi", "skip", "star", "prob",
            "sample", "ndet", "unif", "norm", "dirac", "and", "or", "not", "true", "false"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>:=|<=|>=|==|!=|&&|\|\||≤|≥|⋆|[-+*/^()<>=;,:!@\[\]])
""", re.VERBOSE)

_ALIASES = {"==": "=", "≤": "<=", "≥": ">=", "&&": "and", "||": "or", "!": "not", "⋆": "star"}


@dataclass(frozen=True)
class Token:
    kind: str  # num | id | kw | op | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    pos, line, lstart = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - lstart + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            col = pos - lstart + 1
            if kind == "id" and s in KEYWORDS:
                toks.append(Token("kw", s, line, col))
            elif kind == "op" and s in _ALIASES:
                alias = _ALIASES[s]
                toks.append(Token("kw" if alias.isalpha() else "op", alias, line, col))
            else:
                toks.append(Token(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            lstart = pos + s.rfind("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", line, pos - lstart + 1))
    return toks


class NonLinear(Exception):
    pass


def linearize(a: Arith) -> LinExpr:
    """Fold a numeric expression into an affine form or raise :class:`NonLinear`."""
    if isinstance(a, Num):
        return LinExpr.constant(a.value)
    if isinstance(a, Var):
        return LinExpr.var(a.name)
    if isinstance(a, Neg):
        return -linearize(a.arg)
    left, right = linearize(a.left), linearize(a.right)
    if a.op == "+":
        return left + right
    if a.op == "-":
        return left - right
    if a.op == "*":
        if left.is_constant():
            return right * left.const
        if right.is_constant():
            return left * right.const
        raise NonLinear
    if a.op == "/":
        if right.is_constant() and right.const != 0:
            return left / right.const
        raise NonLinear
    if a.op == "^":
        if left.is_constant() and right.is_constant() and right.const.denominator == 1:
            if left.const == 0 and right.const < 0:
                raise NonLinear
            return LinExpr.constant(left.const ** int(right.const))
        raise NonLinear
    raise NonLinear


class Parser:
    def __init__(self, text: str, permissive: bool = False):
        self.toks = tokenize(text)
        self.i = 0
        self.permissive = permissive

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[Token] = None):
        t = tok or self.tok
        raise ParseError(msg, t.line, t.col)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "op") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            got = self.tok.text or "end of input"
            self.error(f"expected '{text}', found '{got}'")
        t = self.tok
        self.i += 1
        return t

    # program
    def program(self) -> Program:
        body = self.block(("eof",))
        if self.tok.kind != "eof":
            self.error(f"unexpected '{self.tok.text}'")
        return Program(body)

    def block(self, stop) -> tuple:
        stmts = [self.stmt()]
        while self.accept(";"):
            if self.tok.kind == "eof" or (self.tok.kind == "kw" and self.tok.text in stop):
                break
            stmts.append(self.stmt())
        return tuple(stmts)

    def stmt(self):
        t = self.tok
        if self.accept("skip"):
            return Skip()
        if self.accept("if"):
            cond = self.cond()
            self.expect("then")
            then = self.block(("else", "fi"))
            orelse: tuple = ()
            if self.accept("else"):
                orelse = self.block(("fi",))
            self.expect("fi")
            return If(cond, then, orelse)
        if self.accept("while"):
            if self.accept("star"):
                cond = Star()
            else:
                cond = self.bexpr()
            inv = None
            if self.accept("@"):
                name = self.tok
                if name.text != "invariant":
                    self.error("expected '@invariant'")
                self.i += 1
                self.expect("(")
                inv = self.bexpr()
                self.expect(")")
            self.expect("do")
            body = self.block(("od",))
            self.expect("od")
            return While(cond, body, inv)
        if t.kind == "id":
            self.i += 1
            self.expect(":=")
            return self.assignment(t.text)
        self.error(f"expected a statement, found '{t.text or 'end of input'}'")

    def assignment(self, var: str) -> Assign:
        start = self.tok
        terms: list[tuple[int, object]] = []
        rand = None
        sign = 1
        if self.accept("-"):
            sign = -1
        else:
            self.accept("+")
        while True:
            if self.at("sample") or self.at("ndet"):
                if rand is not None:
                    self.error("at most one sample/ndet term per assignment")
                rand = self.random_term(sign)
            else:
                terms.append((sign, self.term()))
            if self.accept("+"):
                sign = 1
            elif self.accept("-"):
                sign = -1
            else:
                break
        expr = LinExpr()
        for s, a in terms:
            try:
                e = linearize(a)
            except NonLinear:
                raise ParseError("non-linear expression", start.line, start.col) from None
            expr = expr + e * s
        return Assign(var, expr, rand)

    def random_term(self, sign: int):
        t = self.tok
        if self.accept("ndet"):
            self.expect("(")
            lo = self.const_value()
            self.expect(",")
            hi = self.const_value()
            self.expect(")")
            if lo > hi:
                self.error("empty ndet interval", t)
            return NdetRange(lo, hi) if sign > 0 else NdetRange(-hi, -lo)
        self.expect("sample")
        self.expect("(")
        d = self.tok
        if self.accept("unif"):
            self.expect("(")
            lo = self.const_value()
            self.expect(",")
            hi = self.const_value()
            self.expect(")")
            if lo > hi:
                self.error("uniform distribution with lo > hi", d)
            dist = Uniform(lo, hi) if sign > 0 else Uniform(-hi, -lo)
        elif self.accept("norm"):
            self.expect("(")
            m = self.const_value()
            self.expect(",")
            s = self.const_value()
            self.expect(")")
            if s <= 0:
                self.error("normal distribution needs a positive standard deviation", d)
            dist = Normal(m * sign, s)
        elif self.accept("dirac"):
            self.expect("(")
            v = self.const_value()
            self.expect(")")
            dist = DiracConst(v * sign)
        else:
            self.error("expected unif, norm or dirac")
        self.expect(")")
        return dist

    def const_value(self) -> Fraction:
        t = self.tok
        a = self.arith()
        try:
            e = linearize(a)
        except NonLinear:
            e = None
        if e is None or not e.is_constant():
            self.error("expected a constant", t)
        return e.const

    def cond(self):
        t = self.tok
        if self.accept("star"):
            return Star()
        if self.accept("prob"):
            self.expect("(")
            a = self.arith()
            self.expect(")")
            try:
                e = linearize(a)
                const = e.const if e.is_constant() else None
            except NonLinear:
                const = None
            if const is None:
                if not self.permissive:
                    self.error("probability must be a constant", t)
                return Prob(None, a)
            if not 0 <= const <= 1:
                self.error("probability outside [0,1]", t)
            return Prob(const)
        return self.bexpr()

    # boolean expressions
    def bexpr(self):
        args = [self.bterm()]
        while self.accept("or"):
            args.append(self.bterm())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def bterm(self):
        args = [self.bfactor()]
        while self.accept("and"):
            args.append(self.bfactor())
        return args[0] if len(args) == 1 else And(tuple(args))

    def bfactor(self):
        if self.accept("not"):
            return Not(self.bfactor())
        if self.accept("true"):
            return BConst(True)
        if self.accept("false"):
            return BConst(False)
        if self.at("("):
            save = self.i
            try:
                return self.comparison()
            except ParseError:
                self.i = save
            self.expect("(")
            b = self.bexpr()
            self.expect(")")
            return b
        return self.comparison()

    def comparison(self) -> Cmp:
        t = self.tok
        left = self.arith()
        op = self.tok
        if op.kind != "op" or op.text not in ("<", "<=", ">", ">=", "=", "!="):
            self.error("expected a comparison operator")
        self.i += 1
        right = self.arith()
        try:
            return Cmp(op.text, linearize(left), linearize(right))
        except NonLinear:
            raise ParseError("non-linear expression", t.line, t.col) from None

    # arithmetic
    def arith(self) -> Arith:
        if self.accept("-"):
            a: Arith = Neg(self.term())
        else:
            self.accept("+")
            a = self.term()
        while True:
            if self.accept("+"):
                a = BinOp("+", a, self.term())
            elif self.accept("-"):
                a = BinOp("-", a, self.term())
            else:
                return a

    def term(self) -> Arith:
        a = self.power()
        while True:
            if self.accept("*"):
                a = BinOp("*", a, self.power())
            elif self.accept("/"):
                a = BinOp("/", a, self.power())
            elif self.tok.kind == "id" or (self.at("(") and isinstance(a, Num)):
                a = BinOp("*", a, self.power())  # implicit product such as 4t
            else:
                return a

    def power(self) -> Arith:
        base = self.atom()
        if self.accept("^"):
            if self.accept("-"):
                return BinOp("^", base, Neg(self.power()))
            return BinOp("^", base, self.power())
        return base

    def atom(self) -> Arith:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(Fraction(t.text))
        if t.kind == "id":
            self.i += 1
            return Var(t.text)
        if self.accept("("):
            a = self.arith()
            self.expect(")")
            return a
        if self.accept("-"):
            return Neg(self.atom())
        self.error(f"expected an expression, found '{t.text or 'end of input'}'")


def parse(text: str, permissive: bool = False) -> Program:
    """Parse program text.  ``permissive`` admits non-constant ``prob(...)`` for simulation."""
    try:
        return Parser(text, permissive).program()
    except ModelError as e:
        raise ParseError(str(e)) from None


def parse_bexpr(text: str):
    p = Parser(text)
    b = p.bexpr()
    if p.tok.kind != "eof":
        p.error(f"unexpected '{p.tok.text}'")
    return b


def parse_linexpr(text: str) -> LinExpr:
    """Parse an affine expression such as ``15 - 2*x``."""
    p = Parser(text)
    a = p.arith()
    if p.tok.kind != "eof":
        p.error(f"unexpected '{p.tok.text}'")
    try:
        return linearize(a)
    except ModelError as e:
        raise ParseError(str(e)) from None


def parse_annotations(text: str) -> dict[str, object]:
    """Parse ``label: condition`` lines; labels may be written ``l3`` or ``ℓ3``."""
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError("expected '<label>: <condition>'", lineno, 1)
        label, body = line.split(":", 1)
        label = label.strip()
        if label.startswith("ℓ"):
            label = "l" + label[1:]
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", label):
            raise ParseError(f"bad location label {label!r}", lineno, 1)
        try:
            b = parse_bexpr(body)
        except ParseError as e:
            raise ParseError(e.msg, lineno, e.col + len(raw) - len(raw.lstrip()) + len(label) + 1) from None
        out[label] = And((out[label], b)) if label in out else b
    return out
