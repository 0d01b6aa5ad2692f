"""Exact affine expressions and conjunctions of linear inequalities.

All coefficients are :class:`fractions.Fraction`.  Values are treated as
immutable once built; every operation returns a new object.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union

Number = Union[int, Fraction]

ZERO = Fraction(0)
ONE = Fraction(1)


def frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floats are not accepted as exact coefficients")
    return Fraction(value)


class LinExpr:
    """``const + sum(coeff[v] * v)`` with no zero coefficients stored."""

    __slots__ = ("_coeffs", "const", "_hash")

    def __init__(self, coeffs: Mapping[str, Number] | None = None, const: Number = 0):
        items = {}
        if coeffs:
            for var, c in coeffs.items():
                c = frac(c)
                if c:
                    items[var] = c
        self._coeffs = items
        self.const = frac(const)
        self._hash = None

    @classmethod
    def _raw(cls, coeffs: dict, const: Fraction) -> "LinExpr":
        obj = cls.__new__(cls)
        obj._coeffs = coeffs
        obj.const = const
        obj._hash = None
        return obj

    @classmethod
    def var(cls, name: str, coeff: Number = 1) -> "LinExpr":
        return cls({name: coeff})

    @classmethod
    def constant(cls, value: Number) -> "LinExpr":
        return cls(None, value)

    @property
    def coeffs(self) -> Mapping[str, Fraction]:
        return self._coeffs

    def coeff(self, var: str) -> Fraction:
        return self._coeffs.get(var, ZERO)

    def variables(self) -> frozenset[str]:
        return frozenset(self._coeffs)

    def is_constant(self) -> bool:
        return not self._coeffs

    def is_zero(self) -> bool:
        return not self._coeffs and not self.const

    def __add__(self, other) -> "LinExpr":
        if not isinstance(other, LinExpr):
            return LinExpr._raw(dict(self._coeffs), self.const + frac(other))
        out = dict(self._coeffs)
        for v, c in other._coeffs.items():
            s = out.get(v, ZERO) + c
            if s:
                out[v] = s
            else:
                out.pop(v, None)
        return LinExpr._raw(out, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "LinExpr":
        return LinExpr._raw({v: -c for v, c in self._coeffs.items()}, -self.const)

    def __sub__(self, other) -> "LinExpr":
        return self + (-other)

    def __rsub__(self, other) -> "LinExpr":
        return (-self) + other

    def __mul__(self, k) -> "LinExpr":
        if isinstance(k, LinExpr):
            if k.is_constant():
                k = k.const
            elif self.is_constant():
                return k * self.const
            else:
                raise ValueError("product of two non-constant expressions is not linear")
        k = frac(k)
        if not k:
            return LinExpr._raw({}, ZERO)
        return LinExpr._raw({v: c * k for v, c in self._coeffs.items()}, self.const * k)

    __rmul__ = __mul__

    def __truediv__(self, k) -> "LinExpr":
        return self * (ONE / frac(k))

    def substitute(self, var: str, repl: "LinExpr") -> "LinExpr":
        c = self._coeffs.get(var)
        if c is None:
            return self
        rest = dict(self._coeffs)
        del rest[var]
        return LinExpr._raw(rest, self.const) + repl * c

    def drop(self, var: str) -> "LinExpr":
        if var not in self._coeffs:
            return self
        rest = dict(self._coeffs)
        del rest[var]
        return LinExpr._raw(rest, self.const)

    def evaluate(self, point: Mapping[str, Number]) -> Fraction:
        total = self.const
        for v, c in self._coeffs.items():
            total += c * point[v]
        return total

    def rename(self, mapping: Mapping[str, str]) -> "LinExpr":
        return LinExpr({mapping.get(v, v): c for v, c in self._coeffs.items()}, self.const)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            return not self._coeffs and self.const == other
        if not isinstance(other, LinExpr):
            return NotImplemented
        return self.const == other.const and self._coeffs == other._coeffs

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((frozenset(self._coeffs.items()), self.const))
        return self._hash

    def __repr__(self) -> str:
        return f"LinExpr({self})"

    def __str__(self) -> str:
        return format_affine(self._coeffs.items(), self.const)


def _fmt_num(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_affine(items: Iterable[tuple[str, Fraction]], const: Fraction) -> str:
    parts: list[str] = []
    for v, c in items:
        mag = abs(c)
        term = v if mag == 1 else f"{_fmt_num(mag)}*{v}"
        if not parts:
            parts.append(term if c > 0 else f"-{term}")
        else:
            parts.append(f"+ {term}" if c > 0 else f"- {term}")
    if const or not parts:
        if not parts:
            parts.append(_fmt_num(const))
        else:
            parts.append(f"+ {_fmt_num(const)}" if const > 0 else f"- {_fmt_num(-const)}")
    return " ".join(parts)


class LinConstraint:
    """``expr <= 0`` or, when ``strict``, ``expr < 0``."""

    __slots__ = ("expr", "strict")

    def __init__(self, expr: LinExpr, strict: bool = False):
        self.expr = expr
        self.strict = bool(strict)

    def holds(self, point: Mapping[str, Number]) -> bool:
        v = self.expr.evaluate(point)
        return v < 0 if self.strict else v <= 0

    def negate(self) -> "LinConstraint":
        return LinConstraint(-self.expr, not self.strict)

    def closure(self) -> "LinConstraint":
        return self if not self.strict else LinConstraint(self.expr, False)

    def substitute(self, var: str, repl: LinExpr) -> "LinConstraint":
        return LinConstraint(self.expr.substitute(var, repl), self.strict)

    def variables(self) -> frozenset[str]:
        return self.expr.variables()

    def is_trivially_true(self) -> bool:
        if not self.expr.is_constant():
            return False
        return self.expr.const < 0 or (not self.strict and self.expr.const == 0)

    def is_trivially_false(self) -> bool:
        return self.expr.is_constant() and not self.is_trivially_true()

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinConstraint):
            return NotImplemented
        return self.strict == other.strict and self.expr == other.expr

    def __hash__(self) -> int:
        return hash((self.expr, self.strict))

    def __repr__(self) -> str:
        return f"LinConstraint({self})"

    def __str__(self) -> str:
        return pretty_constraint(self)


def pretty_constraint(c: LinConstraint) -> str:
    """Render as ``lhs op rhs`` with positive-leading variables on the left."""
    e = c.expr
    if e.is_constant():
        return f"{_fmt_num(e.const)} {'<' if c.strict else '<='} 0"
    items = list(e.coeffs.items())
    op = "<" if c.strict else "<="
    if items[0][1] < 0:
        e = -e
        items = list(e.coeffs.items())
        op = ">" if c.strict else ">="
    return f"{format_affine(items, ZERO)} {op} {_fmt_num(-e.const)}"


def le(a, b) -> LinConstraint:
    return LinConstraint(_as_expr(a) - _as_expr(b), False)


def lt(a, b) -> LinConstraint:
    return LinConstraint(_as_expr(a) - _as_expr(b), True)


def ge(a, b) -> LinConstraint:
    return le(b, a)


def gt(a, b) -> LinConstraint:
    return lt(b, a)


def _as_expr(x) -> LinExpr:
    if isinstance(x, LinExpr):
        return x
    if isinstance(x, str):
        return LinExpr.var(x)
    return LinExpr.constant(x)


class Polyhedron:
    """Ordered conjunction of :class:`LinConstraint` atoms."""

    __slots__ = ("constraints",)

    def __init__(self, constraints: Iterable[LinConstraint] = ()):
        self.constraints = tuple(constraints)

    @classmethod
    def true(cls) -> "Polyhedron":
        return cls(())

    def __iter__(self) -> Iterator[LinConstraint]:
        return iter(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def __and__(self, other) -> "Polyhedron":
        if isinstance(other, LinConstraint):
            return Polyhedron(self.constraints + (other,))
        return Polyhedron(self.constraints + tuple(other))

    def dedup(self) -> "Polyhedron":
        seen = set()
        out = []
        for c in self.constraints:
            if c.is_trivially_true() or c in seen:
                continue
            seen.add(c)
            out.append(c)
        return Polyhedron(out)

    def closure(self) -> "Polyhedron":
        return Polyhedron(c.closure() for c in self.constraints)

    def has_strict(self) -> bool:
        return any(c.strict for c in self.constraints)

    def variables(self) -> frozenset[str]:
        out: set[str] = set()
        for c in self.constraints:
            out |= c.variables()
        return frozenset(out)

    def holds(self, point: Mapping[str, Number]) -> bool:
        return all(c.holds(point) for c in self.constraints)

    def substitute(self, var: str, repl: LinExpr) -> "Polyhedron":
        return Polyhedron(c.substitute(var, repl) for c in self.constraints)

    def is_true(self) -> bool:
        return all(c.is_trivially_true() for c in self.constraints)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polyhedron):
            return NotImplemented
        return self.constraints == other.constraints

    def __hash__(self) -> int:
        return hash(self.constraints)

    def __repr__(self) -> str:
        return f"Polyhedron([{', '.join(map(str, self.constraints))}])"

    def __str__(self) -> str:
        if not self.constraints:
            return "true"
        return " and ".join(map(str, self.constraints))


class ParamLinExpr:
    """Affine form over program variables whose coefficients are affine in unknowns.

    Used for templates: ``sum(coeff[v](u) * v) + const(u)`` where each
    coefficient is a :class:`LinExpr` over unknown names.
    """

    __slots__ = ("_coeffs", "const")

    def __init__(self, coeffs: Mapping[str, LinExpr] | None = None, const: LinExpr | None = None):
        self._coeffs = {v: c for v, c in (coeffs or {}).items() if not c.is_zero()}
        self.const = const if const is not None else LinExpr()

    @classmethod
    def from_linexpr(cls, e: LinExpr) -> "ParamLinExpr":
        return cls({v: LinExpr.constant(c) for v, c in e.coeffs.items()}, LinExpr.constant(e.const))

    @property
    def coeffs(self) -> Mapping[str, LinExpr]:
        return self._coeffs

    def coeff(self, var: str) -> LinExpr:
        return self._coeffs.get(var, LinExpr())

    def variables(self) -> frozenset[str]:
        return frozenset(self._coeffs)

    def __add__(self, other) -> "ParamLinExpr":
        if isinstance(other, LinExpr):
            other = ParamLinExpr.from_linexpr(other)
        out = dict(self._coeffs)
        for v, c in other._coeffs.items():
            out[v] = out[v] + c if v in out else c
        return ParamLinExpr(out, self.const + other.const)

    def __neg__(self) -> "ParamLinExpr":
        return ParamLinExpr({v: -c for v, c in self._coeffs.items()}, -self.const)

    def __sub__(self, other) -> "ParamLinExpr":
        if isinstance(other, LinExpr):
            other = ParamLinExpr.from_linexpr(other)
        return self + (-other)

    def __mul__(self, k) -> "ParamLinExpr":
        k = frac(k)
        return ParamLinExpr({v: c * k for v, c in self._coeffs.items()}, self.const * k)

    __rmul__ = __mul__

    def add_const(self, e: LinExpr) -> "ParamLinExpr":
        return ParamLinExpr(self._coeffs, self.const + e)

    def substitute(self, var: str, repl: LinExpr) -> "ParamLinExpr":
        """Replace program variable ``var`` by a numeric affine ``repl``."""
        c = self._coeffs.get(var)
        if c is None:
            return self
        out = {v: cv for v, cv in self._coeffs.items() if v != var}
        for v, r in repl.coeffs.items():
            term = c * r
            out[v] = out[v] + term if v in out else term
        return ParamLinExpr(out, self.const + c * repl.const)

    def drop(self, var: str) -> "ParamLinExpr":
        return ParamLinExpr({v: c for v, c in self._coeffs.items() if v != var}, self.const)

    def instantiate(self, assignment: Mapping[str, Number]) -> LinExpr:
        def val(e: LinExpr) -> Fraction:
            total = e.const
            for u, c in e.coeffs.items():
                total += c * assignment.get(u, ZERO)
            return total

        return LinExpr({v: val(c) for v, c in self._coeffs.items()}, val(self.const))

    def unknowns(self) -> frozenset[str]:
        out = set(self.const.variables())
        for c in self._coeffs.values():
            out |= c.variables()
        return frozenset(out)

    def __repr__(self) -> str:
        body = " + ".join(f"({c})*{v}" for v, c in self._coeffs.items())
        return f"ParamLinExpr({body} + ({self.const}))"
