"""JSON (de)serialization of certificates.

Rationals are stored as ``[numerator, denominator]`` integer pairs; each
location's component is a map from variable name (``"1"`` for the
constant term) to such a pair.
"""
from __future__ import annotations

import json
from fractions import Fraction
from typing import Any

from .linear import LinExpr
from .pcfg import MeasurableMap
from .synthesis import Certificate, Strategy

CONST_KEY = "1"


def rat(q: Fraction) -> list[int]:
    return [q.numerator, q.denominator]


def unrat(pair) -> Fraction:
    if isinstance(pair, (list, tuple)) and len(pair) == 2:
        return Fraction(int(pair[0]), int(pair[1]))
    if isinstance(pair, (int, str)):
        return Fraction(pair)
    raise ValueError(f"not a rational: {pair!r}")


def expr_to_json(e: LinExpr) -> dict[str, list[int]]:
    out = {v: rat(c) for v, c in sorted(e.coeffs.items())}
    if e.const:
        out[CONST_KEY] = rat(e.const)
    return out


def expr_from_json(d: dict) -> LinExpr:
    coeffs = {v: unrat(p) for v, p in d.items() if v != CONST_KEY}
    return LinExpr(coeffs, unrat(d.get(CONST_KEY, [0, 1])))


def certificate_to_json(cert: Certificate) -> dict[str, Any]:
    return {
        "dimension": cert.dimension,
        "eta": {loc: [expr_to_json(e) for e in vec] for loc, vec in cert.eta.exprs.items()},
        "level_map": dict(cert.lv),
        "branch": {str(k): v for k, v in sorted(cert.branch.items())},
        "ranked": {str(k): list(v) for k, v in sorted(cert.ranked.items())},
        "strategy": cert.strategy.value if cert.strategy else None,
        "c": rat(cert.c),
        "timings": {k: round(v, 6) for k, v in cert.timings.items()},
    }


def certificate_from_json(doc: dict[str, Any]) -> Certificate:
    dim = int(doc["dimension"])
    exprs = {loc: tuple(expr_from_json(e) for e in vec) for loc, vec in doc["eta"].items()}
    strategy = Strategy.parse(doc["strategy"]) if doc.get("strategy") else None
    return Certificate(
        MeasurableMap(dim, exprs),
        {k: int(v) for k, v in doc["level_map"].items()},
        {int(k): v for k, v in doc.get("branch", {}).items()},
        {int(k): tuple(v) for k, v in doc.get("ranked", {}).items()},
        strategy,
        unrat(doc.get("c", [1, 1])),
        dict(doc.get("timings", {})),
    )


def dump_certificate(cert: Certificate, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(certificate_to_json(cert), fh, indent=2, sort_keys=False)
        fh.write("\n")


def load_certificate(path) -> Certificate:
    with open(path, encoding="utf-8") as fh:
        return certificate_from_json(json.load(fh))
