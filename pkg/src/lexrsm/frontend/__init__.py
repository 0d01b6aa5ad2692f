"""Program text to pCFG: parsing, lowering and invariant attachment."""
from .ast import Program, pretty
from .lower import Lowered, UnknownLocation, attach_invariants, dnf, lower, lower_full
from .parser import ParseError, parse, parse_annotations, parse_bexpr, parse_linexpr

__all__ = ["Program", "pretty", "Lowered", "UnknownLocation", "attach_invariants", "dnf",
           "lower", "lower_full", "ParseError", "parse", "parse_annotations", "parse_bexpr", "parse_linexpr"]
