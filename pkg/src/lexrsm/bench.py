"""Benchmark harness: every strategy on every corpus program.

A corpus is a directory of ``.pp`` programs.  Invariant hints for
``NAME.pp``, ``NAME_pl.pp`` and ``NAME_pa.pp`` are read from ``NAME.inv``
(or from a variant's own ``.inv`` when present) and closed under the
program's transitions by :func:`lexrsm.invariants.infer_invariants`.
An optional ``expected.json`` holds reference rows to compare against.

Cells run in a process pool sized by ``LEXRSM_THREADS`` (default: CPU
count); results are reported in corpus order.
"""
from __future__ import annotations

import concurrent.futures as cf
import csv
import io
import json
import os
import pathlib
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Optional, Sequence

from .checker import check_certificate
from .frontend import Lowered, Program, lower_full, parse, parse_annotations
from .frontend.ast import Assign, If, NdetRange, Prob, While
from .frontend.lower import conjunction
from .invariants import infer_invariants
from .linear import Polyhedron
from .mutate import MODES
from .synthesis import Strategy, matching_flavor, synthesize

STRATEGIES = (Strategy.STR, Strategy.LWN, Strategy.SMC, Strategy.EMC)
DEFAULT_TIMEOUT = 60.0
FAIL, TIMEOUT, ERROR = "x", "TO", "ERR"


class InputError(ValueError):
    """Unreadable program or invariant file."""


@dataclass
class Model:
    program: Program
    lowered: Lowered
    inv: dict
    lost: dict  # location -> annotated atoms that were not inductive

    @property
    def pcfg(self):
        return self.lowered.pcfg


def model_name(path: pathlib.Path) -> str:
    stem = path.stem
    for m in MODES:
        if stem.endswith("_" + m):
            return stem[: -len(m) - 1]
    return stem


def find_inv(path: pathlib.Path) -> Optional[pathlib.Path]:
    for cand in (path.with_suffix(".inv"), path.with_name(model_name(path) + ".inv")):
        if cand.exists():
            return cand
    return None


def load_model(path, inv_path=None, infer: bool = True, permissive: bool = False) -> Model:
    """Parse, lower and attach invariants.

    With ``infer`` the annotated atoms seed an inductive-invariant search;
    otherwise they are attached verbatim (the caller should audit them).
    ``permissive`` admits parametrized probabilities (simulation only).
    """
    from .frontend import attach_invariants

    path = pathlib.Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None
    try:
        program = parse(text, permissive)
        lowered = lower_full(program)
    except ValueError as e:
        raise InputError(f"{path}: {e}") from None
    raw = {}
    if inv_path is not None:
        try:
            raw = parse_annotations(pathlib.Path(inv_path).read_text())
        except OSError as e:
            raise InputError(f"cannot read {inv_path}: {e.strerror}") from None
        except ValueError as e:
            raise InputError(f"{inv_path}: {e}") from None
    pcfg = lowered.pcfg
    try:
        if not infer:
            return Model(program, lowered, attach_invariants(pcfg, raw, lowered.loop_invariants), {})
        ann: dict[str, Polyhedron] = {}
        for label, cond in raw.items():
            if label not in pcfg.locations:
                raise InputError(f"{inv_path}: unknown location label {label!r}")
            poly = conjunction(cond)
            unknown = poly.variables() - set(pcfg.variables)
            if unknown:
                raise InputError(f"{inv_path}: unknown variables {sorted(unknown)} at {label}")
            ann[label] = poly
    except ValueError as e:
        if isinstance(e, InputError):
            raise
        raise InputError(f"{inv_path}: {e}") from None
    inv, lost = infer_invariants(pcfg, ann, lowered.loop_invariants)
    return Model(program, lowered, inv, lost)


def program_flags(program: Program) -> tuple[bool, bool]:
    """(probabilistic loop, probabilistic assignment) flags of a program."""
    prob_loop = prob_assign = False

    def walk(stmts, in_loop):
        nonlocal prob_loop, prob_assign
        for s in stmts:
            if isinstance(s, Assign):
                prob_assign |= s.rand is not None and not isinstance(s.rand, NdetRange)
            elif isinstance(s, If):
                if isinstance(s.cond, Prob) and in_loop:
                    prob_loop = True
                walk(s.then, in_loop)
                walk(s.orelse, in_loop)
            elif isinstance(s, While):
                walk(s.body, True)

    walk(program.body, False)
    return prob_loop, prob_assign


@dataclass
class Cell:
    outcome: str  # dimension as text, or FAIL / TIMEOUT / ERROR
    seconds: float
    checked: Optional[bool] = None  # certificate re-validated by the checker
    unranked: tuple = ()
    message: str = ""

    @property
    def success(self) -> bool:
        return self.outcome.isdigit()


@dataclass
class BenchRow:
    name: str
    model: str
    prob_loop: bool
    prob_assign: bool
    cells: dict = field(default_factory=dict)  # strategy value -> Cell
    lost_invariants: dict = field(default_factory=dict)

    def outcomes(self) -> list[str]:
        return [self.cells[s.value].outcome for s in STRATEGIES]


def run_cell(path: str, inv_path: Optional[str], strategy: str, timeout: float,
             c=1, max_dim: Optional[int] = None) -> Cell:
    t0 = time.perf_counter()
    try:
        model = load_model(path, inv_path)
        strat = Strategy.parse(strategy)
        res = synthesize(model.pcfg, model.inv, strat, c=c, max_dim=max_dim, deadline=t0 + timeout)
    except TimeoutError:
        return Cell(TIMEOUT, time.perf_counter() - t0)
    except Exception as e:  # reported in the table, never silently dropped
        return Cell(ERROR, time.perf_counter() - t0, message=f"{type(e).__name__}: {e}")
    dt = time.perf_counter() - t0
    if not res:
        return Cell(FAIL, dt, unranked=tuple(res.unranked))
    verdict = check_certificate(model.pcfg, model.inv, res.eta, res.lv, matching_flavor(strat), c=c)
    return Cell(str(res.dimension), dt, checked=verdict.ok)


def _call(args):
    return run_cell(*args)


def discover(corpus) -> list[pathlib.Path]:
    root = pathlib.Path(corpus)
    if not root.is_dir():
        raise InputError(f"not a directory: {root}")
    files = list(root.glob("*.pp"))
    if not files:
        raise InputError(f"no .pp programs in {root}")
    order = {"": 0, **{m: i + 1 for i, m in enumerate(MODES)}}

    def key(p: pathlib.Path):
        suffix = p.stem[len(model_name(p)) + 1:]
        return (model_name(p).lower(), order.get(suffix, 9), p.name)

    return sorted(files, key=key)


def default_corpus() -> pathlib.Path:
    return pathlib.Path(str(resources.files("lexrsm") / "corpus"))


def pool_size() -> int:
    raw = os.environ.get("LEXRSM_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise InputError(f"LEXRSM_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def run_bench(corpus=None, timeout: float = DEFAULT_TIMEOUT, strategies: Sequence[Strategy] = STRATEGIES,
              only: Optional[Sequence[str]] = None, workers: Optional[int] = None,
              progress=None) -> list[BenchRow]:
    files = discover(corpus or default_corpus())
    if only:
        files = [f for f in files if f.stem in only or model_name(f) in only]
    rows: list[BenchRow] = []
    jobs = []
    for f in files:
        inv = find_inv(f)
        model = load_model(f, inv)
        pl, pa = program_flags(model.program)
        rows.append(BenchRow(f.stem, model_name(f), pl, pa,
                             lost_invariants={k: [str(a) for a in v] for k, v in model.lost.items()}))
        for s in strategies:
            jobs.append((len(rows) - 1, s.value, (str(f), str(inv) if inv else None, s.value, timeout)))
    workers = workers or pool_size()
    if workers <= 1:
        for i, sv, args in jobs:
            rows[i].cells[sv] = run_cell(*args)
            if progress:
                progress(rows[i], sv)
    else:
        with cf.ProcessPoolExecutor(max_workers=workers) as ex:
            futs = {ex.submit(_call, args): (i, sv) for i, sv, args in jobs}
            for fut in cf.as_completed(futs):
                i, sv = futs[fut]
                rows[i].cells[sv] = fut.result()
                if progress:
                    progress(rows[i], sv)
    for r in rows:
        for s in STRATEGIES:
            r.cells.setdefault(s.value, Cell("-", 0.0))
    return rows


# --- audits and reports -------------------------------------------------------

def monotonicity_violations(rows: Sequence[BenchRow]) -> list[str]:
    """Rows where a weaker strategy succeeds but a stronger one does not."""
    out = []
    for r in rows:
        ok = [r.cells[s.value].success for s in STRATEGIES]
        ran = [r.cells[s.value].outcome not in ("-", TIMEOUT, ERROR) for s in STRATEGIES]
        for a in range(len(STRATEGIES) - 1):
            b = a + 1
            if ok[a] and ran[b] and not ok[b]:
                out.append(f"{r.name}: {STRATEGIES[a].name} succeeds but {STRATEGIES[b].name} fails")
    return out


def roundtrip_failures(rows: Sequence[BenchRow]) -> list[str]:
    return [f"{r.name}/{s}" for r in rows for s, c in r.cells.items() if c.success and not c.checked]


def load_expected(corpus) -> dict:
    path = pathlib.Path(corpus or default_corpus()) / "expected.json"
    if not path.exists():
        return {}
    return json.loads(path.read_text())


def _mark(flag: bool) -> str:
    return "Y" if flag else "-"


def success_counts(rows: Sequence[BenchRow]) -> dict[str, int]:
    return {s.name: sum(r.cells[s.value].success for r in rows) for s in STRATEGIES}


def to_markdown(rows: Sequence[BenchRow], expected: Optional[dict] = None) -> str:
    expected = expected or {}
    head = ["Benchmark", "p.l.", "p.a."] + [s.name for s in STRATEGIES]
    if expected:
        head += ["reference", "match"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for r in rows:
        cells = [r.name, _mark(r.prob_loop), _mark(r.prob_assign)] + r.outcomes()
        if expected:
            ref = expected.get(r.name)
            cells += [", ".join(ref) if ref else "", compare(r, ref) if ref else ""]
        lines.append("| " + " | ".join(cells) + " |")
    counts = success_counts(rows)
    lines.append("")
    lines.append(f"Successes over {len(rows)} benchmarks: "
                 + ", ".join(f"{k} {v}" for k, v in counts.items()))
    mono = monotonicity_violations(rows)
    lines.append("Monotonicity audit (STR => LWN => SMC => EMC): "
                 + ("ok" if not mono else f"{len(mono)} violation(s): " + "; ".join(mono)))
    rt = roundtrip_failures(rows)
    lines.append("Checker round-trip: " + ("ok" if not rt else "failed for " + ", ".join(rt)))
    return "\n".join(lines) + "\n"


def to_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["benchmark", "model", "p.l.", "p.a."] + [s.name for s in STRATEGIES])
    for r in rows:
        w.writerow([r.name, r.model, int(r.prob_loop), int(r.prob_assign)] + r.outcomes())
    return buf.getvalue()


def to_json(rows: Sequence[BenchRow]) -> list[dict]:
    return [{"name": r.name, "model": r.model, "prob_loop": r.prob_loop, "prob_assign": r.prob_assign,
             "lost_invariants": r.lost_invariants,
             "cells": {k: {**asdict(c), "unranked": list(c.unranked)} for k, c in r.cells.items()}}
            for r in rows]


def compare(row: BenchRow, ref: Sequence[str]) -> str:
    """``exact``, ``pattern`` (same successes, dimensions within 1) or ``differs``.

    Reference cells marked N/A and methods that were not run are ignored.
    """
    pairs = [(g, e) for g, e in zip(row.outcomes(), ref) if e != "N/A" and g != "-"]
    if all(g == e for g, e in pairs):
        return "exact"
    for g, e in pairs:
        if e.isdigit() != g.isdigit():
            return "differs"
        if e.isdigit() and abs(int(e) - int(g)) > 1:
            return "differs"
    return "pattern"
