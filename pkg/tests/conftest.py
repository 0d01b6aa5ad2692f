import pathlib
from importlib import resources

import pytest

from lexrsm.frontend import attach_invariants, lower, lower_full, parse, parse_annotations

PROGRAMS = pathlib.Path(str(resources.files("lexrsm") / "programs"))
DATA = pathlib.Path(str(resources.files("lexrsm") / "data"))
CORPUS = pathlib.Path(str(resources.files("lexrsm") / "corpus"))


def program_text(name: str) -> str:
    return (PROGRAMS / name).read_text()


@pytest.fixture(scope="session")
def fig2():
    """fig2 with its invariant annotations attached as written."""
    g = lower(parse(program_text("fig2.pp")))
    inv = attach_invariants(g, parse_annotations(program_text("fig2.inv")))
    return g, inv


@pytest.fixture(scope="session")
def fig4_lowered():
    return lower_full(parse(program_text("fig4.pp")))


from hypothesis import settings  # noqa: E402

settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[0]), k)):
        ok, detail = ACCEPTANCE[key]
        label = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        terminalreporter.write_line(f"criterion {key}: {label}  {detail}")
