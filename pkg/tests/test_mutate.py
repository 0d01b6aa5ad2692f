import pytest

from lexrsm import bench
from lexrsm.frontend import parse
from lexrsm.frontend.ast import If, Prob, While
from lexrsm.mutate import is_probabilistic, main, mutate
from lexrsm.pcfg import Uniform
from conftest import CORPUS

BASES = sorted(p for p in CORPUS.glob("*.pp")
               if not p.stem.endswith(("_pl", "_pa")) and not is_probabilistic(parse(p.read_text())))


def test_pl_wraps_loop_body():
    out = parse(mutate("x := 0; while x < 10 do x := x + 1 od", "pl"))
    loop = out.body[1]
    assert isinstance(loop, While)
    (inner,) = loop.body
    assert isinstance(inner, If) and isinstance(inner.cond, Prob) and inner.cond.p == 0.5


def test_pa_randomises_in_loop_increments_only():
    out = parse(mutate("x := 3; while x < 10 do x := x + 2; y := x od", "pa"))
    assert out.body[0].rand is None  # initialisation untouched
    stmts = out.body[1].body[0].then
    assert stmts[0].rand == Uniform(1, 3)
    assert stmts[1].rand is None  # no constant to perturb


def test_unknown_mode():
    with pytest.raises(ValueError):
        mutate("skip", "xx")


@pytest.mark.parametrize("base", BASES, ids=lambda p: p.stem)
def test_shipped_variants_are_script_output(base):
    for mode in ("pl", "pa"):
        variant = base.with_name(f"{base.stem}_{mode}.pp")
        assert variant.exists()
        assert parse(variant.read_text()) == parse(mutate(base.read_text(), mode))


def test_variant_flags():
    for base in BASES:
        pl = bench.program_flags(parse(base.with_name(base.stem + "_pl.pp").read_text()))
        pa = bench.program_flags(parse(base.with_name(base.stem + "_pa.pp").read_text()))
        assert pl[0] and not pl[1]
        assert pa[0]


def test_main_writes_mutants_and_skips_probabilistic(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    (src / "a.pp").write_text("x := 0; while x < 3 do x := x + 1 od")
    (src / "b.pp").write_text("while x > 0 do if prob(1/2) then x := x - 1 else skip fi od")
    out = tmp_path / "out"
    assert main([str(src), str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["a.pp", "a_pa.pp", "a_pl.pp", "b.pp"]
    # re-running in place adds nothing new
    assert main([str(out), str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["a.pp", "a_pa.pp", "a_pl.pp", "b.pp"]
