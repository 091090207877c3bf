import pytest

from pmx import Diagnostics, alpha_eq, parse, pretty, symbolize

from corpus import CORPUS


@pytest.mark.parametrize("name,source,_", CORPUS, ids=[c[0] for c in CORPUS])
def test_pretty_roundtrip(name, source, _):
    ast = symbolize(parse(source))
    again = symbolize(parse(pretty(ast)))
    assert alpha_eq(ast, again)


def test_literals():
    from pmx.syntax import CChar, CFloat, CInt, ConstE, SeqE
    assert parse("42").const == CInt(42)
    assert parse("-7").const == CInt(-7)
    assert parse("3.5").const == CFloat(3.5)
    assert parse("-2.5e3").const == CFloat(-2500.0)
    assert parse("1e2").const == CFloat(100.0)
    assert parse("'a'").const == CChar("a")
    assert parse(r"'\n'").const == CChar("\n")
    hello = parse('"hi"')
    assert isinstance(hello, SeqE)
    assert [c.const.value for c in hello.items] == ["h", "i"]


def test_comments_and_projection():
    src = """
-- a comment
let r = {x = 1, y = 2} in  -- trailing comment
r.x
"""
    from pmx import run_source
    assert run_source(src, capture_output=True).value == 1


def test_application_binds_tighter_than_combinators():
    from pmx.syntax import MapE, App
    e = parse("map f xs ys")
    # map takes two atoms; the rest continues as application
    assert isinstance(e, App) and isinstance(e.fn, MapE)


def test_type_annotations():
    src = ("let f : Int -> Int = lam x : Int. x in "
           "let s : [{a: Int}] = [{a = 1}] in "
           "let t : Tensor[Float] = tensorCreate [1] (lam i. 0.0) in "
           "f 1")
    from pmx import run_source
    assert run_source(src, capture_output=True).value == 1


@pytest.mark.parametrize("bad", [
    "let x = in x",
    "lam . x",
    "match x with then 1 else 2",
    "{x = 1, x = 2}",
    "let x = 1",
    "1 2 )",
    "()",
    '"unterminated',
])
def test_parse_errors(bad):
    with pytest.raises(Diagnostics) as exc:
        parse(bad)
    assert all(d.kind == "ParseError" for d in exc.value.items)


def test_unbound_and_duplicate_pattern_vars():
    with pytest.raises(Diagnostics, match="unbound variable"):
        symbolize(parse("x"))
    with pytest.raises(Diagnostics, match="duplicate variable"):
        symbolize(parse("match {a = 1, b = 2} with {a = x, b = x} "
                        "then x else 0"))


def test_symbolize_freshens_all_binders():
    ast = symbolize(parse("let x = 1 in let x = 2 in x"))
    assert ast.name.uid != ast.body.name.uid
    assert ast.body.body.name == ast.body.name
