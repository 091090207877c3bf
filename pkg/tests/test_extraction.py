from pmx import extract, free_vars, parse, symbolize
from pmx.classify import top_level_bindings
from pmx.syntax import RecordE


def program(src: str):
    ast = symbolize(parse(src))
    return ast, {n.text: n for n in top_level_bindings(ast)}


def kept_names(idents, ast):
    _, extracted = extract(idents, ast)
    return [n.text for n in top_level_bindings(extracted)], extracted


def test_free_vars():
    ast = symbolize(parse("let x = 1 in lam y. addi x y"))
    assert free_vars(ast) == set()
    assert {n.text for n in free_vars(ast.body)} == {"x"}


def test_extract_keeps_only_needed_in_order():
    ast, by = program("""
let p = 1 in
let q = addi p 1 in
let r = 3 in
let s = addi q r in
0
""")
    names, extracted = kept_names({by["q"]}, ast)
    assert names == ["p", "q"]
    e = extracted
    while hasattr(e, "body"):
        e = e.body
    assert isinstance(e, RecordE) and e.fields == []


def test_extract_empty_targets():
    ast, _ = program("let x = 1 in 0")
    names, extracted = kept_names(set(), ast)
    assert names == []
    assert isinstance(extracted, RecordE)


def test_extract_returns_needed_free_vars():
    ast, by = program("let x = 1 in let y = addi x 2 in 0")
    ids, _ = extract({by["y"]}, ast)
    assert {n.text for n in ids} == {"x", "y"}


def test_extract_recursive_group_fixpoint():
    ast, by = program("""
let base = 1 in
recursive let f = lam n. match n with 0 then base else g (subi n 1)
          let g = lam n. f n in
let unused = 9 in
0
""")
    names, _ = kept_names({by["f"]}, ast)
    assert sorted(names) == ["base", "f", "g"]


def test_extract_recursive_group_drops_unneeded_members():
    ast, by = program("""
recursive let f = lam n. n
          let g = lam n. n in
0
""")
    names, _ = kept_names({by["f"]}, ast)
    assert names == ["f"]


def test_extract_no_duplicates_with_shared_dep():
    ast, by = program("""
let h = 1 in
let f = addi h 1 in
let g = addi h 2 in
0
""")
    names, _ = kept_names({by["f"], by["g"]}, ast)
    assert names == ["h", "f", "g"]


def test_extract_idempotent():
    ast, by = program("""
let a0 = 1 in
let b0 = addi a0 1 in
let c0 = addi b0 a0 in
0
""")
    ids, extracted = extract({by["c0"]}, ast)
    ids2, extracted2 = extract({by["c0"]}, extracted)
    assert [n.text for n in top_level_bindings(extracted)] == \
        [n.text for n in top_level_bindings(extracted2)]
