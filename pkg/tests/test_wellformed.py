"""Per-backend well-formedness: accepting and rejecting corpora.

Accepting programs go through the whole pipeline. Rejecting programs either
go through the pipeline (rule violations that survive lifting and
normalization) or are checked directly against one backend's judgment on
the typechecked source (violations the front-end passes would rewrite
away, such as a literal `match` in a loop's function position).
"""

import pytest

from pmx import Diagnostics, compile_source, symbolize, typecheck
from pmx.parser import parse
from pmx.wellformed import check_cuda, check_futhark

from corpus import CORPUS

# Well-formed programs: the full mode-equivalence corpus compiles cleanly.
ACCEPTING: list[tuple[str, str]] = [(name, src) for name, src, _ in CORPUS]

# (name, source, expected rule). Names prefixed "direct-cu"/"direct-fut" are
# checked against that backend's judgment without lifting/normalization.
REJECTING: list[tuple[str, str, str]] = [
    ("effectful-print", """
let f = lam s. let u = print "x" in reduce addi 0 s in
let r = accelerate (f [1]) in print (int2string r)
""", "WF-EX-Builtin"),

    ("tensor-in-functional", """
let t = tensorCreate [2] (lam i. 1) in
let f = lam u. reduce addi 0 (map (lam i. tensorGet t [i]) [0, 1]) in
let r = accelerate (f {}) in print (int2string r)
""", "WF-TF-Tensor"),

    ("partial-app-cuda", """
let t = tensorCreate [2] (lam i. 0) in
let f = lam tt.
  let g = addi 1 in
  let u = loop 2 (lam i. tensorSet tt [i] (g i)) in
  tensorGet tt [0]
in
let r = accelerate (f t) in print (int2string r)
""", "WF-EC-App"),

    ("partial-app-functional", """
let f = lam s.
  let g = addi 1 in
  reduce addi 0 (map (lam x. g x) s)
in
let r = accelerate (f [1, 2]) in print (int2string r)
""", "WF-EF-HOF"),

    ("function-param-cuda", """
let t = tensorCreate [2] (lam i. 0) in
let twice = lam g. lam x. g (g x) in
let f = lam tt.
  let u = loop 2 (lam i. tensorSet tt [i] (twice (addi 1) i)) in
  tensorGet tt [0]
in
let r = accelerate (f t) in print (int2string r)
""", "WF-BC-2"),

    ("function-alias-cuda", """
let t = tensorCreate [2] (lam i. 0) in
let inc = lam x. addi x 1 in
let f = lam tt.
  let g = inc in
  let u = loop 2 (lam i. tensorSet tt [i] (g i)) in
  tensorGet tt [0]
in
let r = accelerate (f t) in print (int2string r)
""", "WF-BC-1"),

    ("match-returns-function", """
let inc = lam x. addi x 1 in
let dec = lam x. subi x 1 in
let f = lam s. lam flag.
  let pick = match flag with true then inc else dec in
  reduce addi 0 (map (lam x. pick x) s)
in
let r = accelerate (f [1, 2] true) in print (int2string r)
""", "WF-EX-Match"),

    ("sequence-of-functions", """
let inc = lam x. addi x 1 in
let dec = lam x. subi x 1 in
let f = lam s.
  let fs = [inc, dec] in
  reduce addi 0 (map (lam x. get fs 0 x) s)
in
let r = accelerate (f [1, 2]) in print (int2string r)
""", "WF-TX-Seq"),

    ("record-of-functions", """
let inc = lam x. addi x 1 in
let f = lam s.
  let box = {fn = inc} in
  reduce addi 0 (map (lam x. box.fn x) s)
in
let r = accelerate (f [1, 2]) in print (int2string r)
""", "WF-TX-Rec"),

    ("function-param-functional", """
let twice = lam g. lam x. g (g x) in
let f = lam s. map (lam x. twice (addi 1) x) s in
let r = accelerate (f [1, 2]) in
print (int2string (reduce addi 0 r))
""", "WF-EF-HOF"),

    ("direct-cu-loop-match", """
let inc = lam i. {} in
let f = lam c.
  loop 2 (match c with true then inc else inc)
in
f true
""", "WF-EC-Loop"),

    ("direct-fut-seq-of-arrow-type", """
let mk = lam n. create n (lam i. addi i) in
length (mk 3)
""", "WF-TX-Seq"),
]


def rejection_rules(name: str, source: str) -> set[str]:
    """The set of rule names the checker reports for a rejecting program."""
    if name.startswith("direct-"):
        ast = typecheck(symbolize(parse(source)))
        check = check_cuda if name.startswith("direct-cu") else check_futhark
        return {d.rule for d in check(ast) if d.rule}
    try:
        compile_source(source)
    except Diagnostics as diags:
        return {d.rule for d in diags.items if d.rule}
    return set()


@pytest.mark.parametrize("name,source", ACCEPTING,
                         ids=[c[0] for c in ACCEPTING])
def test_accepting(name, source):
    compile_source(source)  # must not raise


@pytest.mark.parametrize("name,source,rule", REJECTING,
                         ids=[c[0] for c in REJECTING])
def test_rejecting(name, source, rule):
    rules = rejection_rules(name, source)
    assert rule in rules, f"got {rules or 'no rejection'}"
