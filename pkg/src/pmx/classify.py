"""Backend classification of accelerate bindings.

Each accelerate binding is classified by counting the parallel constructs
reachable from it: map/map2/reduce/flatten select the functional backend,
loop selects the CUDA backend, a mix is invalid and no parallel construct
at all defeats the purpose of accelerating.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .extraction import extract, free_vars
from .syntax import (
    Diagnostic, Diagnostics, Expr, Let, Name, PARALLEL_CU, PARALLEL_FUT,
    RecLets, walk,
)
from .transform import AccelSet


class Classification(enum.Enum):
    ANY = "Any"
    FUTHARK = "Futhark"
    CUDA = "CUDA"
    INVALID = "Invalid"


def count_futhark_exprs(e: Expr) -> int:
    """Occurrences of map/map2/reduce/flatten among all subexpressions."""
    return sum(1 for node in walk(e) if isinstance(node, PARALLEL_FUT))


def count_cuda_exprs(e: Expr) -> int:
    """Occurrences of loop among all subexpressions."""
    return sum(1 for node in walk(e) if isinstance(node, PARALLEL_CU))


def top_level_bindings(e: Expr) -> dict[Name, Expr]:
    """The top-level let spine of a lifted program, name -> bound value."""
    out: dict[Name, Expr] = {}
    while True:
        if isinstance(e, Let):
            out[e.name] = e.value
            e = e.body
        elif isinstance(e, RecLets):
            for b in e.bindings:
                out[b.name] = b.value
            e = e.body
        else:
            return out


def _count_transitive(x: Name, bodies: dict[Name, Expr], count) -> int:
    """Counts parallel constructs in x and the bindings it reaches, each once."""

    def go(x: Name, visited: set[Name]) -> int:
        if x in visited or x not in bodies:
            return 0
        body = bodies[x]
        total = count(body)
        for y in free_vars(body):
            total += go(y, visited | {x})
        return total

    return go(x, set())


def classify_binding(x: Name, bodies: dict[Name, Expr]) -> Classification:
    p_fut = _count_transitive(x, bodies, count_futhark_exprs)
    p_cu = _count_transitive(x, bodies, count_cuda_exprs)
    if p_fut == 0 and p_cu == 0:
        return Classification.ANY
    if p_fut > 0 and p_cu == 0:
        return Classification.FUTHARK
    if p_fut == 0 and p_cu > 0:
        return Classification.CUDA
    return Classification.INVALID


@dataclass
class BackendSplit:
    fut_idents: set[Name]
    cu_idents: set[Name]
    fut_program: Expr
    cu_program: Expr
    verdicts: dict[Name, Classification]
    counts: dict[Name, tuple[int, int]] = field(default_factory=dict)


def split_backends(accel: AccelSet, e_acc: Expr) -> BackendSplit:
    """Split the extracted accelerated code into per-backend programs.

    Raises Diagnostics if any accelerate binding is Any or Invalid; all
    offending bindings are reported in one batch.
    """
    bodies = top_level_bindings(e_acc)
    verdicts: dict[Name, Classification] = {}
    counts: dict[Name, tuple[int, int]] = {}
    errors: list[Diagnostic] = []
    for a in sorted(accel, key=lambda n: n.uid):
        p_fut = _count_transitive(a, bodies, count_futhark_exprs)
        p_cu = _count_transitive(a, bodies, count_cuda_exprs)
        counts[a] = (p_fut, p_cu)
        verdicts[a] = classify_binding(a, bodies)
        span = bodies[a].span if a in bodies else None
        if verdicts[a] is Classification.ANY:
            errors.append(Diagnostic(
                "ClassifyError",
                f"accelerate binding {a.text} does not use any parallel expressions",
                span or e_acc.span))
        elif verdicts[a] is Classification.INVALID:
            errors.append(Diagnostic(
                "ClassifyError",
                f"accelerate binding {a.text} uses parallel expressions unique "
                "to both backends",
                span or e_acc.span))
    if errors:
        raise Diagnostics(errors)
    fut_idents = {a for a in accel if verdicts[a] is Classification.FUTHARK}
    cu_idents = {a for a in accel if verdicts[a] is Classification.CUDA}
    _, e_fut = extract(fut_idents, e_acc)
    _, e_cu = extract(cu_idents, e_acc)
    split = BackendSplit(fut_idents, cu_idents, e_fut, e_cu, verdicts, counts)
    _assert_split_sound(split)
    return split


def _assert_split_sound(split: BackendSplit) -> None:
    for name, body in top_level_bindings(split.fut_program).items():
        assert count_cuda_exprs(body) == 0, \
            f"loop construct leaked into functional backend via {name}"
    for name, body in top_level_bindings(split.cu_program).items():
        assert count_futhark_exprs(body) == 0, \
            f"functional combinator leaked into CUDA backend via {name}"
