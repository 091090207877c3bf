"""Free variables and extraction of the bindings needed by a set of names.

Extraction walks the top-level let spine bottom-up and keeps exactly the
bindings transitively required by the requested identifiers, preserving
their original order and never duplicating a binding. The extracted program
is terminated by the unit literal `{}`.
"""

from __future__ import annotations

from .syntax import (
    Expr, Lam, Let, Match, Name, RecLets, children, pattern_names, unit_expr,
)


def free_vars(e: Expr) -> set[Name]:
    """The set of variable names occurring free in e (e must be symbolized)."""
    from .syntax import Var

    def go(e: Expr, bound: set[Name], out: set[Name]) -> None:
        if isinstance(e, Var):
            if e.name not in bound:
                out.add(e.name)
            return
        if isinstance(e, Lam):
            go(e.body, bound | {e.param}, out)
            return
        if isinstance(e, Let):
            go(e.value, bound, out)
            go(e.body, bound | {e.name}, out)
            return
        if isinstance(e, RecLets):
            inner = bound | {b.name for b in e.bindings}
            for b in e.bindings:
                go(b.value, inner, out)
            go(e.body, inner, out)
            return
        if isinstance(e, Match):
            go(e.scrut, bound, out)
            go(e.thn, bound | set(pattern_names(e.pat)), out)
            go(e.els, bound, out)
            return
        for c in children(e):
            go(c, bound, out)

    out: set[Name] = set()
    go(e, set(), out)
    return out


def extract(idents: set[Name], e: Expr) -> tuple[set[Name], Expr]:
    """Extract the top-level bindings transitively required by `idents`.

    Returns (all extracted binding names plus their free variables, the
    extracted program). Bindings keep their original relative order.
    """
    if isinstance(e, RecLets):
        inner_ids, inner = extract(idents, e.body)
        group = {b.name for b in e.bindings}
        keep = group & inner_ids
        # Fixpoint closure over the group's internal dependency edges.
        bodies = {b.name: free_vars(b.value) for b in e.bindings}
        changed = True
        while changed:
            changed = False
            for x in list(keep):
                new = bodies[x] & group
                if not new <= keep:
                    keep |= new
                    changed = True
        out_ids = set(inner_ids) | keep
        for x in keep:
            out_ids |= bodies[x]
        kept = [b for b in e.bindings if b.name in keep]
        if kept:
            return out_ids, RecLets(kept, inner, span=e.span, ty=inner.ty)
        return out_ids, inner
    if isinstance(e, Let):
        inner_ids, inner = extract(idents, e.body)
        if e.name in inner_ids:
            out_ids = set(inner_ids) | free_vars(e.value)
            return out_ids, Let(e.name, e.annot, e.value, inner,
                                span=e.span, ty=inner.ty)
        return inner_ids, inner
    return set(idents), unit_expr()
