"""Renaming pass: gives every binder a globally unique uid.

Also provides alpha-equivalence, used by round-trip tests and golden checks.
"""

from __future__ import annotations

from .syntax import (
    Accelerate, App, ConstE, Diagnostic, Diagnostics, Expr, FlattenE, Lam,
    Let, LoopE, Map2E, MapE, Match, Name, Never, PConst, PRecord, PVar,
    Pattern, RecBinding, RecLets, RecordE, ReduceE, SeqE, Var, fresh_name,
)


def symbolize(e: Expr) -> Expr:
    """Return an alpha-equivalent copy of e where every binder is fresh."""
    errors: list[Diagnostic] = []

    def pat(p: Pattern, env: dict[str, Name], bound: set[str]) -> Pattern:
        if isinstance(p, PVar):
            if p.name.text in bound:
                errors.append(Diagnostic(
                    "ParseError",
                    f"duplicate variable {p.name.text} in pattern", p.span))
            bound.add(p.name.text)
            fresh = fresh_name(p.name.text)
            env[p.name.text] = fresh
            return PVar(fresh, span=p.span)
        if isinstance(p, PConst):
            return p
        if isinstance(p, PRecord):
            return PRecord([(l, pat(q, env, bound)) for l, q in p.fields],
                           span=p.span)
        raise AssertionError(p)

    def go(e: Expr, env: dict[str, Name]) -> Expr:
        if isinstance(e, Var):
            name = env.get(e.name.text)
            if name is None:
                errors.append(Diagnostic(
                    "ParseError", f"unbound variable {e.name.text}", e.span))
                return e
            return Var(name, span=e.span, ty=e.ty)
        if isinstance(e, ConstE) or isinstance(e, Never):
            return e
        if isinstance(e, App):
            return App(go(e.fn, env), go(e.arg, env), span=e.span, ty=e.ty)
        if isinstance(e, Lam):
            fresh = fresh_name(e.param.text)
            inner = {**env, e.param.text: fresh}
            return Lam(fresh, e.param_ty, go(e.body, inner), span=e.span, ty=e.ty)
        if isinstance(e, Let):
            value = go(e.value, env)
            fresh = fresh_name(e.name.text)
            inner = {**env, e.name.text: fresh}
            return Let(fresh, e.annot, value, go(e.body, inner),
                       span=e.span, ty=e.ty)
        if isinstance(e, RecLets):
            inner = dict(env)
            fresh_names = []
            for b in e.bindings:
                fresh = fresh_name(b.name.text)
                fresh_names.append(fresh)
                inner[b.name.text] = fresh
            bindings = [
                RecBinding(fresh, b.annot, go(b.value, inner), b.span)
                for fresh, b in zip(fresh_names, e.bindings)]
            return RecLets(bindings, go(e.body, inner), span=e.span, ty=e.ty)
        if isinstance(e, Match):
            scrut = go(e.scrut, env)
            inner = dict(env)
            p = pat(e.pat, inner, set())
            return Match(scrut, p, go(e.thn, inner), go(e.els, env),
                         span=e.span, ty=e.ty)
        if isinstance(e, RecordE):
            return RecordE([(l, go(v, env)) for l, v in e.fields],
                           span=e.span, ty=e.ty)
        if isinstance(e, SeqE):
            return SeqE([go(v, env) for v in e.items], span=e.span, ty=e.ty)
        if isinstance(e, Accelerate):
            return Accelerate(go(e.operand, env), span=e.span, ty=e.ty)
        if isinstance(e, MapE):
            return MapE(go(e.fn, env), go(e.seq, env), span=e.span, ty=e.ty)
        if isinstance(e, Map2E):
            return Map2E(go(e.fn, env), go(e.seq1, env), go(e.seq2, env),
                         span=e.span, ty=e.ty)
        if isinstance(e, ReduceE):
            return ReduceE(go(e.fn, env), go(e.acc, env), go(e.seq, env),
                           span=e.span, ty=e.ty)
        if isinstance(e, FlattenE):
            return FlattenE(go(e.seq, env), span=e.span, ty=e.ty)
        if isinstance(e, LoopE):
            return LoopE(go(e.count, env), go(e.fn, env), span=e.span, ty=e.ty)
        raise AssertionError(e)

    result = go(e, {})
    if errors:
        raise Diagnostics(errors)
    return result


def alpha_eq(a: Expr, b: Expr) -> bool:
    """Structural equality up to renaming of bound variables."""

    def pat_eq(p: Pattern, q: Pattern, env: dict[Name, Name]) -> bool:
        if isinstance(p, PVar) and isinstance(q, PVar):
            env[p.name] = q.name
            return True
        if isinstance(p, PConst) and isinstance(q, PConst):
            return p.const == q.const
        if isinstance(p, PRecord) and isinstance(q, PRecord):
            if [l for l, _ in p.fields] != [l for l, _ in q.fields]:
                return False
            return all(pat_eq(x, y, env)
                       for (_, x), (_, y) in zip(p.fields, q.fields))
        return False

    def go(a: Expr, b: Expr, env: dict[Name, Name]) -> bool:
        if type(a) is not type(b):
            return False
        if isinstance(a, Var):
            return env.get(a.name, a.name) == b.name or \
                (a.name not in env and a.name.text == b.name.text)
        if isinstance(a, ConstE):
            return a.const == b.const
        if isinstance(a, Never):
            return True
        if isinstance(a, Lam):
            env2 = {**env, a.param: b.param}
            return go(a.body, b.body, env2)
        if isinstance(a, Let):
            if not go(a.value, b.value, env):
                return False
            return go(a.body, b.body, {**env, a.name: b.name})
        if isinstance(a, RecLets):
            if len(a.bindings) != len(b.bindings):
                return False
            env2 = dict(env)
            for x, y in zip(a.bindings, b.bindings):
                env2[x.name] = y.name
            return all(go(x.value, y.value, env2)
                       for x, y in zip(a.bindings, b.bindings)) and \
                go(a.body, b.body, env2)
        if isinstance(a, Match):
            if not go(a.scrut, b.scrut, env):
                return False
            env2 = dict(env)
            if not pat_eq(a.pat, b.pat, env2):
                return False
            return go(a.thn, b.thn, env2) and go(a.els, b.els, env)
        if isinstance(a, RecordE):
            if [l for l, _ in a.fields] != [l for l, _ in b.fields]:
                return False
            return all(go(x, y, env)
                       for (_, x), (_, y) in zip(a.fields, b.fields))
        if isinstance(a, SeqE):
            return len(a.items) == len(b.items) and \
                all(go(x, y, env) for x, y in zip(a.items, b.items))
        if isinstance(a, App):
            return go(a.fn, b.fn, env) and go(a.arg, b.arg, env)
        if isinstance(a, Accelerate):
            return go(a.operand, b.operand, env)
        if isinstance(a, MapE):
            return go(a.fn, b.fn, env) and go(a.seq, b.seq, env)
        if isinstance(a, Map2E):
            return go(a.fn, b.fn, env) and go(a.seq1, b.seq1, env) and \
                go(a.seq2, b.seq2, env)
        if isinstance(a, ReduceE):
            return go(a.fn, b.fn, env) and go(a.acc, b.acc, env) and \
                go(a.seq, b.seq, env)
        if isinstance(a, FlattenE):
            return go(a.seq, b.seq, env)
        if isinstance(a, LoopE):
            return go(a.count, b.count, env) and go(a.fn, b.fn, env)
        raise AssertionError(a)

    return go(a, b, {})
