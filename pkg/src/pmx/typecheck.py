"""Monomorphic unification-based type checking.

There is no polymorphism: builtins are instantiated per use site with fresh
unification variables, and all variables must be ground at the end of
inference (an unconstrained variable is an "ambiguous type" error).
"""

from __future__ import annotations

from typing import Optional

from .syntax import (
    Accelerate, App, CBool, CBuiltin, CChar, CFloat, CInt, ConstE, Diagnostic,
    Diagnostics, Expr, FlattenE, Lam, Let, LoopE, Map2E, MapE, Match, Name,
    Never, PConst, PRecord, PVar, Pattern, RecLets, RecordE, ReduceE, SeqE,
    Span, TArrow, TBool, TChar, TFloat, TInt, TRecord, TSeq, TTensor, TVar,
    Type, UNIT, Var, children, resolve, type_str, walk,
)

_INT = TInt()
_FLOAT = TFloat()
_BOOL = TBool()
_CHAR = TChar()
_STR = TSeq(_CHAR)


def _arrow(*tys: Type) -> Type:
    out = tys[-1]
    for t in reversed(tys[:-1]):
        out = TArrow(t, out)
    return out


def builtin_type(name: str) -> Type:
    """Instantiate the type scheme of a builtin with fresh variables."""
    int2 = _arrow(_INT, _INT, _INT)
    flt2 = _arrow(_FLOAT, _FLOAT, _FLOAT)
    icmp = _arrow(_INT, _INT, _BOOL)
    fcmp = _arrow(_FLOAT, _FLOAT, _BOOL)
    if name in ("addi", "subi", "muli", "divi", "modi"):
        return int2
    if name == "negi":
        return _arrow(_INT, _INT)
    if name in ("addf", "subf", "mulf", "divf"):
        return flt2
    if name == "negf":
        return _arrow(_FLOAT, _FLOAT)
    if name in ("eqi", "neqi", "lti", "gti", "leqi", "geqi"):
        return icmp
    if name in ("eqf", "ltf", "gtf", "leqf", "geqf"):
        return fcmp
    if name == "int2float":
        return _arrow(_INT, _FLOAT)
    if name == "floor":
        return _arrow(_FLOAT, _INT)
    if name in ("exp", "log", "sqrtf", "sin", "cos"):
        return _arrow(_FLOAT, _FLOAT)
    if name == "int2string":
        return _arrow(_INT, _STR)
    if name == "float2string":
        return _arrow(_FLOAT, _STR)
    if name == "create":
        a = TVar()
        return _arrow(_INT, _arrow(_INT, a), TSeq(a))
    if name == "length":
        return _arrow(TSeq(TVar()), _INT)
    if name == "get":
        a = TVar()
        return _arrow(TSeq(a), _INT, a)
    if name == "set":
        a = TVar()
        return _arrow(TSeq(a), _INT, a, TSeq(a))
    if name == "concat":
        a = TVar()
        return _arrow(TSeq(a), TSeq(a), TSeq(a))
    if name == "foldl":
        a, b = TVar(), TVar()
        return _arrow(_arrow(b, a, b), b, TSeq(a), b)
    if name == "reverse":
        a = TVar()
        return _arrow(TSeq(a), TSeq(a))
    if name == "tensorCreate":
        a = TVar()
        return _arrow(TSeq(_INT), _arrow(TSeq(_INT), a), TTensor(a))
    if name == "tensorGet":
        a = TVar()
        return _arrow(TTensor(a), TSeq(_INT), a)
    if name == "tensorSet":
        a = TVar()
        return _arrow(TTensor(a), TSeq(_INT), a, UNIT)
    if name == "tensorSub":
        a = TVar()
        return _arrow(TTensor(a), _INT, _INT, TTensor(a))
    if name == "tensorShape":
        return _arrow(TTensor(TVar()), TSeq(_INT))
    if name == "print":
        return _arrow(_STR, UNIT)
    if name == "readFile":
        return _arrow(_STR, _STR)
    if name == "writeFile":
        return _arrow(_STR, _STR, UNIT)
    raise AssertionError(f"unknown builtin {name}")


def const_type(c) -> Type:
    if isinstance(c, CInt):
        return _INT
    if isinstance(c, CFloat):
        return _FLOAT
    if isinstance(c, CBool):
        return _BOOL
    if isinstance(c, CChar):
        return _CHAR
    if isinstance(c, CBuiltin):
        return builtin_type(c.name)
    raise AssertionError(c)


def _occurs(v: TVar, ty: Type) -> bool:
    ty = resolve(ty)
    if ty is v:
        return True
    if isinstance(ty, TArrow):
        return _occurs(v, ty.param) or _occurs(v, ty.result)
    if isinstance(ty, TSeq) or isinstance(ty, TTensor):
        return _occurs(v, ty.elem)
    if isinstance(ty, TRecord):
        return any(_occurs(v, t) for _, t in ty.fields)
    return False


def unify(a: Type, b: Type, span: Span) -> None:
    a, b = resolve(a), resolve(b)
    if a is b:
        return
    if isinstance(a, TVar):
        if _occurs(a, b):
            raise Diagnostics([Diagnostic(
                "TypeError", f"infinite type: ?{a.id} occurs in {type_str(b)}",
                span)])
        a.ref = b
        return
    if isinstance(b, TVar):
        unify(b, a, span)
        return
    if type(a) is type(b) and isinstance(a, (TInt, TFloat, TBool, TChar)):
        return
    if isinstance(a, TArrow) and isinstance(b, TArrow):
        unify(a.param, b.param, span)
        unify(a.result, b.result, span)
        return
    if isinstance(a, TSeq) and isinstance(b, TSeq):
        unify(a.elem, b.elem, span)
        return
    if isinstance(a, TTensor) and isinstance(b, TTensor):
        unify(a.elem, b.elem, span)
        return
    if isinstance(a, TRecord) and isinstance(b, TRecord):
        if [l for l, _ in a.fields] == [l for l, _ in b.fields]:
            for (_, x), (_, y) in zip(a.fields, b.fields):
                unify(x, y, span)
            return
    raise Diagnostics([Diagnostic(
        "TypeError", f"type mismatch: {type_str(a)} vs {type_str(b)}", span)])


def _zonk(ty: Type, span: Span) -> Type:
    ty = resolve(ty)
    if isinstance(ty, TVar):
        raise Diagnostics([Diagnostic(
            "TypeError", "ambiguous type: unconstrained type variable", span)])
    if isinstance(ty, TArrow):
        return TArrow(_zonk(ty.param, span), _zonk(ty.result, span))
    if isinstance(ty, TSeq):
        return TSeq(_zonk(ty.elem, span))
    if isinstance(ty, TTensor):
        elem = _zonk(ty.elem, span)
        if not isinstance(elem, (TInt, TFloat)):
            raise Diagnostics([Diagnostic(
                "TypeError",
                f"tensor elements must be Int or Float, got {type_str(elem)}",
                span)])
        return TTensor(elem)
    if isinstance(ty, TRecord):
        return TRecord(tuple((l, _zonk(t, span)) for l, t in ty.fields))
    return ty


class _Checker:
    def __init__(self) -> None:
        self.env: dict[Name, Type] = {}
        # Record patterns whose scrutinee type was still unknown; resolved
        # after the rest of the program has been inferred.
        self.pending: list[tuple[TVar, PRecord, dict[str, Type]]] = []

    def check_pattern(self, p: Pattern, scrut_ty: Type) -> None:
        if isinstance(p, PVar):
            self.env[p.name] = scrut_ty
            return
        if isinstance(p, PConst):
            unify(scrut_ty, const_type(p.const), p.span)
            return
        if isinstance(p, PRecord):
            ty = resolve(scrut_ty)
            if isinstance(ty, TVar):
                field_tys: dict[str, Type] = {}
                for label, sub in p.fields:
                    v = TVar()
                    field_tys[label] = v
                    self.check_pattern(sub, v)
                self.pending.append((ty, p, field_tys))
                return
            if not isinstance(ty, TRecord):
                raise Diagnostics([Diagnostic(
                    "TypeError",
                    f"record pattern against non-record type {type_str(ty)}",
                    p.span)])
            fields = ty.field_map()
            for label, sub in p.fields:
                if label not in fields:
                    raise Diagnostics([Diagnostic(
                        "TypeError",
                        f"label {label} not present in type {type_str(ty)}",
                        p.span)])
                self.check_pattern(sub, fields[label])
            return
        raise AssertionError(p)

    def infer(self, e: Expr) -> Type:
        ty = self._infer(e)
        e.ty = ty
        return ty

    def _infer(self, e: Expr) -> Type:
        if isinstance(e, Var):
            ty = self.env.get(e.name)
            if ty is None:
                raise Diagnostics([Diagnostic(
                    "TypeError", f"unbound variable {e.name.text}", e.span)])
            return ty
        if isinstance(e, ConstE):
            return const_type(e.const)
        if isinstance(e, Never):
            return TVar()
        if isinstance(e, Lam):
            pty = e.param_ty if e.param_ty is not None else TVar()
            self.env[e.param] = pty
            rty = self.infer(e.body)
            return TArrow(pty, rty)
        if isinstance(e, App):
            fty = self.infer(e.fn)
            aty = self.infer(e.arg)
            rty = TVar()
            unify(fty, TArrow(aty, rty), e.span)
            return rty
        if isinstance(e, Let):
            vty = self.infer(e.value)
            if e.annot is not None:
                unify(vty, e.annot, e.span)
            self.env[e.name] = vty
            return self.infer(e.body)
        if isinstance(e, RecLets):
            for b in e.bindings:
                self.env[b.name] = b.annot if b.annot is not None else TVar()
            for b in e.bindings:
                vty = self.infer(b.value)
                unify(self.env[b.name], vty, b.span)
            return self.infer(e.body)
        if isinstance(e, Match):
            sty = self.infer(e.scrut)
            self.check_pattern(e.pat, sty)
            tty = self.infer(e.thn)
            ety = self.infer(e.els)
            unify(tty, ety, e.span)
            return tty
        if isinstance(e, RecordE):
            labels = [l for l, _ in e.fields]
            if len(set(labels)) != len(labels):
                raise Diagnostics([Diagnostic(
                    "TypeError", "duplicate record labels", e.span)])
            return TRecord.of({l: self.infer(v) for l, v in e.fields})
        if isinstance(e, SeqE):
            elem = TVar()
            for item in e.items:
                unify(self.infer(item), elem, item.span)
            return TSeq(elem)
        if isinstance(e, Accelerate):
            return self.infer(e.operand)
        if isinstance(e, MapE):
            a, b = TVar(), TVar()
            unify(self.infer(e.fn), TArrow(a, b), e.span)
            unify(self.infer(e.seq), TSeq(a), e.span)
            return TSeq(b)
        if isinstance(e, Map2E):
            a, b, c = TVar(), TVar(), TVar()
            unify(self.infer(e.fn), _arrow(a, b, c), e.span)
            unify(self.infer(e.seq1), TSeq(a), e.span)
            unify(self.infer(e.seq2), TSeq(b), e.span)
            return TSeq(c)
        if isinstance(e, ReduceE):
            a = TVar()
            unify(self.infer(e.fn), _arrow(a, a, a), e.span)
            unify(self.infer(e.acc), a, e.span)
            unify(self.infer(e.seq), TSeq(a), e.span)
            return a
        if isinstance(e, FlattenE):
            a = TVar()
            unify(self.infer(e.seq), TSeq(TSeq(a)), e.span)
            return TSeq(a)
        if isinstance(e, LoopE):
            unify(self.infer(e.count), _INT, e.span)
            unify(self.infer(e.fn), TArrow(_INT, UNIT), e.span)
            return UNIT
        raise AssertionError(e)


def _settle_pending(checker: _Checker) -> None:
    """Discharge deferred record-pattern constraints.

    Once the whole program has been inferred, most deferred scrutinee types
    have been resolved elsewhere; the rest default to an exact record with
    the pattern's labels.
    """
    pending = checker.pending
    while pending:
        rest = []
        progress = False
        for tv, p, field_tys in pending:
            ty = resolve(tv)
            if isinstance(ty, TVar):
                rest.append((tv, p, field_tys))
                continue
            progress = True
            if not isinstance(ty, TRecord):
                raise Diagnostics([Diagnostic(
                    "TypeError",
                    f"record pattern against non-record type {type_str(ty)}",
                    p.span)])
            fields = ty.field_map()
            for label, vty in field_tys.items():
                if label not in fields:
                    raise Diagnostics([Diagnostic(
                        "TypeError",
                        f"label {label} not present in type {type_str(ty)}",
                        p.span)])
                unify(fields[label], vty, p.span)
        if not progress and rest:
            tv, p, field_tys = rest.pop(0)
            unify(tv, TRecord.of(field_tys), p.span)
        pending = rest


def typecheck(e: Expr) -> Expr:
    """Annotate every node of e with its type; e must be symbolized."""
    checker = _Checker()
    checker.infer(e)
    _settle_pending(checker)
    for node in walk(e):
        node.ty = _zonk(node.ty, node.span)
        if isinstance(node, Lam):
            node.param_ty = _zonk(node.param_ty if node.param_ty is not None
                                  else checker.env[node.param], node.span)
    return e
