"""Deterministic pretty printer; output re-parses to an alpha-equivalent AST."""

from __future__ import annotations

from .syntax import (
    Accelerate, App, CBool, CBuiltin, CChar, CFloat, CInt, ConstE, Expr,
    FlattenE, Lam, Let, LoopE, Map2E, MapE, Match, Name, Never, PConst,
    PRecord, PVar, Pattern, RecLets, RecordE, ReduceE, SeqE, Var, type_str,
    walk,
)

_CHAR_ESCAPES = {"\n": "\\n", "\t": "\\t", "\\": "\\\\", "'": "\\'", "\0": "\\0"}


class _Names:
    """Assigns collision-free display names to symbolized binders."""

    def __init__(self, program: Expr):
        self.display: dict[Name, str] = {}
        used: set[str] = set()
        for e in walk(program):
            binders: list[Name] = []
            if isinstance(e, Lam):
                binders = [e.param]
            elif isinstance(e, Let):
                binders = [e.name]
            elif isinstance(e, RecLets):
                binders = [b.name for b in e.bindings]
            elif isinstance(e, Match):
                from .syntax import pattern_names
                binders = pattern_names(e.pat)
            for name in binders:
                if name.uid == 0 or name in self.display:
                    continue
                cand = name.text
                k = 1
                while cand in used:
                    cand = f"{name.text}{k}"
                    k += 1
                used.add(cand)
                self.display[name] = cand

    def of(self, name: Name) -> str:
        return self.display.get(name, name.text)


def _const_str(c) -> str:
    if isinstance(c, CInt):
        return str(c.value)
    if isinstance(c, CFloat):
        return repr(c.value)
    if isinstance(c, CBool):
        return "true" if c.value else "false"
    if isinstance(c, CChar):
        return f"'{_CHAR_ESCAPES.get(c.value, c.value)}'"
    if isinstance(c, CBuiltin):
        return c.name
    raise AssertionError(c)


class _Printer:
    def __init__(self, names: _Names):
        self.names = names

    def pattern(self, p: Pattern) -> str:
        if isinstance(p, PVar):
            return self.names.of(p.name)
        if isinstance(p, PConst):
            return _const_str(p.const)
        if isinstance(p, PRecord):
            inner = ", ".join(f"{l} = {self.pattern(q)}" for l, q in p.fields)
            return "{" + inner + "}"
        raise AssertionError(p)

    def atom(self, e: Expr) -> str:
        s = self.expr(e)
        if isinstance(e, (Var, ConstE, Never, SeqE, RecordE)):
            return s
        return f"({s})"

    def expr(self, e: Expr, indent: int = 0) -> str:
        pad = "  " * indent
        if isinstance(e, Var):
            return self.names.of(e.name)
        if isinstance(e, ConstE):
            return _const_str(e.const)
        if isinstance(e, Never):
            return "never"
        if isinstance(e, Lam):
            annot = f" : {type_str(e.param_ty)}" if e.param_ty is not None else ""
            return f"lam {self.names.of(e.param)}{annot}. {self.expr(e.body, indent)}"
        if isinstance(e, App):
            return f"{self.app_head(e.fn)} {self.atom(e.arg)}"
        if isinstance(e, Let):
            annot = f" : {type_str(e.annot)}" if e.annot is not None else ""
            return (f"let {self.names.of(e.name)}{annot} = {self.expr(e.value, indent)} in\n"
                    f"{pad}{self.expr(e.body, indent)}")
        if isinstance(e, RecLets):
            parts = []
            for b in e.bindings:
                annot = f" : {type_str(b.annot)}" if b.annot is not None else ""
                parts.append(
                    f"let {self.names.of(b.name)}{annot} = {self.expr(b.value, indent)}")
            joined = f"\n{pad}".join(parts)
            return f"recursive {joined} in\n{pad}{self.expr(e.body, indent)}"
        if isinstance(e, Match):
            return (f"match {self.expr(e.scrut, indent)} with {self.pattern(e.pat)} "
                    f"then {self.expr(e.thn, indent)} else {self.expr(e.els, indent)}")
        if isinstance(e, RecordE):
            inner = ", ".join(f"{l} = {self.expr(v, indent)}" for l, v in e.fields)
            return "{" + inner + "}"
        if isinstance(e, SeqE):
            return "[" + ", ".join(self.expr(v, indent) for v in e.items) + "]"
        if isinstance(e, Accelerate):
            return f"accelerate {self.atom(e.operand)}"
        if isinstance(e, MapE):
            return f"map {self.atom(e.fn)} {self.atom(e.seq)}"
        if isinstance(e, Map2E):
            return f"map2 {self.atom(e.fn)} {self.atom(e.seq1)} {self.atom(e.seq2)}"
        if isinstance(e, ReduceE):
            return f"reduce {self.atom(e.fn)} {self.atom(e.acc)} {self.atom(e.seq)}"
        if isinstance(e, FlattenE):
            return f"flatten {self.atom(e.seq)}"
        if isinstance(e, LoopE):
            return f"loop {self.atom(e.count)} {self.atom(e.fn)}"
        raise AssertionError(e)

    def app_head(self, e: Expr) -> str:
        # Application is left-associative; combinator heads re-parse greedily.
        if isinstance(e, (App, MapE, Map2E, ReduceE, FlattenE, LoopE)):
            return self.expr(e)
        return self.atom(e)


def pretty(e: Expr) -> str:
    """Render e as concrete syntax. parse(pretty(e)) is alpha-equivalent to e."""
    return _Printer(_Names(e)).expr(e)
