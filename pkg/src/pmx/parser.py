"""Concrete syntax: lexer and recursive-descent parser for `.pmx` sources.

Syntax follows ML conventions: `let x = e in e`, `lam x. e` / `lam x : T. e`,
`recursive let f = e ... in e`, `match e with p then e else e`, `never`,
sequence literals `[e, ...]`, records `{l = e, ...}`, field projection `e.l`
(sugar for a record match), `accelerate e`, and the parallel forms
`map`, `map2`, `reduce`, `flatten`, `loop`. Line comments start with `--`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .syntax import (
    Accelerate, App, BUILTIN_ARITY, CBool, CBuiltin, CChar, CFloat, CInt,
    ConstE, Diagnostic, Diagnostics, Expr, FlattenE, Lam, Let, LoopE, Map2E,
    MapE, Match, Name, Never, PConst, PRecord, PVar, Pattern, RecBinding,
    RecLets, RecordE, ReduceE, SeqE, Span, TArrow, TBool, TChar, TFloat, TInt,
    TRecord, TSeq, TTensor, Type, Var, fresh_name,
)

KEYWORDS = {
    "let", "in", "lam", "recursive", "match", "with", "then", "else",
    "never", "accelerate", "map", "map2", "reduce", "flatten", "loop",
    "true", "false", "Int", "Float", "Bool", "Char", "Tensor",
}

_PUNCT = ("->", "(", ")", "[", "]", "{", "}", ",", ":", "=", ".")


@dataclass
class Token:
    kind: str  # ident | int | float | char | string | punct | keyword | eof
    text: str
    span: Span
    value: object = None


def _is_ident_start(c: str) -> bool:
    return c.isalpha() or c == "_"


def _is_ident_char(c: str) -> bool:
    return c.isalnum() or c in "_#'"


_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", '"': '"', "'": "'", "0": "\0"}


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(source)

    def err(msg: str, sp: Span):
        raise Diagnostics([Diagnostic("ParseError", msg, sp)])

    while i < n:
        c = source[i]
        sp = Span(line, col)
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("--", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c.isdigit() or (c == "-" and i + 1 < n and source[i + 1].isdigit()):
            j = i + 1
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    is_float = True
                    j = k + 1
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            if is_float:
                toks.append(Token("float", text, sp, float(text)))
            else:
                toks.append(Token("int", text, sp, int(text)))
            col += j - i
            i = j
            continue
        if _is_ident_start(c):
            j = i + 1
            while j < n and _is_ident_char(source[j]):
                j += 1
            text = source[i:j]
            kind = "keyword" if text in KEYWORDS else "ident"
            toks.append(Token(kind, text, sp))
            col += j - i
            i = j
            continue
        if c == "'":
            if i + 2 < n and source[i + 1] == "\\":
                ch = _ESCAPES.get(source[i + 2])
                if ch is None or i + 3 >= n or source[i + 3] != "'":
                    err("malformed character literal", sp)
                toks.append(Token("char", source[i:i + 4], sp, ch))
                i += 4
                col += 4
                continue
            if i + 2 < n and source[i + 2] == "'":
                toks.append(Token("char", source[i:i + 3], sp, source[i + 1]))
                i += 3
                col += 3
                continue
            err("malformed character literal", sp)
        if c == '"':
            j = i + 1
            buf = []
            while j < n and source[j] != '"':
                if source[j] == "\\":
                    if j + 1 >= n or source[j + 1] not in _ESCAPES:
                        err("bad escape in string literal", sp)
                    buf.append(_ESCAPES[source[j + 1]])
                    j += 2
                elif source[j] == "\n":
                    err("unterminated string literal", sp)
                else:
                    buf.append(source[j])
                    j += 1
            if j >= n:
                err("unterminated string literal", sp)
            toks.append(Token("string", source[i:j + 1], sp, "".join(buf)))
            col += j + 1 - i
            i = j + 1
            continue
        matched = False
        for p in _PUNCT:
            if source.startswith(p, i):
                toks.append(Token("punct", p, sp))
                i += len(p)
                col += len(p)
                matched = True
                break
        if not matched:
            err(f"unexpected character {c!r}", sp)
    toks.append(Token("eof", "", Span(line, col)))
    return toks


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        at = tok.text or "end of input"
        raise Diagnostics(
            [Diagnostic("ParseError", f"{msg} (at {at!r})", tok.span)])

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            self.error(f"expected {text or kind}")
        return self.next()

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    # -- types -------------------------------------------------------------

    def parse_type(self) -> Type:
        lhs = self.parse_type_atom()
        if self.at("punct", "->"):
            self.next()
            return TArrow(lhs, self.parse_type())
        return lhs

    def parse_type_atom(self) -> Type:
        t = self.peek()
        if t.kind == "keyword":
            simple = {"Int": TInt(), "Float": TFloat(), "Bool": TBool(),
                      "Char": TChar()}
            if t.text in simple:
                self.next()
                return simple[t.text]
            if t.text == "Tensor":
                self.next()
                self.expect("punct", "[")
                elem = self.parse_type()
                self.expect("punct", "]")
                return TTensor(elem)
        if self.at("punct", "["):
            self.next()
            elem = self.parse_type()
            self.expect("punct", "]")
            return TSeq(elem)
        if self.at("punct", "{"):
            self.next()
            fields: dict[str, Type] = {}
            while not self.at("punct", "}"):
                label = self.expect("ident").text
                if label in fields:
                    self.error(f"duplicate record label {label}")
                self.expect("punct", ":")
                fields[label] = self.parse_type()
                if self.at("punct", ","):
                    self.next()
            self.expect("punct", "}")
            return TRecord.of(fields)
        if self.at("punct", "("):
            self.next()
            ty = self.parse_type()
            self.expect("punct", ")")
            return ty
        self.error("expected a type")

    # -- patterns ----------------------------------------------------------

    def parse_pattern(self) -> Pattern:
        t = self.peek()
        if t.kind == "ident":
            self.next()
            text = t.text
            if text == "_":
                return PVar(fresh_name("_"), span=t.span)
            return PVar(Name(text), span=t.span)
        if t.kind == "int":
            self.next()
            return PConst(CInt(t.value), span=t.span)
        if t.kind == "float":
            self.next()
            return PConst(CFloat(t.value), span=t.span)
        if t.kind == "char":
            self.next()
            return PConst(CChar(t.value), span=t.span)
        if t.kind == "keyword" and t.text in ("true", "false"):
            self.next()
            return PConst(CBool(t.text == "true"), span=t.span)
        if self.at("punct", "{"):
            self.next()
            fields: list[tuple[str, Pattern]] = []
            seen = set()
            while not self.at("punct", "}"):
                label = self.expect("ident").text
                if label in seen:
                    self.error(f"duplicate label {label} in record pattern")
                seen.add(label)
                self.expect("punct", "=")
                fields.append((label, self.parse_pattern()))
                if self.at("punct", ","):
                    self.next()
            self.expect("punct", "}")
            return PRecord(fields, span=t.span)
        if self.at("punct", "("):
            self.next()
            p = self.parse_pattern()
            self.expect("punct", ")")
            return p
        self.error("expected a pattern")

    # -- expressions -------------------------------------------------------

    def parse_expr(self) -> Expr:
        t = self.peek()
        if t.kind == "keyword":
            if t.text == "let":
                return self.parse_let()
            if t.text == "recursive":
                return self.parse_recursive()
            if t.text == "lam":
                return self.parse_lam()
            if t.text == "match":
                return self.parse_match()
        return self.parse_app()

    def parse_let(self) -> Let:
        kw = self.expect("keyword", "let")
        name = self.expect("ident")
        annot = None
        if self.at("punct", ":"):
            self.next()
            annot = self.parse_type()
        self.expect("punct", "=")
        value = self.parse_expr()
        self.expect("keyword", "in")
        body = self.parse_expr()
        return Let(Name(name.text), annot, value, body, span=kw.span)

    def parse_recursive(self) -> RecLets:
        kw = self.expect("keyword", "recursive")
        bindings: list[RecBinding] = []
        while self.at("keyword", "let"):
            lkw = self.next()
            name = self.expect("ident")
            annot = None
            if self.at("punct", ":"):
                self.next()
                annot = self.parse_type()
            self.expect("punct", "=")
            value = self.parse_expr()
            bindings.append(RecBinding(Name(name.text), annot, value, lkw.span))
            if self.at("keyword", "in"):
                break
        if not bindings:
            self.error("expected let after recursive")
        self.expect("keyword", "in")
        body = self.parse_expr()
        return RecLets(bindings, body, span=kw.span)

    def parse_lam(self) -> Lam:
        kw = self.expect("keyword", "lam")
        name = self.expect("ident")
        annot = None
        if self.at("punct", ":"):
            self.next()
            annot = self.parse_type()
        self.expect("punct", ".")
        body = self.parse_expr()
        return Lam(Name(name.text), annot, body, span=kw.span)

    def parse_match(self) -> Match:
        kw = self.expect("keyword", "match")
        scrut = self.parse_expr()
        self.expect("keyword", "with")
        pat = self.parse_pattern()
        self.expect("keyword", "then")
        thn = self.parse_expr()
        self.expect("keyword", "else")
        els = self.parse_expr()
        return Match(scrut, pat, thn, els, span=kw.span)

    def parse_app(self) -> Expr:
        head = self.parse_combinator_or_atom()
        while self.starts_atom():
            arg = self.parse_atom()
            head = App(head, arg, span=head.span)
        return head

    def parse_combinator_or_atom(self) -> Expr:
        t = self.peek()
        if t.kind == "keyword":
            if t.text == "accelerate":
                self.next()
                return Accelerate(self.parse_atom(), span=t.span)
            if t.text == "map":
                self.next()
                return MapE(self.parse_atom(), self.parse_atom(), span=t.span)
            if t.text == "map2":
                self.next()
                return Map2E(self.parse_atom(), self.parse_atom(),
                             self.parse_atom(), span=t.span)
            if t.text == "reduce":
                self.next()
                return ReduceE(self.parse_atom(), self.parse_atom(),
                               self.parse_atom(), span=t.span)
            if t.text == "flatten":
                self.next()
                return FlattenE(self.parse_atom(), span=t.span)
            if t.text == "loop":
                self.next()
                return LoopE(self.parse_atom(), self.parse_atom(), span=t.span)
        return self.parse_atom()

    def starts_atom(self) -> bool:
        t = self.peek()
        if t.kind in ("ident", "int", "float", "char", "string"):
            return True
        if t.kind == "keyword" and t.text in ("true", "false", "never"):
            return True
        if t.kind == "punct" and t.text in ("(", "[", "{"):
            return True
        return False

    def parse_atom(self) -> Expr:
        t = self.peek()
        e = self._parse_atom_base(t)
        # Postfix field projections: e.l is sugar for a record match.
        while self.at("punct", "."):
            self.next()
            label = self.expect("ident")
            x = fresh_name("proj")
            e = Match(e, PRecord([(label.text, PVar(x))], span=label.span),
                      Var(x, span=label.span), Never(span=label.span),
                      span=label.span)
        return e

    def _parse_atom_base(self, t: Token) -> Expr:
        if t.kind == "ident":
            self.next()
            if t.text in BUILTIN_ARITY:
                return ConstE(CBuiltin(t.text), span=t.span)
            return Var(Name(t.text), span=t.span)
        if t.kind == "int":
            self.next()
            return ConstE(CInt(t.value), span=t.span)
        if t.kind == "float":
            self.next()
            return ConstE(CFloat(t.value), span=t.span)
        if t.kind == "char":
            self.next()
            return ConstE(CChar(t.value), span=t.span)
        if t.kind == "string":
            self.next()
            return SeqE([ConstE(CChar(c), span=t.span) for c in t.value],
                        span=t.span)
        if t.kind == "keyword":
            if t.text in ("true", "false"):
                self.next()
                return ConstE(CBool(t.text == "true"), span=t.span)
            if t.text == "never":
                self.next()
                return Never(span=t.span)
        if self.at("punct", "("):
            self.next()
            if self.at("punct", ")"):
                # () is not in the grammar; unit is the empty record {}.
                self.error("empty parentheses; use {} for unit")
            e = self.parse_expr()
            self.expect("punct", ")")
            return e
        if self.at("punct", "["):
            self.next()
            items = []
            while not self.at("punct", "]"):
                items.append(self.parse_expr())
                if self.at("punct", ","):
                    self.next()
            self.expect("punct", "]")
            return SeqE(items, span=t.span)
        if self.at("punct", "{"):
            self.next()
            fields: list[tuple[str, Expr]] = []
            seen = set()
            while not self.at("punct", "}"):
                label = self.expect("ident").text
                if label in seen:
                    self.error(f"duplicate record label {label}")
                seen.add(label)
                self.expect("punct", "=")
                fields.append((label, self.parse_expr()))
                if self.at("punct", ","):
                    self.next()
            self.expect("punct", "}")
            return RecordE(fields, span=t.span)
        self.error("expected an expression")


def parse(source: str) -> Expr:
    """Parse a `.pmx` source text into an (unsymbolized, untyped) AST."""
    p = Parser(tokenize(source))
    e = p.parse_expr()
    if not p.at("eof"):
        p.error("trailing input after expression")
    return e
