"""AST definitions: names, types, expressions, patterns and diagnostics.

Every expression node carries a source span and, once type checking has
run, a type annotation in its `ty` field.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Optional, Union


# ---------------------------------------------------------------------------
# Names and spans
# ---------------------------------------------------------------------------

_uid_counter = itertools.count(1)
_uid_lock = threading.Lock()


@dataclass(frozen=True)
class Name:
    """An identifier. After symbolization each binder has a unique uid."""

    text: str
    uid: int = 0

    def __repr__(self) -> str:
        return f"{self.text}#{self.uid}"


def fresh_name(text: str) -> Name:
    with _uid_lock:
        return Name(text, next(_uid_counter))


@dataclass(frozen=True)
class Span:
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NO_SPAN = Span()


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

class Type:
    pass


@dataclass(frozen=True)
class TInt(Type):
    pass


@dataclass(frozen=True)
class TFloat(Type):
    pass


@dataclass(frozen=True)
class TBool(Type):
    pass


@dataclass(frozen=True)
class TChar(Type):
    pass


@dataclass(frozen=True)
class TArrow(Type):
    param: Type
    result: Type


@dataclass(frozen=True)
class TRecord(Type):
    # Labels are kept sorted so that record types compare structurally.
    fields: tuple[tuple[str, Type], ...]

    @staticmethod
    def of(fields: dict[str, Type]) -> "TRecord":
        return TRecord(tuple(sorted(fields.items())))

    def field_map(self) -> dict[str, Type]:
        return dict(self.fields)


@dataclass(frozen=True)
class TSeq(Type):
    elem: Type


@dataclass(frozen=True)
class TTensor(Type):
    elem: Type


class TVar(Type):
    """Unification variable; `ref` points at the resolved type once bound."""

    __slots__ = ("id", "ref")
    _counter = itertools.count(1)

    def __init__(self) -> None:
        self.id = next(TVar._counter)
        self.ref: Optional[Type] = None

    def __repr__(self) -> str:
        return f"?{self.id}"


UNIT = TRecord(())


def resolve(ty: Type) -> Type:
    while isinstance(ty, TVar) and ty.ref is not None:
        ty = ty.ref
    return ty


def is_arrow(ty: Type) -> bool:
    return isinstance(resolve(ty), TArrow)


def type_str(ty: Type) -> str:
    ty = resolve(ty)
    if isinstance(ty, TInt):
        return "Int"
    if isinstance(ty, TFloat):
        return "Float"
    if isinstance(ty, TBool):
        return "Bool"
    if isinstance(ty, TChar):
        return "Char"
    if isinstance(ty, TArrow):
        lhs = type_str(ty.param)
        if isinstance(resolve(ty.param), TArrow):
            lhs = f"({lhs})"
        return f"{lhs} -> {type_str(ty.result)}"
    if isinstance(ty, TRecord):
        if not ty.fields:
            return "{}"
        inner = ", ".join(f"{l}: {type_str(t)}" for l, t in ty.fields)
        return "{" + inner + "}"
    if isinstance(ty, TSeq):
        return f"[{type_str(ty.elem)}]"
    if isinstance(ty, TTensor):
        return f"Tensor[{type_str(ty.elem)}]"
    if isinstance(ty, TVar):
        return f"?{ty.id}"
    raise AssertionError(ty)


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CInt:
    value: int


@dataclass(frozen=True)
class CFloat:
    value: float


@dataclass(frozen=True)
class CBool:
    value: bool


@dataclass(frozen=True)
class CChar:
    value: str


@dataclass(frozen=True)
class CBuiltin:
    name: str


Const = Union[CInt, CFloat, CBool, CChar, CBuiltin]

# Builtin name -> arity. Effectful builtins are valid in sequential code only.
BUILTIN_ARITY: dict[str, int] = {
    "addi": 2, "subi": 2, "muli": 2, "divi": 2, "modi": 2, "negi": 1,
    "addf": 2, "subf": 2, "mulf": 2, "divf": 2, "negf": 1,
    "eqi": 2, "neqi": 2, "lti": 2, "gti": 2, "leqi": 2, "geqi": 2,
    "eqf": 2, "ltf": 2, "gtf": 2, "leqf": 2, "geqf": 2,
    "int2float": 1, "floor": 1,
    "exp": 1, "log": 1, "sqrtf": 1, "sin": 1, "cos": 1,
    "int2string": 1, "float2string": 1,
    "create": 2, "length": 1, "get": 2, "set": 3, "concat": 2,
    "foldl": 3, "reverse": 1,
    "tensorCreate": 2, "tensorGet": 2, "tensorSet": 3, "tensorSub": 3,
    "tensorShape": 1,
    "print": 1, "readFile": 1, "writeFile": 2,
}

EFFECTFUL_BUILTINS = frozenset({"print", "readFile", "writeFile"})
TENSOR_BUILTINS = frozenset(
    {"tensorCreate", "tensorGet", "tensorSet", "tensorSub", "tensorShape"})
TENSOR_MUTATION_BUILTINS = frozenset({"tensorSet", "tensorSub"})
# Builtins whose leading argument is a function; callers may pass a variable
# or an application there, mirroring the parallel-combinator relaxation.
FUNCTION_ARG_BUILTINS = frozenset({"create", "foldl", "tensorCreate"})


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

@dataclass
class Expr:
    span: Span = field(default=NO_SPAN, kw_only=True)
    ty: Optional[Type] = field(default=None, kw_only=True, repr=False)


@dataclass
class Var(Expr):
    name: Name


@dataclass
class ConstE(Expr):
    const: Const


@dataclass
class Lam(Expr):
    param: Name
    param_ty: Optional[Type]
    body: Expr


@dataclass
class App(Expr):
    fn: Expr
    arg: Expr


@dataclass
class Let(Expr):
    name: Name
    annot: Optional[Type]
    value: Expr
    body: Expr


@dataclass
class RecBinding:
    name: Name
    annot: Optional[Type]
    value: Expr
    span: Span = NO_SPAN


@dataclass
class RecLets(Expr):
    bindings: list[RecBinding]
    body: Expr


@dataclass
class Match(Expr):
    scrut: Expr
    pat: "Pattern"
    thn: Expr
    els: Expr


@dataclass
class Never(Expr):
    pass


@dataclass
class RecordE(Expr):
    # Declaration order is preserved for printing.
    fields: list[tuple[str, Expr]]


@dataclass
class SeqE(Expr):
    items: list[Expr]


@dataclass
class Accelerate(Expr):
    operand: Expr


@dataclass
class MapE(Expr):
    fn: Expr
    seq: Expr


@dataclass
class Map2E(Expr):
    fn: Expr
    seq1: Expr
    seq2: Expr


@dataclass
class ReduceE(Expr):
    fn: Expr
    acc: Expr
    seq: Expr


@dataclass
class FlattenE(Expr):
    seq: Expr


@dataclass
class LoopE(Expr):
    count: Expr
    fn: Expr


PARALLEL_FUT = (MapE, Map2E, ReduceE, FlattenE)
PARALLEL_CU = (LoopE,)


# ---------------------------------------------------------------------------
# Patterns
# ---------------------------------------------------------------------------

class Pattern:
    pass


@dataclass
class PVar(Pattern):
    name: Name
    span: Span = NO_SPAN


@dataclass
class PConst(Pattern):
    const: Const
    span: Span = NO_SPAN


@dataclass
class PRecord(Pattern):
    fields: list[tuple[str, Pattern]]
    span: Span = NO_SPAN


def pattern_names(pat: Pattern) -> list[Name]:
    if isinstance(pat, PVar):
        return [pat.name]
    if isinstance(pat, PConst):
        return []
    if isinstance(pat, PRecord):
        out: list[Name] = []
        for _, p in pat.fields:
            out.extend(pattern_names(p))
        return out
    raise AssertionError(pat)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

@dataclass
class Diagnostic(Exception):
    kind: str  # ParseError | TypeError | ClassifyError | WellFormedError | RuntimeError
    message: str
    span: Span = NO_SPAN
    rule: Optional[str] = None

    def render(self, filename: str = "<input>") -> str:
        tag = f" [{self.rule}]" if self.rule else ""
        return f"{filename}:{self.span.line}:{self.span.col}:{tag} {self.kind}: {self.message}"

    def __str__(self) -> str:
        return self.render()


class Diagnostics(Exception):
    """Raised to abort a pipeline stage with one or more diagnostics."""

    def __init__(self, items: list[Diagnostic]):
        super().__init__(f"{len(items)} diagnostic(s)")
        self.items = items

    def __str__(self) -> str:
        return "\n".join(str(d) for d in self.items)


# ---------------------------------------------------------------------------
# Generic traversal helpers
# ---------------------------------------------------------------------------

def children(e: Expr) -> list[Expr]:
    if isinstance(e, (Var, ConstE, Never)):
        return []
    if isinstance(e, Lam):
        return [e.body]
    if isinstance(e, App):
        return [e.fn, e.arg]
    if isinstance(e, Let):
        return [e.value, e.body]
    if isinstance(e, RecLets):
        return [b.value for b in e.bindings] + [e.body]
    if isinstance(e, Match):
        return [e.scrut, e.thn, e.els]
    if isinstance(e, RecordE):
        return [v for _, v in e.fields]
    if isinstance(e, SeqE):
        return list(e.items)
    if isinstance(e, Accelerate):
        return [e.operand]
    if isinstance(e, MapE):
        return [e.fn, e.seq]
    if isinstance(e, Map2E):
        return [e.fn, e.seq1, e.seq2]
    if isinstance(e, ReduceE):
        return [e.fn, e.acc, e.seq]
    if isinstance(e, FlattenE):
        return [e.seq]
    if isinstance(e, LoopE):
        return [e.count, e.fn]
    raise AssertionError(e)


def walk(e: Expr):
    """Yield every subexpression of e, including e itself (pre-order)."""
    stack = [e]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(children(cur)))


def unit_expr(span: Span = NO_SPAN) -> RecordE:
    return RecordE([], span=span)
