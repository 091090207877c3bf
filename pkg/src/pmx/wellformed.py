"""Per-backend well-formedness judgments over ANF'd backend programs.

Each violation is reported as a rule-tagged diagnostic. The functional
backend rejects tensors and general first-class functions; the CUDA backend
rejects higher-order user functions (first-order binding rule) and restricts
the loop iteration function to a variable or an application.
"""

from __future__ import annotations

from .classify import BackendSplit
from .syntax import (
    App, CBuiltin, ConstE, Diagnostic, EFFECTFUL_BUILTINS,
    FUNCTION_ARG_BUILTINS, Expr, FlattenE, Lam, Let, LoopE, Map2E, MapE,
    Match, Never, PConst, PRecord, PVar, Pattern, RecLets, RecordE, ReduceE,
    SeqE, Span, TArrow, TRecord, TSeq, TTensor, TENSOR_BUILTINS, Type, Var,
    is_arrow, resolve, type_str,
)


class _Checker:
    def __init__(self, backend: str):
        assert backend in ("fut", "cu")
        self.backend = backend
        self.diags: list[Diagnostic] = []

    def fail(self, rule: str, message: str, span: Span) -> None:
        self.diags.append(Diagnostic("WellFormedError", message, span, rule))

    # -- types -------------------------------------------------------------

    def check_type(self, ty: Type, span: Span) -> None:
        ty = resolve(ty)
        if isinstance(ty, TSeq):
            if is_arrow(ty.elem):
                self.fail("WF-TX-Seq",
                          f"sequence of functions is not allowed: {type_str(ty)}",
                          span)
            self.check_type(ty.elem, span)
        elif isinstance(ty, TRecord):
            for label, fty in ty.fields:
                if is_arrow(fty):
                    self.fail("WF-TX-Rec",
                              f"record field {label} has function type", span)
                self.check_type(fty, span)
        elif isinstance(ty, TTensor):
            if self.backend == "fut":
                self.fail("WF-TF-Tensor",
                          "tensors are not supported by the functional backend",
                          span)
        elif isinstance(ty, TArrow):
            self.check_type(ty.param, span)
            self.check_type(ty.result, span)

    # -- bindings ----------------------------------------------------------

    def check_program(self, e: Expr) -> None:
        while True:
            if isinstance(e, Let):
                self.check_binding(e.name.text, e.value, e.span)
                e = e.body
            elif isinstance(e, RecLets):
                for b in e.bindings:
                    self.check_binding(b.name.text, b.value, b.span)
                e = e.body
            else:
                self.check_expr(e)
                return

    def check_binding(self, text: str, value: Expr, span: Span) -> None:
        """A top-level (or local) binding; its value must suit the backend."""
        if isinstance(value, Lam):
            body = value
            while isinstance(body, Lam):
                pty = resolve(body.param_ty)
                if is_arrow(pty):
                    if self.backend == "cu":
                        self.fail("WF-BC-2",
                                  f"parameter {body.param.text} of {text} has "
                                  f"function type {type_str(pty)}", body.span)
                    else:
                        self.fail("WF-EF-HOF",
                                  f"parameter {body.param.text} of {text} has "
                                  f"function type {type_str(pty)}", body.span)
                else:
                    self.check_type(pty, body.span)
                body = body.body
            if is_arrow(body.ty):
                if self.backend == "cu":
                    self.fail("WF-BC-1",
                              f"{text} returns a function", body.span)
                else:
                    self.fail("WF-EF-HOF",
                              f"{text} returns a function", body.span)
            self.check_type(body.ty, body.span)
            self.check_expr(body)
            return
        # Non-lambda bound value: must be first-order data.
        if is_arrow(value.ty):
            if isinstance(value, Match):
                self.check_expr(value)  # reports WF-EX-Match
            elif isinstance(value, App):
                self.fail("WF-EC-App" if self.backend == "cu" else "WF-EF-HOF",
                          f"partial application bound to {text} has function "
                          f"type {type_str(value.ty)}", value.span)
            else:
                self.fail("WF-BC-1" if self.backend == "cu" else "WF-EF-HOF",
                          f"{text} is bound to a value of function type "
                          f"{type_str(value.ty)}", value.span)
            return
        self.check_type(value.ty, value.span)
        self.check_expr(value)

    # -- expressions -------------------------------------------------------

    def check_expr(self, e: Expr) -> None:
        if isinstance(e, Var) or isinstance(e, Never):
            return
        if isinstance(e, ConstE):
            self.check_const(e)
            return
        if isinstance(e, Lam):
            # Lambdas in expression position survive only inside parallel
            # function arguments, which are checked via check_fn_arg.
            self.check_binding("<lambda>", e, e.span)
            return
        if isinstance(e, App):
            self.check_app(e, allow_arrow_result=False)
            return
        if isinstance(e, Let):
            self.check_binding(e.name.text, e.value, e.span)
            self.check_expr(e.body)
            return
        if isinstance(e, RecLets):
            for b in e.bindings:
                self.check_binding(b.name.text, b.value, b.span)
            self.check_expr(e.body)
            return
        if isinstance(e, Match):
            self.check_expr(e.scrut)
            self.check_pattern(e.pat)
            if is_arrow(e.ty):
                self.fail("WF-EX-Match",
                          "match expression must not have function type",
                          e.span)
            self.check_expr(e.thn)
            self.check_expr(e.els)
            return
        if isinstance(e, RecordE):
            self.check_type(e.ty, e.span)
            for _, v in e.fields:
                self.check_expr(v)
            return
        if isinstance(e, SeqE):
            self.check_type(e.ty, e.span)
            for v in e.items:
                self.check_expr(v)
            return
        if isinstance(e, (MapE, Map2E, ReduceE, FlattenE)):
            assert self.backend == "fut", \
                "functional combinator in CUDA-classified code"
            if isinstance(e, MapE):
                self.check_fn_arg(e.fn, "map")
                self.check_expr(e.seq)
            elif isinstance(e, Map2E):
                self.check_fn_arg(e.fn, "map2")
                self.check_expr(e.seq1)
                self.check_expr(e.seq2)
            elif isinstance(e, ReduceE):
                self.check_fn_arg(e.fn, "reduce")
                self.check_expr(e.acc)
                self.check_expr(e.seq)
            else:
                self.check_expr(e.seq)
            return
        if isinstance(e, LoopE):
            assert self.backend == "cu", \
                "loop construct in Futhark-classified code"
            self.check_expr(e.count)
            if not self._is_var_or_app(e.fn):
                self.fail("WF-EC-Loop",
                          "loop iteration function must be a variable or an "
                          "application", e.fn.span)
            else:
                self.check_fn_arg(e.fn, "loop")
            return
        raise AssertionError(e)

    def check_const(self, e: ConstE) -> None:
        c = e.const
        if isinstance(c, CBuiltin):
            if c.name in EFFECTFUL_BUILTINS:
                self.fail("WF-EX-Builtin",
                          f"effectful builtin {c.name} is not allowed in "
                          "accelerated code", e.span)
            elif self.backend == "fut" and c.name in TENSOR_BUILTINS:
                self.fail("WF-TF-Tensor",
                          f"tensor builtin {c.name} is not supported by the "
                          "functional backend", e.span)

    def check_pattern(self, p: Pattern) -> None:
        # WF-PX-Rec: record patterns type their variables via projections of
        # an already well-formed scrutinee; nothing further to enforce here.
        if isinstance(p, PRecord):
            for _, q in p.fields:
                self.check_pattern(q)

    def _is_var_or_app(self, e: Expr) -> bool:
        while isinstance(e, App):
            e = e.fn
        return isinstance(e, (Var, ConstE))

    def check_fn_arg(self, e: Expr, construct: str) -> None:
        """The relaxed judgment for function arguments (variable or
        application, possibly of function-producing intermediate type)."""
        if isinstance(e, (Var, ConstE)):
            if isinstance(e, ConstE):
                self.check_const(e)
            return
        if isinstance(e, App):
            self.check_app(e, allow_arrow_result=True)
            return
        if isinstance(e, Lam):
            # Pre-lift programs may still carry literal lambdas here.
            self.check_binding("<lambda>", e, e.span)
            return
        rule = "WF-EC-Loop" if construct == "loop" else "WF-EF-HOF"
        self.fail(rule, f"function argument of {construct} must be a variable "
                        "or an application", e.span)

    def check_app(self, e: App, allow_arrow_result: bool) -> None:
        head = e
        args: list[Expr] = []
        while isinstance(head, App):
            args.append(head.arg)
            head = head.fn
        args.reverse()
        if not allow_arrow_result and is_arrow(e.ty):
            rule = "WF-EC-App" if self.backend == "cu" else "WF-EF-HOF"
            self.fail(rule, "application result must not have function type "
                            f"(got {type_str(e.ty)})", e.span)
        if isinstance(head, ConstE):
            self.check_const(head)
            builtin = head.const.name if isinstance(head.const, CBuiltin) else None
        else:
            self.check_expr(head)
            builtin = None
        for i, arg in enumerate(args):
            if is_arrow(arg.ty):
                if builtin in FUNCTION_ARG_BUILTINS and i == _fn_pos(builtin):
                    self.check_fn_arg(arg, builtin)
                    continue
                rule = "WF-EC-App" if self.backend == "cu" else "WF-EF-HOF"
                self.fail(rule, "function-typed argument is not allowed here",
                          arg.span)
                continue
            self.check_expr(arg)


def _fn_pos(builtin: str) -> int:
    # Argument index of the function parameter of builtins that take one.
    return {"create": 1, "foldl": 0, "tensorCreate": 1}[builtin]


def check_futhark(e_fut: Expr) -> list[Diagnostic]:
    """Check the functional-backend program; returns rule-tagged diagnostics."""
    checker = _Checker("fut")
    checker.check_program(e_fut)
    return checker.diags


def check_cuda(e_cu: Expr) -> list[Diagnostic]:
    """Check the CUDA-backend program; returns rule-tagged diagnostics."""
    checker = _Checker("cu")
    checker.check_program(e_cu)
    return checker.diags


def check_well_formed(split: BackendSplit) -> list[Diagnostic]:
    """Conjunction of both backend judgments; aggregates all diagnostics."""
    return check_futhark(split.fut_program) + check_cuda(split.cu_program)
