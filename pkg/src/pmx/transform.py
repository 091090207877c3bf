"""Pipeline-front normalization passes.

- nesting check: no `accelerate` inside another, including through calls
- accelerate rewrite: `accelerate e` becomes `let a = e in a`
- lambda lifting: every function and accelerate binding becomes top-level,
  with captured non-function variables turned into leading parameters
- ANF: nontrivial subexpressions are let-bound, except the function argument
  of a parallel combinator, which may remain a variable or application
"""

from __future__ import annotations

from dataclasses import dataclass

from .extraction import free_vars
from .syntax import (
    Accelerate, App, ConstE, Diagnostic, Diagnostics, Expr, FlattenE, Lam,
    Let, LoopE, Map2E, MapE, Match, Name, Never, RecBinding, RecLets, RecordE,
    ReduceE, SeqE, Var, children, fresh_name, pattern_names, unit_expr, walk,
)

AccelSet = set[Name]


# ---------------------------------------------------------------------------
# Nested-accelerate check
# ---------------------------------------------------------------------------

def _binding_values(e: Expr) -> dict[Name, Expr]:
    out: dict[Name, Expr] = {}
    for node in walk(e):
        if isinstance(node, Let):
            out[node.name] = node.value
        elif isinstance(node, RecLets):
            for b in node.bindings:
                out[b.name] = b.value
    return out


def check_no_nested_accelerate(e: Expr) -> None:
    """Reject accelerate expressions nested directly or through calls.

    Reachability follows free variables into function-valued bindings only;
    a variable holding already-computed data cannot re-enter an accelerate.
    """
    bindings = _binding_values(e)
    errors: list[Diagnostic] = []

    def find_accel(body: Expr, visited: set[Name]) -> Accelerate | None:
        for node in walk(body):
            if isinstance(node, Accelerate):
                return node
        for name in free_vars(body):
            value = bindings.get(name)
            if value is None or not isinstance(value, Lam):
                continue
            if name in visited:
                continue
            found = find_accel(value, visited | {name})
            if found is not None:
                return found
        return None

    for node in walk(e):
        if isinstance(node, Accelerate):
            inner = find_accel(node.operand, set())
            if inner is not None:
                errors.append(Diagnostic(
                    "ParseError",
                    "accelerate expressions may not be nested",
                    inner.span))
    if errors:
        raise Diagnostics(errors)


# ---------------------------------------------------------------------------
# Accelerate rewrite
# ---------------------------------------------------------------------------

def rewrite_accelerate(e: Expr) -> tuple[Expr, AccelSet]:
    """Replace each `accelerate e` with `let a = e in a` for a fresh a."""
    accel: AccelSet = set()

    def go(e: Expr) -> Expr:
        if isinstance(e, Accelerate):
            operand = go(e.operand)
            a = fresh_name("a")
            accel.add(a)
            return Let(a, None, operand, Var(a, span=e.span, ty=e.ty),
                       span=e.span, ty=e.ty)
        return _map_children(e, go)

    return go(e), accel


def _map_children(e: Expr, f) -> Expr:
    if isinstance(e, (Var, ConstE, Never)):
        return e
    if isinstance(e, Lam):
        return Lam(e.param, e.param_ty, f(e.body), span=e.span, ty=e.ty)
    if isinstance(e, App):
        return App(f(e.fn), f(e.arg), span=e.span, ty=e.ty)
    if isinstance(e, Let):
        return Let(e.name, e.annot, f(e.value), f(e.body), span=e.span, ty=e.ty)
    if isinstance(e, RecLets):
        bindings = [RecBinding(b.name, b.annot, f(b.value), b.span)
                    for b in e.bindings]
        return RecLets(bindings, f(e.body), span=e.span, ty=e.ty)
    if isinstance(e, Match):
        return Match(f(e.scrut), e.pat, f(e.thn), f(e.els), span=e.span, ty=e.ty)
    if isinstance(e, RecordE):
        return RecordE([(l, f(v)) for l, v in e.fields], span=e.span, ty=e.ty)
    if isinstance(e, SeqE):
        return SeqE([f(v) for v in e.items], span=e.span, ty=e.ty)
    if isinstance(e, Accelerate):
        return Accelerate(f(e.operand), span=e.span, ty=e.ty)
    if isinstance(e, MapE):
        return MapE(f(e.fn), f(e.seq), span=e.span, ty=e.ty)
    if isinstance(e, Map2E):
        return Map2E(f(e.fn), f(e.seq1), f(e.seq2), span=e.span, ty=e.ty)
    if isinstance(e, ReduceE):
        return ReduceE(f(e.fn), f(e.acc), f(e.seq), span=e.span, ty=e.ty)
    if isinstance(e, FlattenE):
        return FlattenE(f(e.seq), span=e.span, ty=e.ty)
    if isinstance(e, LoopE):
        return LoopE(f(e.count), f(e.fn), span=e.span, ty=e.ty)
    raise AssertionError(e)


# ---------------------------------------------------------------------------
# Lambda lifting
# ---------------------------------------------------------------------------

@dataclass
class _FnInfo:
    name: Name
    order: int            # appearance index, for stable emission
    value: Expr           # original bound value
    captures: list[Name]  # resolved after the capture fixpoint
    unit_param: bool = False
    recursive: bool = False


def _name_anonymous_lambdas(e: Expr, in_binding_value: bool) -> Expr:
    """Wrap lambdas outside binding positions as `let f = lam .. in f`."""
    if isinstance(e, Lam):
        body = _name_anonymous_lambdas(e.body, isinstance(e.body, Lam))
        lam = Lam(e.param, e.param_ty, body, span=e.span, ty=e.ty)
        if in_binding_value:
            return lam
        f = fresh_name("fn")
        return Let(f, None, lam, Var(f, span=e.span, ty=e.ty),
                   span=e.span, ty=e.ty)
    if isinstance(e, Let):
        value = _name_anonymous_lambdas(e.value, True)
        body = _name_anonymous_lambdas(e.body, False)
        return Let(e.name, e.annot, value, body, span=e.span, ty=e.ty)
    if isinstance(e, RecLets):
        bindings = [RecBinding(b.name, b.annot,
                               _name_anonymous_lambdas(b.value, True), b.span)
                    for b in e.bindings]
        return RecLets(bindings, _name_anonymous_lambdas(e.body, False),
                       span=e.span, ty=e.ty)
    return _map_children(e, lambda c: _name_anonymous_lambdas(c, False))


def _binder_types(e: Expr) -> dict[Name, Expr | None]:
    """Map every binder to a representative typed node (for capture types)."""
    out: dict[Name, object] = {}
    for node in walk(e):
        if isinstance(node, Lam):
            out[node.param] = node.param_ty
        elif isinstance(node, Let):
            out[node.name] = node.value.ty
        elif isinstance(node, RecLets):
            for b in node.bindings:
                out[b.name] = b.value.ty
        elif isinstance(node, Match):
            for n in pattern_names(node.pat):
                out.setdefault(n, None)
    return out


def _binders_within(e: Expr) -> set[Name]:
    out: set[Name] = set()
    for node in walk(e):
        if isinstance(node, Lam):
            out.add(node.param)
        elif isinstance(node, Let):
            out.add(node.name)
        elif isinstance(node, RecLets):
            out.update(b.name for b in node.bindings)
        elif isinstance(node, Match):
            out.update(pattern_names(node.pat))
    return out


def lambda_lift(e: Expr, accel: AccelSet) -> Expr:
    """Lift every function and accelerate binding to the top of the program.

    The result must be re-typechecked: lifted bindings gain parameters.
    """
    e = _name_anonymous_lambdas(e, False)

    # Collect function bindings (value is a lambda, or an accelerate binding).
    fns: dict[Name, _FnInfo] = {}
    order = 0
    for node in walk(e):
        found: list[tuple[Name, Expr, bool]] = []
        if isinstance(node, Let):
            found = [(node.name, node.value, False)]
        elif isinstance(node, RecLets):
            found = [(b.name, b.value, True) for b in node.bindings]
        for name, value, rec in found:
            if isinstance(value, Lam) or name in accel:
                fns[name] = _FnInfo(name, order, value, [], recursive=rec)
                order += 1
    fn_names = set(fns)

    binder_ty = _binder_types(e)
    direct = {f: free_vars(info.value) for f, info in fns.items()}
    inner_binders = {f: _binders_within(info.value) for f, info in fns.items()}

    # Capture fixpoint: a lifted binding captures its own free non-binding
    # variables plus the captures of every lifted binding it references,
    # minus anything bound inside it.
    captures: dict[Name, set[Name]] = {
        f: set(d) - fn_names for f, d in direct.items()}
    changed = True
    while changed:
        changed = False
        for f, d in direct.items():
            acc = set(captures[f])
            for g in d & fn_names:
                acc |= captures[g] - inner_binders[f]
            acc -= fn_names
            if acc != captures[f]:
                captures[f] = acc
                changed = True
    for f, info in fns.items():
        info.captures = sorted(captures[f], key=lambda n: n.uid)
        if f in accel and not info.captures and not isinstance(info.value, Lam):
            info.unit_param = True

    lifted: list[tuple[_FnInfo, Expr]] = []

    def var_use(name: Name, sub: dict[Name, Name], span, ty) -> Expr:
        if name in fns:
            info = fns[name]
            out: Expr = Var(name, span=span, ty=ty)
            for c in info.captures:
                out = App(out, Var(sub.get(c, c), span=span), span=span)
            if info.unit_param:
                out = App(out, unit_expr(span), span=span)
            return out
        return Var(sub.get(name, name), span=span, ty=ty)

    def rewrite_fn_value(info: _FnInfo, sub: dict[Name, Name]) -> Expr:
        inner_sub = dict(sub)
        params: list[tuple[Name, object]] = []
        for c in info.captures:
            p = fresh_name(c.text)
            inner_sub[c] = p
            params.append((p, binder_ty.get(c)))
        body = go(info.value, inner_sub)
        if info.unit_param:
            body = Lam(fresh_name("_"), unit_expr().ty, body, span=body.span)
            from .syntax import UNIT
            body.param_ty = UNIT
        for p, pty in reversed(params):
            body = Lam(p, pty, body, span=body.span)
        return body

    def go(e: Expr, sub: dict[Name, Name]) -> Expr:
        if isinstance(e, Var):
            return var_use(e.name, sub, e.span, e.ty)
        if isinstance(e, Let):
            if e.name in fns:
                lifted.append((fns[e.name], rewrite_fn_value(fns[e.name], sub)))
                return go(e.body, sub)
            return Let(e.name, e.annot, go(e.value, sub), go(e.body, sub),
                       span=e.span, ty=e.ty)
        if isinstance(e, RecLets):
            kept = []
            for b in e.bindings:
                if b.name in fns:
                    lifted.append((fns[b.name], rewrite_fn_value(fns[b.name], sub)))
                else:
                    kept.append(RecBinding(b.name, b.annot, go(b.value, sub),
                                           b.span))
            body = go(e.body, sub)
            if kept:
                return RecLets(kept, body, span=e.span, ty=e.ty)
            return body
        return _map_children(e, lambda c: go(c, sub))

    residual = go(e, {})

    # Emit lifted bindings callee-before-caller; mutual recursion becomes a
    # single recursive group. SCCs of the dependency graph, stable by
    # original appearance order.
    values = {info.name: value for info, value in lifted}
    deps = {f: free_vars(values[f]) & fn_names for f in values}
    # Tarjan emits components callee-first; wrap the residual innermost-last
    # so that callees end up above their callers.
    sccs = _sccs(deps)
    program = residual
    for group in reversed(sccs):
        group_sorted = sorted(group, key=lambda f: fns[f].order)
        self_rec = len(group) > 1 or group[0] in deps[group[0]]
        if self_rec:
            bindings = [RecBinding(f, None, values[f]) for f in group_sorted]
            program = RecLets(bindings, program, ty=program.ty)
        else:
            f = group_sorted[0]
            program = Let(f, None, values[f], program, ty=program.ty)
    return program


def _sccs(deps: dict[Name, set[Name]]) -> list[list[Name]]:
    """Tarjan's strongly connected components (iterative)."""
    index: dict[Name, int] = {}
    low: dict[Name, int] = {}
    on_stack: set[Name] = set()
    stack: list[Name] = []
    out: list[list[Name]] = []
    counter = [0]

    def strongconnect(v: Name) -> None:
        work = [(v, iter(sorted(deps[v], key=lambda n: n.uid)))]
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in deps:
                    continue
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(deps[w], key=lambda n: n.uid))))
                    advanced = True
                    break
                if w in on_stack:
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                out.append(comp)

    for v in deps:
        if v not in index:
            strongconnect(v)
    return out


# ---------------------------------------------------------------------------
# ANF
# ---------------------------------------------------------------------------

def _is_atom(e: Expr) -> bool:
    return isinstance(e, (Var, ConstE, Never))


def to_anf(e: Expr) -> Expr:
    """A-normal form with the parallel-combinator function-argument exception."""

    def name_it(e: Expr, k) -> Expr:
        """Normalize e; pass an atom to k, let-binding e to a temp if needed."""
        return norm(e, lambda v: _bind(v, k))

    def _bind(v: Expr, k) -> Expr:
        if _is_atom(v):
            return k(v)
        t = fresh_name("t#")
        body = k(Var(t, span=v.span, ty=v.ty))
        return Let(t, None, v, body, span=v.span, ty=body.ty)

    def norm_many(es: list[Expr], k) -> Expr:
        if not es:
            return k([])
        return name_it(es[0], lambda v: norm_many(es[1:], lambda vs: k([v] + vs)))

    def fn_arg(e: Expr, k) -> Expr:
        # The function argument of a parallel combinator (and of builtins that
        # take one) stays in place as a variable or application.
        if isinstance(e, App):
            head, args = _spine(e)
            return name_it(head, lambda h: norm_many(
                args, lambda vs: k(_rebuild(h, vs, e))))
        if isinstance(e, Lam):
            return k(Lam(e.param, e.param_ty, tail(e.body),
                         span=e.span, ty=e.ty))
        return name_it(e, k)

    def _builtin_fn_pos(head: Expr):
        # Function-argument position of builtins that take one; that
        # argument stays a variable or application, like combinators'.
        from .syntax import CBuiltin, FUNCTION_ARG_BUILTINS
        if isinstance(head, ConstE) and isinstance(head.const, CBuiltin) \
                and head.const.name in FUNCTION_ARG_BUILTINS:
            return {"create": 1, "foldl": 0, "tensorCreate": 1}[head.const.name]
        return None

    def _spine(e: Expr) -> tuple[Expr, list[Expr]]:
        args: list[Expr] = []
        while isinstance(e, App):
            args.append(e.arg)
            e = e.fn
        return e, list(reversed(args))

    def _rebuild(head: Expr, args: list[Expr], orig: Expr) -> Expr:
        out = head
        for a in args:
            out = App(out, a, span=orig.span)
        out.ty = orig.ty
        return out

    def norm(e: Expr, k) -> Expr:
        if _is_atom(e):
            return k(e)
        if isinstance(e, Lam):
            return k(Lam(e.param, e.param_ty, tail(e.body), span=e.span, ty=e.ty))
        if isinstance(e, App):
            head, args = _spine(e)
            fn_pos = _builtin_fn_pos(head)

            def norm_args(i, done):
                if i == len(args):
                    return k(_rebuild(done[0], done[1:], e))
                normalize = fn_arg if i == fn_pos else name_it
                return normalize(args[i], lambda v: norm_args(i + 1,
                                                              done + [v]))

            return name_it(head, lambda h: norm_args(0, [h]))
        if isinstance(e, Let):
            value = tail(e.value) if isinstance(e.value, Lam) else None
            if value is not None:
                return Let(e.name, e.annot, value, norm(e.body, k),
                           span=e.span, ty=e.ty)
            return norm(e.value, lambda v: Let(
                e.name, e.annot, v, norm(e.body, k), span=e.span, ty=e.ty))
        if isinstance(e, RecLets):
            bindings = [RecBinding(b.name, b.annot, tail(b.value), b.span)
                        for b in e.bindings]
            return RecLets(bindings, norm(e.body, k), span=e.span, ty=e.ty)
        if isinstance(e, Match):
            return name_it(e.scrut, lambda s: k(Match(
                s, e.pat, tail(e.thn), tail(e.els), span=e.span, ty=e.ty)))
        if isinstance(e, RecordE):
            labels = [l for l, _ in e.fields]
            return norm_many([v for _, v in e.fields], lambda vs: k(
                RecordE(list(zip(labels, vs)), span=e.span, ty=e.ty)))
        if isinstance(e, SeqE):
            return norm_many(e.items, lambda vs: k(
                SeqE(vs, span=e.span, ty=e.ty)))
        if isinstance(e, Accelerate):
            return k(Accelerate(tail(e.operand), span=e.span, ty=e.ty))
        if isinstance(e, MapE):
            return fn_arg(e.fn, lambda f: name_it(e.seq, lambda s: k(
                MapE(f, s, span=e.span, ty=e.ty))))
        if isinstance(e, Map2E):
            return fn_arg(e.fn, lambda f: name_it(e.seq1, lambda s1: name_it(
                e.seq2, lambda s2: k(Map2E(f, s1, s2, span=e.span, ty=e.ty)))))
        if isinstance(e, ReduceE):
            return fn_arg(e.fn, lambda f: name_it(e.acc, lambda a: name_it(
                e.seq, lambda s: k(ReduceE(f, a, s, span=e.span, ty=e.ty)))))
        if isinstance(e, FlattenE):
            return name_it(e.seq, lambda s: k(FlattenE(s, span=e.span, ty=e.ty)))
        if isinstance(e, LoopE):
            return name_it(e.count, lambda n: fn_arg(e.fn, lambda f: k(
                LoopE(n, f, span=e.span, ty=e.ty))))
        raise AssertionError(e)

    def tail(e: Expr) -> Expr:
        return norm(e, lambda v: v)

    return tail(e)
