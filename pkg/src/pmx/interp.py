"""Tree-walking evaluator with two modes.

Debug mode runs the whole program sequentially on the host and checks the
runtime assumptions (regular sequences, tensor rank bound) at every call of
an accelerated binding. Accel mode simulates offloading: a fully applied
accelerated binding marshals its arguments to a device heap, evaluates its
body with a worker pool executing the parallel constructs, and copies the
device buffers back. Parallel constructs encountered while already inside a
parallel region run sequentially on their worker.
"""

from __future__ import annotations

import copy
import math
import sys
import threading
from concurrent.futures import ThreadPoolExecutor

from .classify import Classification
from .runtime import (
    AccelFn, BuiltinPartial, Closure, Heap, TensorView, check_ranks,
    check_regular, collect_tensors, marshal_in, marshal_out, runtime_error,
)
from .syntax import (
    Accelerate, App, BUILTIN_ARITY, CBool, CBuiltin, CChar, CFloat, CInt,
    ConstE, Expr, FlattenE, Lam, Let, LoopE, Map2E, MapE, Match, Name, Never,
    PConst, PRecord, PVar, Pattern, RecLets, RecordE, ReduceE, SeqE, Span,
    Var,
)

_INT_MIN = -(1 << 63)
_INT_MASK = (1 << 64) - 1


def _wrap(x: int) -> int:
    return ((x - _INT_MIN) & _INT_MASK) + _INT_MIN


class Env:
    __slots__ = ("parent", "frame")

    def __init__(self, parent, frame: dict):
        self.parent = parent
        self.frame = frame

    def lookup(self, name: Name):
        env = self
        while env is not None:
            if name in env.frame:
                return env.frame[name]
            env = env.parent
        raise AssertionError(f"unbound variable {name!r} at runtime")


class Ctx:
    def __init__(self, *, mode: str, heap: Heap, verdicts: dict,
                 workers: int = 1, max_rank: int = 3, checks: bool = False,
                 check_determinism: bool = False, stdout=None):
        assert mode in ("debug", "accel")
        self.mode = mode
        self.heap = heap
        self.verdicts = verdicts
        self.workers = max(workers, 1)
        self.max_rank = max_rank
        self.checks = checks
        self.check_determinism = check_determinism
        self.stdout = stdout if stdout is not None else sys.stdout
        self.device = False
        self.tls = threading.local()

    def device_clone(self) -> "Ctx":
        d = copy.copy(self)
        d.device = True
        d.tls = threading.local()
        return d

    @property
    def in_parallel(self) -> bool:
        return getattr(self.tls, "in_parallel", False)

    @property
    def run_parallel(self) -> bool:
        return self.device and not self.in_parallel


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def eval_expr(e: Expr, env: Env, ctx: Ctx):
    while True:
        if isinstance(e, Var):
            return env.lookup(e.name)
        if isinstance(e, ConstE):
            c = e.const
            if isinstance(c, (CInt, CFloat, CBool, CChar)):
                return c.value
            assert isinstance(c, CBuiltin)
            return BuiltinPartial(c.name, ())
        if isinstance(e, Lam):
            return Closure(e.param, e.body, env)
        if isinstance(e, App):
            fv = eval_expr(e.fn, env, ctx)
            av = eval_expr(e.arg, env, ctx)
            return apply_fn(fv, av, ctx, e.span)
        if isinstance(e, Let):
            env = Env(env, {e.name: _bind_value(e.name, e.value, env, ctx)})
            e = e.body
            continue
        if isinstance(e, RecLets):
            env = Env(env, {})
            late = []
            for b in e.bindings:
                v = _bind_value(b.name, b.value, env, ctx, defer=True)
                if v is _DEFER:
                    late.append(b)
                else:
                    env.frame[b.name] = v
            for b in late:
                env.frame[b.name] = eval_expr(b.value, env, ctx)
            e = e.body
            continue
        if isinstance(e, Match):
            scrut = eval_expr(e.scrut, env, ctx)
            bound = match_value(e.pat, scrut)
            if bound is None:
                e = e.els
            else:
                env = Env(env, bound)
                e = e.thn
            continue
        if isinstance(e, Never):
            raise runtime_error("reached a never expression "
                                "(no pattern matched)", e.span)
        if isinstance(e, RecordE):
            return {l: eval_expr(v, env, ctx) for l, v in e.fields}
        if isinstance(e, SeqE):
            return [eval_expr(v, env, ctx) for v in e.items]
        if isinstance(e, Accelerate):
            e = e.operand
            continue
        if isinstance(e, MapE):
            f = eval_expr(e.fn, env, ctx)
            s = _expect_seq(eval_expr(e.seq, env, ctx), "map", e.span)
            return eval_map(f, s, ctx, e.span)
        if isinstance(e, Map2E):
            f = eval_expr(e.fn, env, ctx)
            s1 = _expect_seq(eval_expr(e.seq1, env, ctx), "map2", e.span)
            s2 = _expect_seq(eval_expr(e.seq2, env, ctx), "map2", e.span)
            if len(s1) != len(s2):
                raise runtime_error(
                    f"map2 over sequences of different lengths "
                    f"({len(s1)} and {len(s2)})", e.span)
            return eval_map2(f, s1, s2, ctx, e.span)
        if isinstance(e, ReduceE):
            f = eval_expr(e.fn, env, ctx)
            acc = eval_expr(e.acc, env, ctx)
            s = _expect_seq(eval_expr(e.seq, env, ctx), "reduce", e.span)
            return eval_reduce(f, acc, s, ctx, e.span)
        if isinstance(e, FlattenE):
            s = _expect_seq(eval_expr(e.seq, env, ctx), "flatten", e.span)
            out = []
            for x in s:
                out.extend(_expect_seq(x, "flatten", e.span))
            return out
        if isinstance(e, LoopE):
            n = eval_expr(e.count, env, ctx)
            f = eval_expr(e.fn, env, ctx)
            eval_loop(n, f, ctx, e.span)
            return {}
        raise AssertionError(e)


_DEFER = object()


def _bind_value(name: Name, value: Expr, env: Env, ctx: Ctx, defer=False):
    """Evaluate a let/recursive binding, intercepting accelerated bindings."""
    if name in ctx.verdicts:
        verdict = ctx.verdicts[name]
        if ctx.mode == "accel":
            params = []
            body = value
            while isinstance(body, Lam):
                params.append(body.param)
                body = body.body
            assert params, "accelerated binding must be a function after lifting"
            return AccelFn(name, verdict, params, body, env)
        clo = eval_expr(value, env, ctx)
        assert isinstance(clo, Closure)
        clo.accel = (name, verdict)
        return clo
    if isinstance(value, Lam):
        return Closure(value.param, value.body, env)
    if defer:
        return _DEFER
    return eval_expr(value, env, ctx)


def apply_fn(fv, av, ctx: Ctx, span: Span):
    if isinstance(fv, Closure):
        if fv.accel is not None and ctx.mode == "debug" and ctx.checks:
            _check_arg(fv.accel[1], av, ctx)
        result = eval_expr(fv.body, Env(fv.env, {fv.param: av}), ctx)
        if fv.accel is not None and isinstance(result, Closure) \
                and result.accel is None:
            result.accel = fv.accel
        return result
    if isinstance(fv, AccelFn):
        args = fv.args + (av,)
        if len(args) == len(fv.params):
            return device_call(fv, list(args), ctx, span)
        return AccelFn(fv.name, fv.verdict, fv.params, fv.body, fv.env, args)
    if isinstance(fv, BuiltinPartial):
        args = fv.args + (av,)
        if len(args) == BUILTIN_ARITY[fv.name]:
            return exec_builtin(fv.name, list(args), ctx, span)
        return BuiltinPartial(fv.name, args)
    raise runtime_error("application of a non-function value", span)


def _check_arg(verdict, value, ctx: Ctx) -> None:
    if verdict is Classification.FUTHARK:
        check_regular(value)
    elif verdict is Classification.CUDA:
        check_ranks(value, ctx.max_rank)


def device_call(fn: AccelFn, args: list, ctx: Ctx, span: Span):
    if ctx.checks:
        for a in args:
            _check_arg(fn.verdict, a, ctx)
    dev_args, arena = marshal_in(args, ctx.heap)
    env = Env(fn.env, dict(zip(fn.params, dev_args)))
    result = eval_expr(fn.body, env, ctx.device_clone())
    return marshal_out(arena, ctx.heap, result)


def match_value(pat: Pattern, value):
    if isinstance(pat, PVar):
        return {pat.name: value}
    if isinstance(pat, PConst):
        c = pat.const
        if isinstance(c, CBool):
            ok = isinstance(value, bool) and value == c.value
        elif isinstance(c, CInt):
            ok = isinstance(value, int) and not isinstance(value, bool) \
                and value == c.value
        elif isinstance(c, CFloat):
            ok = isinstance(value, float) and value == c.value
        else:
            ok = isinstance(value, str) and value == c.value
        return {} if ok else None
    assert isinstance(pat, PRecord)
    if not isinstance(value, dict):
        return None
    out: dict = {}
    for label, sub in pat.fields:
        if label not in value:
            return None
        bound = match_value(sub, value[label])
        if bound is None:
            return None
        out.update(bound)
    return out


# ---------------------------------------------------------------------------
# Parallel constructs
# ---------------------------------------------------------------------------

def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    spans = [(i * n // workers, (i + 1) * n // workers)
             for i in range(workers)]
    return [(lo, hi) for lo, hi in spans if lo < hi]


def _run_chunks(ctx: Ctx, chunks, work) -> list:
    """Run work(lo, hi) for each chunk on the worker pool; ordered results."""

    def task(lo, hi):
        ctx.tls.in_parallel = True
        try:
            return work(lo, hi)
        finally:
            ctx.tls.in_parallel = False

    with ThreadPoolExecutor(max_workers=ctx.workers) as pool:
        futures = [pool.submit(task, lo, hi) for lo, hi in chunks]
        return [f.result() for f in futures]


def eval_map(f, s: list, ctx: Ctx, span: Span) -> list:
    if not ctx.run_parallel or not s:
        return [apply_fn(f, x, ctx, span) for x in s]
    results = [None] * len(s)

    def work(lo, hi):
        for j in range(lo, hi):
            results[j] = apply_fn(f, s[j], ctx, span)

    _run_chunks(ctx, _chunks(len(s), ctx.workers), work)
    return results


def eval_map2(f, s1: list, s2: list, ctx: Ctx, span: Span) -> list:
    if not ctx.run_parallel or not s1:
        return [apply_fn(apply_fn(f, x, ctx, span), y, ctx, span)
                for x, y in zip(s1, s2)]
    results = [None] * len(s1)

    def work(lo, hi):
        for j in range(lo, hi):
            results[j] = apply_fn(apply_fn(f, s1[j], ctx, span), s2[j],
                                  ctx, span)

    _run_chunks(ctx, _chunks(len(s1), ctx.workers), work)
    return results


def _fold(f, acc, items, ctx: Ctx, span: Span):
    for x in items:
        acc = apply_fn(apply_fn(f, acc, ctx, span), x, ctx, span)
    return acc


def eval_reduce(f, acc, s: list, ctx: Ctx, span: Span):
    if not ctx.run_parallel or not s:
        return _fold(f, acc, s, ctx, span)
    chunks = _chunks(len(s), ctx.workers)
    partials = _run_chunks(
        ctx, chunks, lambda lo, hi: _fold(f, acc, s[lo:hi], ctx, span))
    total = partials[0]
    for p in partials[1:]:
        total = apply_fn(apply_fn(f, total, ctx, span), p, ctx, span)
    if ctx.check_determinism:
        reference = _fold(f, acc, s, ctx, span)
        if not _values_close(total, reference, 1e-6):
            print("warning: reduce result depends on the evaluation order "
                  f"(blocked {total!r} vs sequential {reference!r}); the "
                  "operator may not be associative", file=sys.stderr)
    return total


def eval_loop(n: int, f, ctx: Ctx, span: Span) -> None:
    if n <= 0:
        return
    if not ctx.run_parallel:
        for i in range(n):
            apply_fn(f, i, ctx, span)
        return

    def work(lo, hi):
        for i in range(lo, hi):
            apply_fn(f, i, ctx, span)

    _run_chunks(ctx, _chunks(n, ctx.workers), work)


def _values_close(a, b, rel: float) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        if not isinstance(a, (int, float)) or not isinstance(b, (int, float)):
            return False
        return math.isclose(a, b, rel_tol=rel, abs_tol=rel)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(
            _values_close(x, y, rel) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(
            _values_close(a[k], b[k], rel) for k in a)
    return a == b


# ---------------------------------------------------------------------------
# Builtins
# ---------------------------------------------------------------------------

def exec_builtin(name: str, args: list, ctx: Ctx, span: Span):
    if name == "addi":
        return _wrap(args[0] + args[1])
    if name == "subi":
        return _wrap(args[0] - args[1])
    if name == "muli":
        return _wrap(args[0] * args[1])
    if name == "divi":
        if args[1] == 0:
            raise runtime_error("integer division by zero", span)
        q = abs(args[0]) // abs(args[1])
        return _wrap(-q if (args[0] < 0) != (args[1] < 0) else q)
    if name == "modi":
        if args[1] == 0:
            raise runtime_error("integer modulo by zero", span)
        q = abs(args[0]) // abs(args[1])
        if (args[0] < 0) != (args[1] < 0):
            q = -q
        return _wrap(args[0] - q * args[1])
    if name == "negi":
        return _wrap(-args[0])
    if name == "addf":
        return args[0] + args[1]
    if name == "subf":
        return args[0] - args[1]
    if name == "mulf":
        return args[0] * args[1]
    if name == "divf":
        if args[1] == 0.0:
            raise runtime_error("float division by zero", span)
        return args[0] / args[1]
    if name == "negf":
        return -args[0]
    if name in ("eqi", "eqf"):
        return args[0] == args[1]
    if name == "neqi":
        return args[0] != args[1]
    if name in ("lti", "ltf"):
        return args[0] < args[1]
    if name in ("gti", "gtf"):
        return args[0] > args[1]
    if name in ("leqi", "leqf"):
        return args[0] <= args[1]
    if name in ("geqi", "geqf"):
        return args[0] >= args[1]
    if name == "int2float":
        return float(args[0])
    if name == "floor":
        return _wrap(math.floor(args[0]))
    if name in ("exp", "log", "sin", "cos"):
        try:
            return getattr(math, name)(args[0])
        except (ValueError, OverflowError) as exc:
            raise runtime_error(f"{name}: {exc}", span) from None
    if name == "sqrtf":
        if args[0] < 0:
            raise runtime_error("sqrtf of a negative number", span)
        return math.sqrt(args[0])
    if name == "int2string":
        return list(str(args[0]))
    if name == "float2string":
        return list(repr(args[0]))
    if name == "create":
        n, f = args
        if n < 0:
            raise runtime_error(f"create with negative length {n}", span)
        return [apply_fn(f, i, ctx, span) for i in range(n)]
    if name == "length":
        return len(_expect_seq(args[0], "length", span))
    if name == "get":
        s, i = args
        _seq_bounds(s, i, "get", span)
        return s[i]
    if name == "set":
        s, i, v = args
        _seq_bounds(s, i, "set", span)
        out = list(s)
        out[i] = v
        return out
    if name == "concat":
        return _expect_seq(args[0], "concat", span) + \
            _expect_seq(args[1], "concat", span)
    if name == "foldl":
        f, acc, s = args
        return _fold(f, acc, _expect_seq(s, "foldl", span), ctx, span)
    if name == "reverse":
        return list(reversed(_expect_seq(args[0], "reverse", span)))
    if name == "tensorCreate":
        return _tensor_create(args[0], args[1], ctx, span)
    if name == "tensorGet":
        t, idx = args
        return ctx.heap.buffers[t.buffer][t.linear(idx, span)]
    if name == "tensorSet":
        t, idx, v = args
        ctx.heap.buffers[t.buffer][t.linear(idx, span)] = v
        return {}
    if name == "tensorSub":
        t, ofs, length = args
        if not t.shape:
            raise runtime_error("tensorSub of a rank-0 tensor", span)
        if ofs < 0 or length < 0 or ofs + length > t.shape[0]:
            raise runtime_error(
                f"tensorSub range [{ofs}, {ofs + length}) out of bounds for "
                f"dimension of size {t.shape[0]}", span)
        stride0 = t.strides()[0]
        return TensorView(t.buffer, t.offset + ofs * stride0,
                          (length,) + t.shape[1:], t.elem)
    if name == "tensorShape":
        return list(args[0].shape)
    if name == "print":
        ctx.stdout.write(_as_string(args[0], span))
        ctx.stdout.flush()
        return {}
    if name == "readFile":
        path = _as_string(args[0], span)
        try:
            with open(path, "r") as f:
                return list(f.read())
        except OSError as exc:
            raise runtime_error(f"readFile: {exc}", span) from None
    if name == "writeFile":
        path = _as_string(args[0], span)
        try:
            with open(path, "w") as f:
                f.write(_as_string(args[1], span))
        except OSError as exc:
            raise runtime_error(f"writeFile: {exc}", span) from None
        return {}
    raise AssertionError(name)


def _tensor_create(shape, f, ctx: Ctx, span: Span) -> TensorView:
    if not isinstance(shape, list) or any(
            not isinstance(d, int) or isinstance(d, bool) or d < 0
            for d in shape):
        raise runtime_error("tensorCreate shape must be a sequence of "
                            "non-negative integers", span)
    data = []
    idx = [0] * len(shape)
    total = math.prod(shape)
    for _ in range(total):
        data.append(apply_fn(f, list(idx), ctx, span))
        for d in range(len(shape) - 1, -1, -1):
            idx[d] += 1
            if idx[d] < shape[d]:
                break
            idx[d] = 0
    elem = "float" if data and isinstance(data[0], float) else "int"
    return TensorView(ctx.heap.alloc(data), 0, tuple(shape), elem)


def _expect_seq(v, what: str, span: Span) -> list:
    if not isinstance(v, list):
        raise runtime_error(f"{what} expects a sequence", span)
    return v


def _seq_bounds(s, i: int, what: str, span: Span) -> None:
    s = _expect_seq(s, what, span)
    if not 0 <= i < len(s):
        raise runtime_error(
            f"{what} index {i} out of bounds for sequence of length {len(s)}",
            span)


def _as_string(v, span: Span) -> str:
    s = _expect_seq(v, "string builtin", span)
    if any(not isinstance(c, str) for c in s):
        raise runtime_error("expected a sequence of characters", span)
    return "".join(s)


# ---------------------------------------------------------------------------
# Rendering and entry points
# ---------------------------------------------------------------------------

def render_value(v, heap: Heap) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return f"'{v}'"
    if isinstance(v, list):
        if v and all(isinstance(c, str) for c in v):
            return '"' + "".join(v) + '"'
        return "[" + ", ".join(render_value(x, heap) for x in v) + "]"
    if isinstance(v, dict):
        if not v:
            return "{}"
        inner = ", ".join(f"{l} = {render_value(x, heap)}"
                          for l, x in v.items())
        return "{" + inner + "}"
    if isinstance(v, TensorView):
        buf = heap.buffers[v.buffer]

        def at(offset, shape):
            if not shape:
                return render_value(buf[offset], heap)
            stride = math.prod(shape[1:])
            return "[" + ", ".join(at(offset + i * stride, shape[1:])
                                   for i in range(shape[0])) + "]"

        return f"tensor{at(v.offset, v.shape)}"
    if isinstance(v, (Closure, BuiltinPartial, AccelFn)):
        return "<function>"
    raise AssertionError(v)


def eval_sequential(program: Expr, verdicts: dict | None = None, *,
                    max_rank: int = 3, checks: bool = True,
                    stdout=None) -> tuple[object, Heap]:
    """Debug-mode evaluation: sequential, with runtime assumption checks."""
    ctx = Ctx(mode="debug", heap=Heap(), verdicts=verdicts or {},
              max_rank=max_rank, checks=checks, stdout=stdout)
    value = eval_expr(program, Env(None, {}), ctx)
    return value, ctx.heap


def eval_accel_sim(program: Expr, verdicts: dict, *, workers: int = 1,
                   max_rank: int = 3, checks: bool = False,
                   check_determinism: bool = False,
                   stdout=None) -> tuple[object, Heap]:
    """Accel-mode evaluation with a simulated device of `workers` workers."""
    ctx = Ctx(mode="accel", heap=Heap(), verdicts=verdicts, workers=workers,
              max_rank=max_rank, checks=checks,
              check_determinism=check_determinism, stdout=stdout)
    value = eval_expr(program, Env(None, {}), ctx)
    return value, ctx.heap
