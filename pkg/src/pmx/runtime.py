"""Runtime values, tensor heap, assumption checks and device marshaling.

Tensors are views (buffer id, element offset, shape) over flat buffers in a
heap, so several tensors may alias one buffer. Before a simulated device
call, the input tensors' memory ranges are merged into non-overlapping
intervals; one device root buffer is allocated per interval and every input
tensor is rebound as a view into its root. Copy-back is one write per root,
which makes the result independent of copy order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .syntax import Diagnostic, Diagnostics, Expr, Name, Span


def runtime_error(message: str, span: Span = Span()) -> Diagnostics:
    return Diagnostics([Diagnostic("RuntimeError", message, span)])


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------
# Scalars are plain Python ints/floats/bools/1-char strings; sequences are
# Python lists; records are dicts; unit is the empty dict.

class Heap:
    """Flat numeric buffers addressed by id; shared by host and device."""

    def __init__(self) -> None:
        self.buffers: dict[int, list] = {}
        self._next = 0

    def alloc(self, data: list) -> int:
        bid = self._next
        self._next += 1
        self.buffers[bid] = data
        return bid


@dataclass(frozen=True)
class TensorView:
    buffer: int
    offset: int
    shape: tuple[int, ...]
    elem: str  # "int" | "float"

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def strides(self) -> tuple[int, ...]:
        out = []
        acc = 1
        for d in reversed(self.shape):
            out.append(acc)
            acc *= d
        return tuple(reversed(out))

    def linear(self, idx: list[int], span: Span = Span()) -> int:
        if len(idx) != len(self.shape):
            raise runtime_error(
                f"tensor index of rank {len(idx)} against rank "
                f"{len(self.shape)} tensor", span)
        pos = self.offset
        for i, (k, d, s) in enumerate(zip(idx, self.shape, self.strides())):
            if not 0 <= k < d:
                raise runtime_error(
                    f"tensor index {k} out of bounds for dimension {i} "
                    f"of size {d}", span)
            pos += k * s
        return pos


class Closure:
    __slots__ = ("param", "body", "env", "accel")

    def __init__(self, param: Name, body: Expr, env, accel=None):
        self.param = param
        self.body = body
        self.env = env
        self.accel = accel  # (binding name, verdict) for accelerate bindings


class BuiltinPartial:
    __slots__ = ("name", "args")

    def __init__(self, name: str, args: tuple):
        self.name = name
        self.args = args


class AccelFn:
    """An accelerate binding awaiting full application in accel-sim mode."""

    __slots__ = ("name", "verdict", "params", "body", "env", "args")

    def __init__(self, name: Name, verdict, params: list[Name], body: Expr,
                 env, args: tuple = ()):
        self.name = name
        self.verdict = verdict
        self.params = params
        self.body = body
        self.env = env
        self.args = args


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------

def check_regular(value, path: str = "argument") -> None:
    """Verify nested sequences are regular (uniform inner lengths)."""
    if isinstance(value, list):
        lengths = {len(v) for v in value if isinstance(v, list)}
        if len(lengths) > 1:
            raise runtime_error(
                f"irregular sequence at {path}: inner lengths "
                f"{sorted(lengths)}")
        for i, v in enumerate(value):
            check_regular(v, f"{path}[{i}]")
    elif isinstance(value, dict):
        for label, v in value.items():
            check_regular(v, f"{path}.{label}")


def check_rank(t: TensorView, max_rank: int) -> None:
    if len(t.shape) > max_rank:
        raise runtime_error(
            f"tensor rank {len(t.shape)} exceeds bound {max_rank}")


def check_ranks(value, max_rank: int) -> None:
    for t in collect_tensors(value):
        check_rank(t, max_rank)


# ---------------------------------------------------------------------------
# Interval merging (alias reconstruction)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    start: int
    end: int  # exclusive; start < end


def merge_intervals(pairs: list[tuple[int, int]]) -> list[Interval]:
    """Merge overlapping (and touching) half-open intervals.

    Sorts by start, then extends the top of a stack of merged intervals
    whenever the next interval starts at or before its end.
    """
    assert pairs
    ordered = sorted(pairs, key=lambda p: (p[0], p[1]))
    stack: list[list[int]] = [list(ordered[0])]
    for start, end in ordered[1:]:
        top = stack[-1]
        if top[1] >= start:
            top[1] = max(top[1], end)
        else:
            stack.append([start, end])
    return [Interval(s, e) for s, e in stack]


def merge_overlapping_intervals(tensors: list[TensorView]) -> list[Interval]:
    """Alias-merge intervals of tensor views sharing one underlying buffer."""
    assert tensors
    assert len({t.buffer for t in tensors}) == 1, \
        "views over distinct buffers must be partitioned first"
    return merge_intervals([(t.offset, t.offset + max(t.size, 1))
                            for t in tensors])


# ---------------------------------------------------------------------------
# Marshaling
# ---------------------------------------------------------------------------

def collect_tensors(value) -> list[TensorView]:
    out: list[TensorView] = []

    def go(v):
        if isinstance(v, TensorView):
            out.append(v)
        elif isinstance(v, list):
            for x in v:
                go(x)
        elif isinstance(v, dict):
            for x in v.values():
                go(x)

    go(value)
    return out


@dataclass
class _Root:
    device_buffer: int
    host_buffer: int
    start: int
    end: int


@dataclass
class DeviceArena:
    roots: list[_Root] = field(default_factory=list)
    # (host buffer, merged interval) lookup for rebinding views
    _by_host: dict[int, list[_Root]] = field(default_factory=dict)

    def root_for(self, view: TensorView) -> _Root:
        for root in self._by_host[view.buffer]:
            if root.start <= view.offset and \
                    view.offset + max(view.size, 1) <= root.end:
                return root
        raise AssertionError("input tensor not covered by any root interval")

    def root_of_device_buffer(self, bid: int) -> Optional[_Root]:
        for root in self.roots:
            if root.device_buffer == bid:
                return root
        return None


def marshal_in(args: list, heap: Heap) -> tuple[list, DeviceArena]:
    """Copy arguments to the simulated device, reconstructing tensor aliases.

    Per host buffer, the input tensors' intervals are merged; one device root
    buffer is allocated per merged interval (data copied once) and each input
    tensor becomes a view into its root. Other values are deep-copied.
    """
    arena = DeviceArena()
    by_buffer: dict[int, list[TensorView]] = {}
    for t in collect_tensors(args):
        by_buffer.setdefault(t.buffer, []).append(t)
    for host_buf in sorted(by_buffer):
        for iv in merge_overlapping_intervals(by_buffer[host_buf]):
            data = heap.buffers[host_buf][iv.start:iv.end]
            dev = heap.alloc(data)
            root = _Root(dev, host_buf, iv.start, iv.end)
            arena.roots.append(root)
            arena._by_host.setdefault(host_buf, []).append(root)

    def copy_in(v):
        if isinstance(v, TensorView):
            root = arena.root_for(v)
            return TensorView(root.device_buffer, v.offset - root.start,
                              v.shape, v.elem)
        if isinstance(v, list):
            return [copy_in(x) for x in v]
        if isinstance(v, dict):
            return {l: copy_in(x) for l, x in v.items()}
        if isinstance(v, (Closure, BuiltinPartial, AccelFn)):
            raise AssertionError("cannot marshal a function value")
        return v

    return [copy_in(v) for v in args], arena


def marshal_out(arena: DeviceArena, heap: Heap, result):
    """Copy each device root back to its host interval once; convert the
    returned value back to host views."""
    for root in arena.roots:
        heap.buffers[root.host_buffer][root.start:root.end] = \
            heap.buffers[root.device_buffer]

    def copy_out(v):
        if isinstance(v, TensorView):
            root = arena.root_of_device_buffer(v.buffer)
            if root is not None:
                return TensorView(root.host_buffer, root.start + v.offset,
                                  v.shape, v.elem)
            return v  # tensor freshly allocated on the device
        if isinstance(v, list):
            return [copy_out(x) for x in v]
        if isinstance(v, dict):
            return {l: copy_out(x) for l, x in v.items()}
        return v

    return copy_out(result)
