"""pmx: a compiler and simulated-device runtime for a small typed
functional language with `accelerate` expressions.

The library entry points are `compile_source` and `run_source`; the `pmx`
command line tool wraps them.
"""

from .classify import (
    BackendSplit, Classification, classify_binding, split_backends,
)
from .extraction import extract, free_vars
from .interp import eval_accel_sim, eval_sequential, render_value
from .parser import parse
from .pipeline import (
    Compiled, DUMP_STAGES, RunResult, classification_table, compile_source,
    run_source,
)
from .pretty import pretty
from .runtime import (
    Heap, Interval, TensorView, check_rank, check_regular, marshal_in,
    marshal_out, merge_intervals, merge_overlapping_intervals,
)
from .symbolize import alpha_eq, symbolize
from .syntax import Diagnostic, Diagnostics
from .transform import (
    check_no_nested_accelerate, lambda_lift, rewrite_accelerate, to_anf,
)
from .typecheck import typecheck
from .wellformed import check_cuda, check_futhark, check_well_formed

__all__ = [
    "BackendSplit", "Classification", "Compiled", "DUMP_STAGES",
    "Diagnostic", "Diagnostics", "Heap", "Interval", "RunResult",
    "TensorView", "alpha_eq", "check_cuda", "check_futhark",
    "check_no_nested_accelerate", "check_rank", "check_regular",
    "check_well_formed", "classification_table", "classify_binding",
    "compile_source", "eval_accel_sim", "eval_sequential", "extract",
    "free_vars", "lambda_lift", "marshal_in", "marshal_out",
    "merge_intervals", "merge_overlapping_intervals", "parse", "pretty",
    "rewrite_accelerate", "run_source", "split_backends", "symbolize",
    "to_anf", "typecheck", "render_value",
]
