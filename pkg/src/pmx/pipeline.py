"""End-to-end compilation pipeline and the run entry points.

Stages: parse, symbolize, typecheck, nested-accelerate check, accelerate
rewrite, lambda lifting (re-typechecked), extraction of the accelerated
slice, backend classification and split, ANF of the per-backend programs
(re-typechecked) and per-backend well-formedness checking. Any stage aborts
by raising Diagnostics.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

from .classify import BackendSplit, split_backends
from .extraction import extract
from .interp import Heap, eval_accel_sim, eval_sequential, render_value
from .parser import parse
from .symbolize import symbolize
from .syntax import Diagnostics, Expr, Name
from .transform import (
    AccelSet, check_no_nested_accelerate, lambda_lift, rewrite_accelerate,
    to_anf,
)
from .typecheck import typecheck
from .wellformed import check_well_formed


@dataclass
class Compiled:
    source: str
    ast: Expr                 # symbolized, typechecked input program
    lifted: Expr              # lambda-lifted host program (the one executed)
    accel: AccelSet           # accelerate binding names
    extracted: Expr           # accelerated slice of the lifted program
    split: BackendSplit
    anf: Expr                 # extracted slice in A-normal form
    anf_fut: Expr             # functional-backend program in A-normal form
    anf_cu: Expr              # CUDA-backend program in A-normal form

    def dump(self, stage: str) -> Expr:
        stages = {"lifted": self.lifted, "extracted": self.extracted,
                  "anf": self.anf, "fut": self.anf_fut, "cu": self.anf_cu}
        return stages[stage]


DUMP_STAGES = ("lifted", "extracted", "anf", "fut", "cu")


def compile_source(source: str) -> Compiled:
    ast = typecheck(symbolize(parse(source)))
    check_no_nested_accelerate(ast)
    rewritten, accel = rewrite_accelerate(ast)
    lifted = typecheck(lambda_lift(rewritten, accel))
    _, extracted = extract(accel, lifted)
    split = split_backends(accel, extracted)
    anf = typecheck(to_anf(extracted))
    anf_fut = typecheck(to_anf(split.fut_program))
    anf_cu = typecheck(to_anf(split.cu_program))
    wf = check_well_formed(
        BackendSplit(split.fut_idents, split.cu_idents, anf_fut, anf_cu,
                     split.verdicts, split.counts))
    if wf:
        raise Diagnostics(wf)
    return Compiled(source, ast, lifted, accel, extracted, split,
                    anf, anf_fut, anf_cu)


@dataclass
class RunResult:
    value: object
    heap: Heap
    stdout: str = ""

    def rendered(self) -> str:
        return render_value(self.value, self.heap)


def run_source(source: str, *, mode: str = "debug", workers: int = 1,
               max_rank: int = 3, runtime_checks: bool | None = None,
               check_determinism: bool = False,
               capture_output: bool = False, stdout=None) -> RunResult:
    """Compile and evaluate a program. Mode is "debug" or "accel"."""
    compiled = compile_source(source)
    out = io.StringIO() if capture_output else stdout
    if mode == "debug":
        checks = True if runtime_checks is None else runtime_checks
        value, heap = eval_sequential(
            compiled.lifted, compiled.split.verdicts,
            max_rank=max_rank, checks=checks, stdout=out)
    else:
        assert mode == "accel"
        value, heap = eval_accel_sim(
            compiled.lifted, compiled.split.verdicts, workers=workers,
            max_rank=max_rank, checks=bool(runtime_checks),
            check_determinism=check_determinism, stdout=out)
    text = out.getvalue() if capture_output else ""
    return RunResult(value, heap, text)


def classification_table(compiled: Compiled) -> list[tuple[str, str, int, int]]:
    """Rows (binding, verdict, functional count, loop count), stable order."""
    rows = []
    for name in sorted(compiled.accel, key=lambda n: n.uid):
        p_fut, p_cu = compiled.split.counts.get(name, (0, 0))
        rows.append((name.text, compiled.split.verdicts[name].value,
                     p_fut, p_cu))
    return rows
