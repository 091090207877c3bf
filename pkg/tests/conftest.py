import math
import pathlib
import sys

import pytest

sys.setrecursionlimit(100_000)

PROGRAMS = pathlib.Path(__file__).resolve().parent.parent / "programs"


@pytest.fixture(scope="session")
def programs_dir() -> pathlib.Path:
    return PROGRAMS


def read_program(name: str) -> str:
    return (PROGRAMS / name).read_text()


def tokens_match(a: str, b: str, *, float_rel: float) -> bool:
    """Compare two outputs token by token; floats by relative tolerance."""
    ta, tb = a.split(), b.split()
    if len(ta) != len(tb):
        return False
    for x, y in zip(ta, tb):
        try:
            fx, fy = float(x), float(y)
        except ValueError:
            if x != y:
                return False
            continue
        if "." in x or "e" in x or "." in y or "e" in y:
            if not math.isclose(fx, fy, rel_tol=float_rel, abs_tol=float_rel):
                return False
        elif x != y:
            return False
    return True
