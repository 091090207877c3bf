import pytest

from pmx.cli import main

GOOD = """
let f = lam s. reduce addi 0 (map (lam x. muli x x) s) in
let r = accelerate (f [1, 2, 3]) in
print (int2string r)
"""

BAD_TYPE = "addi 1 true"

BAD_CLASSIFY = "let r = accelerate (addi 1 2) in r"


@pytest.fixture
def good(tmp_path):
    p = tmp_path / "good.pmx"
    p.write_text(GOOD)
    return str(p)


def write(tmp_path, src):
    p = tmp_path / "prog.pmx"
    p.write_text(src)
    return str(p)


def test_run_debug(good, capsys):
    assert main(["run", good]) == 0
    assert capsys.readouterr().out == "14"


def test_run_accel(good, capsys):
    assert main(["run", "--mode", "accel", "--workers", "4", good]) == 0
    assert capsys.readouterr().out == "14"


def test_run_prints_final_value(tmp_path, capsys):
    path = write(tmp_path, "let r = accelerate (reduce addi 0 [1, 2]) in r")
    assert main(["run", path]) == 0
    assert capsys.readouterr().out == "3\n"


def test_run_unit_result_prints_nothing(tmp_path, capsys):
    path = write(tmp_path, "let r = accelerate (reduce addi 0 [1]) in {}")
    assert main(["run", path]) == 0
    assert capsys.readouterr().out == ""


def test_check_reports_table(good, capsys):
    assert main(["check", good]) == 0
    out = capsys.readouterr().out
    assert "ok" in out.splitlines()[-1]
    # one row per accelerated binding, with its verdict and counts
    assert any(line.startswith("a ") and "Futhark" in line
               for line in out.splitlines())


def test_type_error_exit_code_and_stderr(tmp_path, capsys):
    path = write(tmp_path, BAD_TYPE)
    assert main(["run", path]) == 1
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "TypeError" in captured.err and path in captured.err


def test_classify_error(tmp_path, capsys):
    path = write(tmp_path, BAD_CLASSIFY)
    assert main(["check", path]) == 1
    assert "ClassifyError" in capsys.readouterr().err


def test_runtime_error(tmp_path, capsys):
    path = write(tmp_path, "get [1] 5")
    assert main(["run", path]) == 1
    assert "RuntimeError" in capsys.readouterr().err


def test_missing_file_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "/nonexistent/prog.pmx"])
    assert exc.value.code == 2
    assert "pmx:" in capsys.readouterr().err


def test_bad_workers(good, capsys):
    assert main(["run", "--mode", "accel", "--workers", "0", good]) == 2


@pytest.mark.parametrize("stage", ["lifted", "extracted", "anf", "fut", "cu"])
def test_dump_stages(good, stage, capsys):
    assert main(["dump", "--stage", stage, good]) == 0
    out = capsys.readouterr().out
    assert out.strip()
    if stage != "lifted":
        assert "print" not in out  # host-only code stays out of the slice


def test_dump_output_recompiles(good, capsys, tmp_path):
    assert main(["dump", "--stage", "anf", good]) == 0
    out = capsys.readouterr().out
    from pmx import parse, symbolize, typecheck
    typecheck(symbolize(parse(out)))
