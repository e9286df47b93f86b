from __future__ import annotations

import json
import re
import subprocess
import sys

import pytest

from conftest import FIXTURES, run_check
from resolute.cli import build_parser, main

UAV_LIB = FIXTURES / "uav.resolute"
UAV_A = FIXTURES / "uav_a.arch"
UAV_B = FIXTURES / "uav_b.arch"


def write(tmp_path, name: str, text: str):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_exit_codes():
    assert run_check(UAV_A, UAV_LIB)[0] == 0
    assert run_check(UAV_B, UAV_LIB)[0] == 1


def test_no_directives_is_success_with_no_output(tmp_path):
    model = write(tmp_path, "empty.arch", "system S { thread T { } }")
    assert run_check(model, UAV_LIB) == (0, "", "")
    assert run_check(model, UAV_LIB, fmt="json") == (0, "[]\n", "")


def test_parse_error_reports_file_line_column(tmp_path):
    model = write(tmp_path, "bad.arch", "system S {\n  thred T { }\n}\n")
    code, out, err = run_check(model, UAV_LIB)
    assert code == 2 and out == ""
    assert err.startswith(f"{model}:2:3:")


def test_library_type_error_reports_file(tmp_path):
    lib = write(tmp_path, "bad.resolute", 'c(p : process) <= ** "" p ** 1 + true = 2\n')
    code, _, err = run_check(UAV_A, lib)
    assert code == 2
    assert re.match(rf"{re.escape(str(lib))}:1:\d+: arithmetic", err)


def test_unresolvable_directive_reports_model(tmp_path):
    model = write(tmp_path, "ghost.arch", "system S {\n  resolute { prove only_receive_decrypt(Ghost) }\n}\n")
    code, _, err = run_check(model, UAV_LIB)
    assert code == 2 and str(model) in err and "Ghost" in err


def test_missing_file():
    code, _, err = run_check(FIXTURES / "nope.arch", UAV_LIB)
    assert code == 2 and "nope.arch" in err


def test_evaluation_error_names_the_claim(tmp_path):
    lib = write(tmp_path, "div.resolute", 'risky(s : system) <= ** "" s ** 1 / 0 = 1\n')
    model = write(tmp_path, "m.arch", "system S { resolute { prove risky(this) } }")
    code, out, err = run_check(model, lib)
    assert code == 2 and out == ""
    assert "evaluation error" in err and "division by zero" in err and "risky(S)" in err


def test_failing_external_is_an_error(tmp_path):
    lib = write(tmp_path, "ext.resolute",
                f'external oracle(s : system) : bool = "{sys.executable} -c \\"import sys; sys.exit(3)\\""\n'
                'ok(s : system) <= ** "" s ** oracle(s)\n')
    model = write(tmp_path, "m.arch", "system S { resolute { prove ok(this) } }")
    code, _, err = run_check(model, lib)
    assert code == 2 and "status 3" in err and "ok(S)" in err


def test_formats():
    _, text, _ = run_check(UAV_B, UAV_LIB)
    assert text.startswith("FAILED: only_receive_decrypt(MC) [UAV.Main_Loop]\n")
    _, js, _ = run_check(UAV_B, UAV_LIB, fmt="json")
    [case] = json.loads(js)
    assert case["verdict"] == "failed" and js.endswith("\n")
    _, dot, _ = run_check(UAV_B, UAV_LIB, fmt="dot")
    assert dot.startswith("digraph assurance_case {") and dot.rstrip().endswith("}")


SEVERAL = """
system S {
  thread A { property Ok = false }
  thread B { property Ok = true }
  resolute {
    prove ok(A)
    prove ok(B)
  }
}
"""
OK_LIB = 'ok(t : thread) <= ** t " is ok" ** property(t, "Ok") = true\n'


def test_fail_fast_stops_after_first_failure(tmp_path):
    model, lib = write(tmp_path, "m.arch", SEVERAL), write(tmp_path, "ok.resolute", OK_LIB)
    code, out, _ = run_check(model, lib)
    assert code == 1 and out.count("PROVEN: ") == 1 and out.count("FAILED: ") == 1
    code, out, _ = run_check(model, lib, fail_fast=True)
    assert code == 1 and out == "FAILED: ok(A) [S]\n! S.A is ok\n"


def test_library_order_decides_which_rule_is_tried_first(tmp_path):
    first = write(tmp_path, "first.resolute", 'ok(t : thread) <= ** "first " t ** true\n')
    second = write(tmp_path, "second.resolute", 'ok(t : thread) <= ** "second " t ** true\n')
    model = write(tmp_path, "m.arch", SEVERAL)
    assert "+ first S.A" in run_check(model, first, second)[1]
    assert "+ second S.A" in run_check(model, second, first)[1]


def test_output_file(tmp_path, capsys):
    target = tmp_path / "case.json"
    assert main(["check", str(UAV_A), "--lib", str(UAV_LIB), "--format", "json", "-o", str(target)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(target.read_text())[0]["verdict"] == "proven"


def test_argument_parsing():
    args = build_parser().parse_args(["check", "m.arch", "--lib", "a", "b", "--lib", "c", "--timeout", "2.5",
                                      "--fail-fast", "-v"])
    assert args.lib == ["a", "b", "c"] and args.timeout == 2.5 and args.fail_fast and args.verbose
    assert args.format == "text" and args.output is None
    with pytest.raises(SystemExit):
        build_parser().parse_args(["check", "m.arch", "--format", "xml"])


def test_verbose_logs_debug_to_stderr(tmp_path):
    lib = write(tmp_path, "dbg.resolute", 'ok(t : thread) <= ** "" t ** debug("seen", true)\n')
    model = write(tmp_path, "m.arch", "system S { thread T { } resolute { prove ok(T) } }")
    quiet = subprocess.run([sys.executable, "-m", "resolute.cli", "check", str(model), "--lib", str(lib)],
                           capture_output=True, text=True)
    loud = subprocess.run([sys.executable, "-m", "resolute.cli", "check", str(model), "--lib", str(lib), "-v"],
                          capture_output=True, text=True)
    assert quiet.returncode == loud.returncode == 0
    assert "seen" not in quiet.stderr and "seen" in loud.stderr
    assert quiet.stdout == loud.stdout


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "resolute.cli", "check", str(UAV_B), "--lib", str(UAV_LIB)],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "! The connection UAV.Main_Loop.c_bypass" in proc.stdout
