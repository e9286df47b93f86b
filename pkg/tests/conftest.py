from __future__ import annotations

import io
import sys
from collections import defaultdict
from pathlib import Path

import pytest

from resolute import attach_prove_directives, merge_libraries, parse_library, parse_model, typecheck
from resolute.cli import RunConfig, run
from resolute.logic import ProofContext
from resolute.stdlib import stdlib_library

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def load_lib(*sources: str, stdlib: bool = True):
    libs = [stdlib_library()] if stdlib else []
    libs += [parse_library(src, f"lib{i}.resolute") for i, src in enumerate(sources)]
    return typecheck(merge_libraries(libs))


def setup(model_text: str, *lib_sources: str):
    """Model, typed library, goals and a fresh proof context."""
    lib = load_lib(*lib_sources)
    model = parse_model(model_text, "model.arch")
    goals = attach_prove_directives(lib, model)
    return model, lib, goals, ProofContext(lib, model)


def run_check(model_path, *libs, fmt: str = "text", fail_fast: bool = False, timeout=None):
    """Run the CLI in-process; returns (exit code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    code = run(RunConfig(str(model_path), [str(p) for p in libs], fmt, None, fail_fast, timeout), out, err)
    return code, out.getvalue(), err.getvalue()


# ---------------------------------------------------------------------------
# One PASS/FAIL line per acceptance criterion in the terminal summary.

_criteria: dict[int, str] = {}
_outcomes: dict[int, list[bool]] = defaultdict(list)


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _criteria[number] = title
            item.user_properties.append(("criterion", number))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes[props["criterion"]].append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        results = _outcomes.get(number, [])
        verdict = "PASS" if results and all(results) else "FAIL"
        terminalreporter.write_line(f"{verdict} criterion {number}: {_criteria[number]}")
