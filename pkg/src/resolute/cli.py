"""Command-line driver: `resolute check <model> --lib <file>...`."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .case import AssuranceCase, build_case, render_dot, render_json_cases, render_text
from .eval import EvalError, default_timeout
from .lang import Goal, TypeCheckError, TypedLibrary, attach_prove_directives, merge_libraries, parse_library, typecheck
from .logic import ProofContext, ProofNode, prove, run_with_deep_stack
from .model import ModelError, ModelInstance, parse_model
from .stdlib import stdlib_library
from .syntax import ParseError

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2
FORMATS = ("text", "json", "dot")


@dataclass
class RunConfig:
    model_path: str
    library_paths: list[str] = field(default_factory=list)
    format: str = "text"
    output: str | None = None  # None means standard output
    fail_fast: bool = False
    external_timeout: float | None = None  # None means the environment default


@dataclass
class CheckResult:
    goal: Goal
    proof: ProofNode
    case: AssuranceCase


class InputError(Exception):
    """A parse, model, or type error, already formatted for the user."""


def load(model_path: str, library_paths: Sequence[str]) -> tuple[ModelInstance, TypedLibrary, list[Goal]]:
    """Read the stdlib, the libraries in order, and the model; typecheck and bind directives."""
    try:
        libs = [stdlib_library()]
        for p in library_paths:
            libs.append(parse_library(Path(p).read_text(encoding="utf-8"), p))
        lib = typecheck(merge_libraries(libs))
        model = parse_model(Path(model_path).read_text(encoding="utf-8"), model_path)
        goals = attach_prove_directives(lib, model)
    except ParseError as err:
        raise InputError(str(err)) from err
    except ModelError as err:
        if err.filename is None:
            err.filename = model_path
        raise InputError(str(err)) from err
    except TypeCheckError as err:
        for d in err.errors:
            if d.filename is None and d.pos is not None:
                d.filename = model_path  # only directive diagnostics lack a file
        raise InputError("\n".join(str(d) for d in err.errors)) from err
    except OSError as err:
        raise InputError(f"{err.filename}: {err.strerror}") from err
    return model, lib, goals


def check(model: ModelInstance, lib: TypedLibrary, goals: Sequence[Goal], *,
          external_timeout: float | None = None, fail_fast: bool = False) -> list[CheckResult]:
    """Prove each goal in order, sharing one claim table. EvalError propagates."""
    ctx = ProofContext(lib, model, external_timeout=external_timeout)
    results: list[CheckResult] = []
    cache: dict = {}
    for goal in goals:
        proof = prove(goal, ctx)
        results.append(CheckResult(goal, proof, build_case(proof, goal.directive, ctx, cache)))
        if fail_fast and not proof.proven:
            break
    return results


def render(cases: Sequence[AssuranceCase], fmt: str) -> str:
    if fmt == "json":
        return render_json_cases(list(cases)) + "\n"
    if fmt == "dot":
        return "\n".join(render_dot(c) for c in cases)
    if fmt == "text":
        return "\n".join(render_text(c) for c in cases)
    raise ValueError(f"unknown format {fmt!r}")


def run(config: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    if config.format not in FORMATS:
        print(f"error: unknown format '{config.format}'", file=stderr)
        return EXIT_ERROR
    timeout = config.external_timeout if config.external_timeout is not None else default_timeout()
    try:
        model, lib, goals = load(config.model_path, config.library_paths)

        def work() -> tuple[list[CheckResult], str]:
            results = check(model, lib, goals, external_timeout=timeout, fail_fast=config.fail_fast)
            return results, render([r.case for r in results], config.format)

        results, text = run_with_deep_stack(work)
    except InputError as err:
        print(err, file=stderr)
        return EXIT_ERROR
    except EvalError as err:
        print(f"{config.model_path}: evaluation error: {err}", file=stderr)
        return EXIT_ERROR
    except RecursionError:
        print(f"{config.model_path}: evaluation error: recursion too deep", file=stderr)
        return EXIT_ERROR

    if config.output:
        Path(config.output).write_text(text, encoding="utf-8", newline="\n")
    else:
        stdout.write(text)
    return EXIT_OK if all(r.proof.proven for r in results) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resolute", description="Generate assurance cases from a model.")
    sub = parser.add_subparsers(dest="command", required=True)
    chk = sub.add_parser("check", help="prove every directive of a model")
    chk.add_argument("model", help="model file")
    chk.add_argument("--lib", action="extend", nargs="+", default=[], metavar="FILE",
                     help="rule library, loaded in the order given")
    chk.add_argument("--format", choices=FORMATS, default="text")
    chk.add_argument("--output", "-o", metavar="PATH", help="write to PATH instead of standard output")
    chk.add_argument("--fail-fast", action="store_true", help="stop after the first failed case")
    chk.add_argument("--timeout", type=float, metavar="SECS", help="timeout for each external tool run")
    chk.add_argument("-v", "--verbose", action="store_true", help="log debug() output to standard error")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    config = RunConfig(args.model, list(args.lib), args.format, args.output, args.fail_fast, args.timeout)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
