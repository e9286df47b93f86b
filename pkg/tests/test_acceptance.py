"""Acceptance criteria, one marker per criterion; the summary prints PASS/FAIL per criterion."""

from __future__ import annotations

import os
import random
import subprocess
import sys
import time

import pytest

from conftest import FIXTURES, run_check, setup
from generated_models import ring_model, scale_model
from lfp_oracle import gen_instance, oracle_verdict, render_model, render_rules
from resolute import build_case, instances_of, prove, replay_check
from resolute.logic import EvalNode, ExistsNode, ForallNode, ImpliesNode, OrNode

UAV_LIB = FIXTURES / "uav.resolute"
MEM_LIB = FIXTURES / "memory.resolute"


def prove_all(model_text: str, *lib_sources: str):
    model, lib, goals, ctx = setup(model_text, *lib_sources)
    return [(goal, prove(goal, ctx)) for goal in goals], ctx


def assert_replays(results, ctx) -> None:
    for goal, node in results:
        verdict = replay_check(node, ctx, goal)
        assert verdict, str(verdict)


# ---------------------------------------------------------------------------

@pytest.mark.criterion(1, "dual model: A proven (exit 0), B fails on the bypass connection (exit 1), < 1 s")
def test_dual_model_scenario():
    lib_bytes = UAV_LIB.read_bytes()
    start = time.perf_counter()
    code_a, out_a, err_a = run_check(FIXTURES / "uav_a.arch", UAV_LIB)
    code_b, out_b, err_b = run_check(FIXTURES / "uav_b.arch", UAV_LIB)
    elapsed = time.perf_counter() - start
    assert UAV_LIB.read_bytes() == lib_bytes

    assert (code_a, err_a) == (0, "")
    claim_lines = out_a.splitlines()[1:]
    assert claim_lines and all(line.lstrip().startswith("+ ") for line in claim_lines if line)

    assert (code_b, err_b) == (1, "")
    bypass = [line for line in out_b.splitlines() if "c_bypass only carries" in line]
    assert bypass and bypass[0].lstrip().startswith("! ")
    assert elapsed < 1.0, f"{elapsed:.3f}s"


MEMORY_MODEL = (FIXTURES / "memory.arch").read_text()


@pytest.mark.criterion(2, "memory protection: second rule, exactly 3 subclaims; an unsafe process is named")
def test_memory_protection():
    model, lib, goals, ctx = setup(MEMORY_MODEL, MEM_LIB.read_text())
    node = prove(goals[0], ctx)
    assert node.proven
    second_rule = lib.claims["memory_protected"][1]
    assert node.clause == second_rule
    case = build_case(node, goals[0].directive, ctx)
    assert [c.predicate for c in case.root.children] == ["memory_safe_process"] * 3
    assert [c.args for c in case.root.children] == [["Board.P"], ["Board.Q"], ["Board.R"]]

    flipped = MEMORY_MODEL.replace(
        "process R {\n    property Deployment_Properties::Actual_Memory_Binding = [ref RAM]\n"
        "    property Memory_Safe = true",
        "process R {\n    property Deployment_Properties::Actual_Memory_Binding = [ref RAM]\n"
        "    property Memory_Safe = false")
    assert flipped != MEMORY_MODEL
    model, lib, goals, ctx = setup(flipped, MEM_LIB.read_text())
    node = prove(goals[0], ctx)
    assert not node.proven
    case = build_case(node, goals[0].directive, ctx)
    failed = [c for c in case.root.walk() if not c.proven and c.predicate == "memory_safe_process"]
    assert [c.args for c in failed] == [["Board.R"]]
    assert "Board.R" in failed[0].text


BOUND_LIB = """
is_bound(l : component, p : component) <=
  ** l " is bound to " p **
  bound(l, p)
"""

BINDINGS = ("Actual_Memory_Binding", "Actual_Connection_Binding", "Actual_Processor_Binding")


def _binding_model(present: tuple[bool, bool, bool], target: str) -> str:
    props = "".join(
        f"    property Deployment_Properties::{name} = [ref {target}]\n"
        for name, on in zip(BINDINGS, present) if on)
    return (
        "system S {\n  memory M { }\n  memory Other { }\n"
        f"  thread L {{\n{props}  }}\n"
        "  resolute { prove is_bound(L, M) }\n}\n")


@pytest.mark.criterion(3, "stdlib bound: all 8 presence combinations of the three binding properties")
def test_stdlib_bound_combinations():
    for mask in range(8):
        present = tuple(bool(mask & (1 << i)) for i in range(3))
        [(_, node)], _ = prove_all(_binding_model(present, "M"), BOUND_LIB)
        assert node.proven == any(present), present
        # the same properties pointing elsewhere never bind L to M
        [(_, node)], _ = prove_all(_binding_model(present, "Other"), BOUND_LIB)
        assert not node.proven, present


def _run_random(inst):
    model, lib, goals, ctx = setup(render_model(inst), render_rules(inst.rules))
    node = prove(goals[0], ctx)
    return node, replay_check(node, ctx, goals[0])


@pytest.mark.criterion(4, "500 random non-recursive instances agree with the least-fixed-point oracle, < 60 s")
def test_oracle_equivalence():
    rng = random.Random(20141)
    start = time.perf_counter()
    mismatches = []
    for i in range(500):
        inst = gen_instance(rng, recursive=False)
        node, replay = _run_random(inst)
        if node.proven != oracle_verdict(inst) or not replay:
            mismatches.append(i)
    elapsed = time.perf_counter() - start
    assert mismatches == []
    assert elapsed < 60, f"{elapsed:.1f}s"


SEQUENT_LIB = """
eval_true(_s : system) <= ** "true" ** 1 < 2
eval_false(_s : system) <= ** "false" ** 2 < 1
vacuous_forall(_s : system) <= ** "forall" ** forall (t : thread). 2 < 1
empty_exists(_s : system) <= ** "exists" ** exists (t : thread). 1 < 2
or_both(_s : system) <= ** "or" ** (1 < 2) or (2 < 3)
or_right(_s : system) <= ** "or" ** (2 < 1) or (2 < 3)
implies_false(_s : system) <= ** "implies" ** (2 < 1) => (2 < 1)
"""

SEQUENT_MODEL = """
system S {
  memory M { }
  resolute {
    prove eval_true(this)
    prove eval_false(this)
    prove vacuous_forall(this)
    prove empty_exists(this)
    prove or_both(this)
    prove or_right(this)
    prove implies_false(this)
  }
}
"""


@pytest.mark.criterion(5, "sequent rules: eval, vacuous forall, empty exists, left-first or, false antecedent")
def test_sequent_rules():
    results, _ = prove_all(SEQUENT_MODEL, SEQUENT_LIB)
    # one rule per claim: the body proof or its only attempt
    body = {goal.directive.claim: node.children[0]
            for goal, node in results}
    verdict = {goal.directive.claim: node.proven for goal, node in results}

    assert verdict["eval_true"] and isinstance(body["eval_true"], EvalNode) and body["eval_true"].value is True
    assert not verdict["eval_false"] and body["eval_false"].value is False

    assert verdict["vacuous_forall"]
    assert isinstance(body["vacuous_forall"], ForallNode) and body["vacuous_forall"].instances == ()

    assert not verdict["empty_exists"]
    assert isinstance(body["empty_exists"], ExistsNode) and body["empty_exists"].children == []

    assert isinstance(body["or_both"], OrNode) and body["or_both"].chosen == 0
    assert isinstance(body["or_right"], OrNode) and body["or_right"].chosen == 1

    imp = body["implies_false"]
    assert verdict["implies_false"] and isinstance(imp, ImpliesNode)
    assert imp.antecedent_value is False and imp.child is None


@pytest.mark.criterion(6, "cyclic data flow with the mutually recursive rules terminates with a verdict, < 1 s")
def test_cycle_termination(tmp_path):
    for n in (4, 200):
        path = tmp_path / f"ring{n}.arch"
        path.write_text(ring_model(n, with_decrypt=True))
        start = time.perf_counter()
        code, out, err = run_check(path, UAV_LIB)
        elapsed = time.perf_counter() - start
        assert err == "" and code == 1  # a pure cycle has no well-founded evidence
        assert out.startswith("FAILED: only_receive_decrypt(T0)")
        assert elapsed < 1.0, f"ring of {n}: {elapsed:.3f}s"


@pytest.mark.criterion(7, "35-thread model with recursive data-flow rules over all connections, < 5 s")
def test_scale(tmp_path):
    for back_edges, expected in ((0, 0), (3, 1)):
        text = scale_model(35, back_edges=back_edges)
        model, *_ = setup(text, UAV_LIB.read_text())
        assert len(instances_of(model, "thread")) == 35
        path = tmp_path / f"quad{back_edges}.arch"
        path.write_text(text)
        start = time.perf_counter()
        code, out, err = run_check(path, UAV_LIB)
        elapsed = time.perf_counter() - start
        assert (code, err) == (expected, "")
        assert out.count("PROVEN: ") + out.count("FAILED: ") == 35
        assert elapsed < 5.0, f"{elapsed:.2f}s"


@pytest.mark.criterion(8, "replay_check accepts every tree produced for criteria 1-7")
def test_replay_soundness():
    corpus = [
        ((FIXTURES / "uav_a.arch").read_text(), UAV_LIB.read_text()),
        ((FIXTURES / "uav_b.arch").read_text(), UAV_LIB.read_text()),
        (MEMORY_MODEL, MEM_LIB.read_text()),
        (MEMORY_MODEL.replace("Memory_Safe = true", "Memory_Safe = false", 1), MEM_LIB.read_text()),
        (SEQUENT_MODEL, SEQUENT_LIB),
        (ring_model(4, with_decrypt=True), UAV_LIB.read_text()),
        (scale_model(35), UAV_LIB.read_text()),
        (scale_model(35, back_edges=3), UAV_LIB.read_text()),
    ]
    corpus += [(_binding_model(tuple(bool(m & (1 << i)) for i in range(3)), "M"), BOUND_LIB) for m in range(8)]
    proven = 0
    for model_text, lib_text in corpus:
        results, ctx = prove_all(model_text, lib_text)
        assert_replays(results, ctx)
        proven += sum(node.proven for _, node in results)
    rng = random.Random(20141)
    for _ in range(100):
        inst = gen_instance(rng, recursive=False)
        node, replay = _run_random(inst)
        assert replay, str(replay)
        proven += node.proven
    assert proven > 50


def _cli(args: list[str], seed: str) -> subprocess.CompletedProcess:
    env = {**os.environ, "PYTHONHASHSEED": seed}
    return subprocess.run([sys.executable, "-m", "resolute.cli", "check", *args],
                          capture_output=True, env=env, check=False)


@pytest.mark.criterion(9, "criteria 1-2 rerun in separate processes give byte-identical text and JSON")
def test_determinism(tmp_path):
    flipped = tmp_path / "memory_unsafe.arch"
    flipped.write_text(MEMORY_MODEL.replace("Memory_Safe = true", "Memory_Safe = false", 1))
    runs = [
        [str(FIXTURES / "uav_a.arch"), "--lib", str(UAV_LIB)],
        [str(FIXTURES / "uav_b.arch"), "--lib", str(UAV_LIB)],
        [str(FIXTURES / "memory.arch"), "--lib", str(MEM_LIB)],
        [str(flipped), "--lib", str(MEM_LIB)],
    ]
    for args in runs:
        for fmt in ("text", "json"):
            first = _cli([*args, "--format", fmt], "1")
            second = _cli([*args, "--format", fmt], "2")
            assert first.returncode in (0, 1)
            assert first.stdout == second.stdout and first.stdout
            assert first.returncode == second.returncode
