"""Generated model texts for the cycle and scale scenarios."""

from __future__ import annotations

import random


def _thread(name: str, extra: str = "") -> list[str]:
    return [
        f"    thread {name} {{",
        "      in port i",
        "      out port o",
        "      property Deployment_Properties::Actual_Processor_Binding = [ref CPU]",
        *([extra] if extra else []),
        "    }",
    ]


def ring_model(n: int = 4, with_decrypt: bool = False) -> str:
    """Threads T0 -> T1 -> ... -> T(n-1) -> T0, all on one processor.

    The data-flow graph is a single cycle, so the decryption rules recurse
    around it forever unless cycles are cut. With `with_decrypt`, a
    Decrypt thread feeds T0 as well.
    """
    lines = ["system Ring {", "  processor CPU { }", "  process P {"]
    names = [f"T{i}" for i in range(n)]
    for name in names:
        lines += _thread(name)
    if with_decrypt:
        lines += _thread("Decrypt")
        lines.append("    connection c_dec : Decrypt.o -> T0.i")
    for i, name in enumerate(names):
        lines.append(f"    connection c{i} : {name}.o -> {names[(i + 1) % n]}.i")
    lines.append("    resolute {")
    lines.append("      prove only_receive_decrypt(T0)")
    lines.append("    }")
    lines += ["  }", "}"]
    return "\n".join(lines) + "\n"


def scale_model(n_threads: int = 35, seed: int = 7, extra_edges: int = 35, back_edges: int = 0) -> str:
    """A quadcopter-sized model: `n_threads` threads spread over four processes.

    Threads form a data-flow chain starting at Decrypt, plus random extra
    forward connections and `back_edges` connections against the chain,
    which create cycles. Every thread carries a prove directive.
    """
    rng = random.Random(seed)
    names = ["Decrypt"] + [f"T{i}" for i in range(1, n_threads)]
    groups: list[list[str]] = [[] for _ in range(4)]
    for i, name in enumerate(names):
        groups[i % 4].append(name)
    owner = {name: f"P{g}" for g, members in enumerate(groups) for name in members}

    edges = [(names[i], names[i + 1]) for i in range(len(names) - 1)]
    for want_forward, count in ((True, extra_edges), (False, back_edges)):
        added = 0
        while added < count:
            i, j = sorted(rng.sample(range(1, len(names)), 2))
            a, b = (names[i], names[j]) if want_forward else (names[j], names[i])
            if (a, b) not in edges:
                edges.append((a, b))
                added += 1

    lines = ["system Quad {", "  processor CPU { }", "  device Radio {", "    out port o", "  }"]
    for g, members in enumerate(groups):
        lines.append(f"  process P{g} {{")
        lines.append("    property Deployment_Properties::Actual_Processor_Binding = [ref CPU]")
        for name in members:
            lines += ["  " + ln for ln in _thread(name)]
        lines.append("  }")
    lines.append("  connection c_radio : Radio.o -> P0.Decrypt.i { property Encrypted = true }")
    for n, (a, b) in enumerate(edges):
        lines.append(f"  connection e{n} : {owner[a]}.{a}.o -> {owner[b]}.{b}.i")
    lines.append("  resolute {")
    for name in names:
        lines.append(f"    prove only_receive_decrypt({owner[name]}.{name})")
    lines += ["  }", "}"]
    return "\n".join(lines) + "\n"
