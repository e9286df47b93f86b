from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resolute import ParseError, instances_of, parse_model, resolve_reference
from resolute.model import (
    ComponentRef, ConnectionRef, FeatureRef, ModelError, PropertyValue, ResolveError, render_model,
)

PROVE_SHAPE = """
system S {
  process Main_Loop {
    thread MC { in port cmd }
    resolute {
      prove only_receive_ground_station(MC)
    }
  }
}
"""


def test_string_property():
    m = parse_model('system S { process p { property OS = "seL4" } }')
    assert m.component("S.p").properties["OS"] == PropertyValue("string", "seL4")


def test_empty_system():
    m = parse_model("system S { }")
    assert len(m.components) == 1
    assert len(m.connections) == 0
    assert m.root == ComponentRef("S")


def test_prove_directive_is_attached_to_enclosing_component():
    m = parse_model(PROVE_SHAPE)
    [d] = m.prove_directives
    assert d.component == ComponentRef("S.Main_Loop")
    assert d.text == "only_receive_ground_station(MC)"


def test_property_kinds_and_namespaced_names():
    m = parse_model("""
    system S {
      memory RAM { }
      thread T {
        property Deployment_Properties::Actual_Memory_Binding = [ref RAM]
        property Period = 20
        property Load = 0.5
        property Critical = false
        property Offset = -3
      }
    }
    """)
    props = m.component("S.T").properties
    binding = props["Deployment_Properties::Actual_Memory_Binding"]
    assert binding.tag == "list"
    assert binding.value == (PropertyValue("ref", ComponentRef("S.RAM")),)
    assert props["Period"] == PropertyValue("integer", 20)
    assert props["Load"] == PropertyValue("real", 0.5)
    assert props["Critical"] == PropertyValue("boolean", False)
    assert props["Offset"] == PropertyValue("integer", -3)


def test_instances_in_document_order():
    m = parse_model("""
    system S {
      thread B { }
      process P { thread A { } }
      thread C { }
    }
    """)
    assert instances_of(m, "thread") == (ComponentRef("S.B"), ComponentRef("S.P.A"), ComponentRef("S.C"))
    assert instances_of(m, "memory") == ()
    assert instances_of(m, "component")[0] == ComponentRef("S")
    assert len(instances_of(m, "component")) == 5
    assert instances_of(m, "thread") == instances_of(m, "thread")


def test_unknown_kind_rejected():
    m = parse_model("system S { }")
    with pytest.raises(ValueError):
        instances_of(m, "gizmo")


def test_connections_and_features():
    m = parse_model("""
    system S {
      thread A { out port o }
      thread B { in port i }
      connection c : A.o -> B.i
    }
    """)
    [c] = instances_of(m, "connection")
    assert c == ConnectionRef("S.c")
    conn = m.connection(c)
    assert (conn.source, conn.destination) == (FeatureRef("S.A.o"), FeatureRef("S.B.i"))
    assert m.feature("S.A.o").owner == ComponentRef("S.A")
    assert m.feature("S.B.i").direction == "in"


class TestResolve:
    model = parse_model("""
    system Root {
      system A {
        process B { in port p }
      }
      process Main_Loop { thread MC { } }
    }
    """)

    def test_subcomponent(self):
        assert resolve_reference(self.model, ComponentRef("Root.Main_Loop"), "MC") == ComponentRef("Root.Main_Loop.MC")

    def test_this(self):
        ctx = ComponentRef("Root.A")
        assert resolve_reference(self.model, ctx, "this") == ctx

    def test_feature_three_levels_down(self):
        assert resolve_reference(self.model, ComponentRef("Root"), "A.B.p") == FeatureRef("Root.A.B.p")

    def test_unresolvable_segment_is_named(self):
        with pytest.raises(ResolveError, match="'Nope'"):
            resolve_reference(self.model, ComponentRef("Root"), "A.Nope.p")


@pytest.mark.parametrize("text, fragment", [
    ("system S { thread A { out port o } connection c : A.o -> A.x }", "x"),
    ("system S { thread A { } thread A { } }", "A"),
    ("system S { thread A { in port i in port i } }", "i"),
    ("system S { thread A { property X = 1 property X = 2 } }", "X"),
    ('system S { thread A { property L = [1, "two"] } }', "list"),
    ("system S { thread A { property R = ref Missing } }", "Missing"),
])
def test_semantic_errors_name_the_offender(text, fragment):
    with pytest.raises(ModelError, match=fragment):
        parse_model(text)


@pytest.mark.parametrize("text, line, column", [
    ("system S {\n  thred A { }\n}", 2, 3),
    ("system S {\n  thread A {\n", 3, 1),
    ("widget S { }", 1, 1),
])
def test_parse_errors_carry_position(text, line, column):
    with pytest.raises(ParseError) as info:
        parse_model(text, "m.arch")
    err = info.value
    assert (err.line, err.column) == (line, column)
    assert str(err).startswith(f"m.arch:{line}:{column}:")


def test_comments_are_ignored():
    m = parse_model("-- header\nsystem S { -- trailing\n thread T { } }\n")
    assert len(m.components) == 2


ROUND_TRIP = """
system UAV {
  processor FMU { }
  device Radio { out port o }
  process Main {
    property Deployment_Properties::Actual_Processor_Binding = [ref FMU]
    thread Decrypt { in port i out port o property Rate = 2.5 }
    thread MC { in port cmd property Name = "motor \\"ctl\\"" }
    connection c : Decrypt.o -> MC.cmd { property Encrypted = true }
    resolute { prove only_receive_decrypt(MC) }
  }
  connection r : Radio.o -> Main.Decrypt.i
}
"""


def test_render_parse_is_a_fixed_point():
    first = parse_model(ROUND_TRIP)
    second = parse_model(render_model(first))
    assert second == first
    assert render_model(second) == render_model(first)


names = st.sampled_from(["A", "B", "C", "D", "E"])


@st.composite
def models(draw):
    """Small random models: nested components, ports, connections, properties."""
    kinds = ["thread", "process", "device", "memory", "processor", "bus", "system"]
    count = draw(st.integers(1, 5))
    lines = ["system Root {"]
    ports = []
    for i in range(count):
        kind = draw(st.sampled_from(kinds))
        lines.append(f"  {kind} N{i} {{")
        lines.append(f"    in port i{i}")
        lines.append(f"    out port o{i}")
        value = draw(st.one_of(st.integers(-5, 5).map(str), st.booleans().map(lambda b: str(b).lower()),
                               st.sampled_from(['"x"', "1.5", "[ref N0]"])))
        lines.append(f"    property P = {value}")
        lines.append("  }")
        ports.append(i)
    for k in range(draw(st.integers(0, 3))):
        a, b = draw(st.sampled_from(ports)), draw(st.sampled_from(ports))
        lines.append(f"  connection k{k} : N{a}.o{a} -> N{b}.i{b}")
    lines.append("}")
    return "\n".join(lines)


@settings(max_examples=60, deadline=None)
@given(models())
def test_round_trip_property(text):
    first = parse_model(text)
    assert parse_model(render_model(first)) == first


@settings(max_examples=60, deadline=None)
@given(models())
def test_connection_endpoints_have_parents(text):
    m = parse_model(text)
    for ref in instances_of(m, "connection"):
        conn = m.connection(ref)
        assert m.feature(conn.source).owner.path in m.components
        assert m.feature(conn.destination).owner.path in m.components
        assert conn.source != conn.destination
