import pytest
from hypothesis import given, strategies as st

from circuits import random_netlist
import numpy as np

from mnadec import devices as dev
from mnadec.errors import (
    DanglingNode,
    DisconnectedCircuit,
    DuplicateElementId,
    InvalidControl,
    InvalidParameter,
    NetlistSyntaxError,
    SelfLoop,
    UnknownModel,
)
from mnadec.netlist import (
    ControlKind,
    Kind,
    kind_sorted_incidence_order,
    parse_netlist,
    serialize_netlist,
)


class TestParse:
    def test_buck(self, buck):
        assert buck.num_nodes - 1 == 3
        assert len(buck.branches) == 6
        order = [buck.branches[j].id for j in kind_sorted_incidence_order(buck)]
        assert order == ["C", "L", "RS", "RD", "R", "Vs"]
        rs = buck.element("RS")
        assert rs.kind is Kind.R and isinstance(rs.behavior, dev.SmoothSwitch)
        assert rs.controls[0].kind is ControlKind.BRANCH_VOLTAGE
        assert isinstance(buck.element("RD").behavior, dev.DiodeShockley)

    def test_minimal(self):
        c = parse_netlist("V1 1 0 DC 1.0\nR1 1 0 1.0\n")
        assert c.num_nodes - 1 == 1
        assert len(c.branches) == 2

    def test_resistance_becomes_conductance(self):
        c = parse_netlist("V1 1 0 DC 1.0\nR1 1 0 4.0\nR2 1 0 G(0.5)\n")
        assert c.element("R1").behavior.G == pytest.approx(0.25)
        assert c.element("R2").behavior.G == 0.5

    def test_self_loop(self):
        with pytest.raises(SelfLoop):
            parse_netlist("V1 1 0 DC 1\nR1 1 1 1.0\n")

    def test_syntax_error_position(self):
        with pytest.raises(NetlistSyntaxError) as exc:
            parse_netlist("V1 1 0 DC 1\nR1 1 0 CTRL X 1.0\n")
        assert exc.value.line == 2
        assert exc.value.column is not None

    def test_unknown_model(self):
        with pytest.raises(UnknownModel):
            parse_netlist("V1 1 0 DC 1\nR1 1 0 FOO(1)\n")

    def test_duplicate_id(self):
        with pytest.raises(DuplicateElementId):
            parse_netlist("V1 1 0 DC 1\nR1 1 0 1\nR1 1 0 2\n")

    def test_control_node_not_on_branch(self):
        with pytest.raises(DanglingNode):
            parse_netlist("V1 1 0 DC 1\nR1 1 0 1\nG1 1 0 CTRL V(7,0) POLY(0, 1)\n")

    def test_disconnected(self):
        with pytest.raises(DisconnectedCircuit):
            parse_netlist("V1 1 0 DC 1\nR1 1 0 1\nR2 2 3 1\n")

    def test_bad_parameters(self):
        with pytest.raises(InvalidParameter):
            parse_netlist("V1 1 0 DC 1\nC1 1 0 -1e-6\n")
        with pytest.raises(InvalidParameter):
            parse_netlist("V1 1 0 DC 1\nR1 1 0 D(1e-12)\n")

    def test_control_must_reference_right_kind(self):
        with pytest.raises(InvalidControl):
            parse_netlist("V1 1 0 DC 1\nR1 1 0 1\nG1 1 0 CTRL I(R1) POLY(0, 1)\n")
        with pytest.raises(InvalidControl):
            parse_netlist("V1 1 0 DC 1\nR1 1 0 1\nE1 2 0 POLY(0, 1)\nR2 2 0 1\n")

    def test_node_orders(self):
        text = "V1 3 0 DC 1\nR1 3 1 1\nR2 1 2 1\nR3 2 0 1\n"
        assert parse_netlist(text).nodes == ("0", "3", "1", "2")
        assert parse_netlist(text, order="paper-example").nodes == ("0", "1", "2", "3")

    def test_comments_title_and_coupling(self):
        text = """.title coupled pair
* a comment
V1 1 0 DC 1
L1 1 2 1e-3
L2 2 0 2e-3
K1 L1 L2 0.5
R1 2 0 1
.end
R9 this line is ignored
"""
        c = parse_netlist(text)
        assert c.name == "coupled pair"
        assert len(c.couplings) == 1 and c.couplings[0].k == 0.5
        assert not c.has_element("R9")

    def test_waveforms(self):
        c = parse_netlist("V1 1 0 SIN(1.0, 2.0, 50.0)\nI1 0 1 TABLE(0, 0, 1, 2)\nR1 1 0 1\n")
        v = c.element("V1").behavior
        assert v.value(0.0) == pytest.approx(1.0)
        assert v.derivative(0.0) == pytest.approx(2.0 * 2 * np.pi * 50.0)
        i = c.element("I1").behavior
        assert i.value(0.5) == pytest.approx(1.0)
        assert i.derivative(0.5) == pytest.approx(2.0)


class TestKindOrder:
    def test_single_resistor(self):
        c = parse_netlist("R1 1 0 1\n")
        assert [c.branches[j].id for j in kind_sorted_incidence_order(c)] == ["R1"]

    def test_shuffled_kinds(self):
        text = """G1 2 0 CTRL V(1,0) POLY(0, 0.1)
I1 0 2 DC 1
E1 3 0 CTRL V(1,0) POLY(0, 1)
V1 1 0 DC 1
R1 1 2 1
L1 2 3 1e-3
C1 3 0 1e-6
R2 2 0 1
"""
        c = parse_netlist(text)
        order = [c.branches[j].id for j in kind_sorted_incidence_order(c)]
        assert order == ["C1", "L1", "R1", "R2", "V1", "E1", "I1", "G1"]

    def test_ic_types_sub_sort(self):
        text = """V1 1 0 DC 1
R1 1 2 1
C1 2 0 1e-6
G1 2 0 CTRL V(1,0) POLY(0, 0.1)
G2 1 0 CTRL V(1,0) POLY(0, 0.1)
"""
        c = parse_netlist(text)
        order = kind_sorted_incidence_order(c, ic_types={"G1": 2, "G2": 1})
        assert [c.branches[j].id for j in order][-2:] == ["G2", "G1"]


class TestRoundTrip:
    @given(st.integers(0, 2**32 - 1), st.booleans())
    def test_parse_serialize_parse(self, seed, controlled):
        text = random_netlist(np.random.default_rng(seed), controlled=controlled, nonlinear=True)
        c1 = parse_netlist(text)
        out = serialize_netlist(c1)
        c2 = parse_netlist(out)
        assert c2 == c1
        assert serialize_netlist(c2) == out

    def test_examples_round_trip(self, data_dir):
        for path in sorted(data_dir.glob("*.net")):
            c1 = parse_netlist(path.read_text())
            assert parse_netlist(serialize_netlist(c1)) == c1, path.name

    def test_deterministic(self, data_dir):
        text = (data_dir / "smps.net").read_text()
        assert parse_netlist(text) == parse_netlist(text)
