import itertools

import numpy as np
import pytest

from appgnn.fixtures import FixtureSpec, gen_fixture
from appgnn.netlist import (CELL_FUNCTIONS, NetlistError, default_library, load_labels,
                            parse_cell_library, parse_netlist, simulate, write_netlist)

LIB = default_library()

# 3-bit ripple-carry adder: half adder on bit 0, four-gate full adders above.
RCA3 = """
module rca3;
input a0, a1, a2, b0, b1, b2;
output s0, s1, s2, cout;
wire c1, p1, g1, c2, p2, g2;
XOR2 add_U0 (.A(a0), .B(b0), .Y(s0));
AND2 add_U1 (.A(a0), .B(b0), .Y(c1));
XOR2 add_U2 (.A(a1), .B(b1), .Y(p1));
XOR2 add_U3 (.A(p1), .B(c1), .Y(s1));
AND2 add_U4 (.A(a1), .B(b1), .Y(g1));
AO21 add_U5 (.A(p1), .B(c1), .C(g1), .Y(c2));
XOR2 add_U6 (.A(a2), .B(b2), .Y(p2));
XOR2 add_U7 (.A(p2), .B(c2), .Y(s2));
AND2 add_U8 (.A(a2), .B(b2), .Y(g2));
AO21 add_U9 (.A(p2), .B(c2), .C(g2), .Y(cout));
endmodule
"""


def bits(x, w):
    return [(x >> i) & 1 for i in range(w)]


def add_inputs(a, b, w):
    d = {f"a{i}": v for i, v in enumerate(bits(a, w))}
    d.update({f"b{i}": v for i, v in enumerate(bits(b, w))})
    return d


def test_default_library_has_24_cells():
    assert len(LIB) == 24
    assert LIB.has_buf
    assert len(set(LIB.names)) == 24


def test_minimal_library():
    lib = parse_cell_library("BUF 1\n")
    assert len(lib) == 1 and lib["BUF"].input_pins == ("A",)


def test_duplicate_cell_rejected():
    with pytest.raises(NetlistError):
        parse_cell_library("AND2 2\nAND2 2\n")


def test_library_text_round_trip():
    assert parse_cell_library(LIB.to_text()) == LIB


def test_every_cell_has_semantics_of_right_arity():
    for cell in LIB.cells:
        args = [0] * len(cell.input_pins)
        assert CELL_FUNCTIONS[cell.name](*args) in (0, 1)


def test_rca3_structure():
    nl = parse_netlist(RCA3, LIB)
    assert len(nl.gates) == 10
    assert len(nl.primary_inputs) == 6
    assert len(nl.primary_outputs) == 4


def test_rca3_exhaustive_simulation():
    nl = parse_netlist(RCA3, LIB)
    for a, b in itertools.product(range(8), repeat=2):
        out = simulate(nl, add_inputs(a, b, 3))
        got = sum(out[f"s{i}"] << i for i in range(3)) + (out["cout"] << 3)
        assert got == a + b


def test_simulate_vectorized_matches_scalar():
    nl = parse_netlist(RCA3, LIB)
    a = np.arange(64) // 8
    b = np.arange(64) % 8
    ins = {f"a{i}": (a >> i) & 1 for i in range(3)}
    ins.update({f"b{i}": (b >> i) & 1 for i in range(3)})
    out = simulate(nl, ins)
    total = sum(out[f"s{i}"].astype(int) << i for i in range(3)) + (out["cout"].astype(int) << 3)
    assert (total == a + b).all()


def test_simulate_example_3_plus_5():
    out = simulate(parse_netlist(RCA3, LIB), add_inputs(3, 5, 3))
    assert [out["s0"], out["s1"], out["s2"], out["cout"]] == [0, 0, 0, 1]


def test_buf_passthrough():
    nl = parse_netlist("module t; input i; output o; BUF u (.A(i), .Y(o)); endmodule", LIB)
    assert len(nl.gates) == 1
    assert simulate(nl, {"i": 1}) == {"o": 1}


def test_lta_truncates_low_bits():
    nl = gen_fixture(FixtureSpec("LTA", 8, 4))
    out = simulate(nl, add_inputs(0x0F, 0x01, 8))
    assert [out[f"s{i}"] for i in range(4)] == [0, 0, 0, 0]


def test_round_trip_identity():
    nl = parse_netlist(RCA3, LIB, prefixes={"add": "adder"})
    again = parse_netlist(write_netlist(nl), LIB, prefixes={"add": "adder"})
    assert write_netlist(again) == write_netlist(nl)
    assert [(g.instance_name, g.cell, g.connections, g.label) for g in again.gates] == \
        [(g.instance_name, g.cell, g.connections, g.label) for g in nl.gates]
    assert again.primary_inputs == nl.primary_inputs
    assert again.primary_outputs == nl.primary_outputs


def test_constants_accepted():
    nl = parse_netlist("module t; output o; BUF u (.A(1'b1), .Y(o)); endmodule", LIB)
    assert simulate(nl, {}) == {"o": 1}


@pytest.mark.parametrize("body, needle", [
    ("input a; output o; FOO2 bad_U1 (.A(a), .Y(o));", "bad_U1"),
    ("input a; output o; BUF u1 (.A(zz), .Y(o));", "zz"),
    ("input a; output o; BUF u1 (.Q(a), .Y(o));", "u1"),
    ("input a; output o; BUF u1 (.A(a), .Y(o)); BUF u2 (.A(a), .Y(o));", "o"),
    ("input a; output o; wire x; BUF u1 (.A(x), .Y(o));", "x"),
    ("input a; output o, p; BUF u1 (.A(a), .Y(o));", "p"),
    ("input a; output o; wire x; AND2 u1 (.A(a), .B(o), .Y(x)); BUF u2 (.A(x), .Y(o));", "cycle"),
    ("input a, clk; output o; DFF r1 (.D(a), .CK(clk), .Q(o));", "r1"),
])
def test_invalid_netlists(body, needle):
    with pytest.raises(NetlistError, match=needle):
        parse_netlist(f"module bad; {body} endmodule", LIB)


def test_missing_endmodule():
    with pytest.raises(NetlistError):
        parse_netlist("module x; input a;", LIB)


def test_labels_from_sidecar_and_prefix():
    classes = ["adder", "mux"]
    nl = parse_netlist(RCA3, LIB, labels={f"add_U{i}": "mux" if i % 2 else "adder" for i in range(10)},
                       class_names=classes)
    assert [g.label for g in nl.gates] == [0, 1] * 5
    nl = parse_netlist(RCA3, LIB, prefixes={"add": "adder"}, class_names=classes)
    assert all(g.label == 0 for g in nl.gates)


def test_unknown_class_rejected():
    with pytest.raises(NetlistError, match="sorter"):
        parse_netlist(RCA3, LIB, labels={"add_U0": "sorter"}, class_names=["adder"])


def test_missing_label_is_unknown():
    nl = parse_netlist(RCA3, LIB, labels={"add_U0": "adder"}, class_names=["adder"])
    assert nl.gates[0].label == 0 and nl.gates[1].label is None


def test_load_labels_requires_object():
    assert load_labels('{"u": "adder"}') == {"u": "adder"}
    with pytest.raises(NetlistError):
        load_labels("[1, 2]")


def test_simulate_requires_all_inputs():
    with pytest.raises(NetlistError):
        simulate(parse_netlist(RCA3, LIB), {"a0": 1})


def test_simulate_rejects_cells_without_semantics():
    lib = parse_cell_library("BUF 1\nMYSTERY 2\n")
    nl = parse_netlist("module t; input a, b; output o; MYSTERY u (.A(a), .B(b), .Y(o)); endmodule", lib)
    with pytest.raises(NetlistError, match="MYSTERY"):
        simulate(nl, {"a": 0, "b": 1})
