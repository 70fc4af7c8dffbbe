import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from appgnn.fixtures import FixtureSpec, gen_fixture
from appgnn.graph import (CircuitGraph, Standardizer, apply_standardizer, build_graph, disjoint_union,
                          feature_layout, feature_vector, fit_standardizer, two_hop_histogram)
from appgnn.netlist import default_library, parse_netlist
from appgnn.sampling import buf_replacement_row

from oracles import adjacency, random_dag

LIB = default_library()
L = len(LIB)

# Node g is an XNOR2 driving a primary output; its undirected two-hop
# neighbourhood holds two NAND2, two XNOR2, one NOR2 and one INV.
SMALL_NETLIST = """
module small;
input a, b, c, d;
output o1, o2;
wire n1, n2, n3, n5, n6;
INV   u3 (.A(a), .Y(n3));
NAND2 u1 (.A(n3), .B(b), .Y(n1));
NAND2 u4 (.A(n1), .B(c), .Y(o2));
XNOR2 u5 (.A(a), .B(b), .Y(n5));
XNOR2 u6 (.A(c), .B(d), .Y(n6));
NOR2  u2 (.A(n5), .B(n6), .Y(n2));
XNOR2 g  (.A(n1), .B(n2), .Y(o1));
endmodule
"""


def col(name):
    return feature_layout(LIB.names).index(name)


def test_feature_dimension():
    g = build_graph(parse_netlist(SMALL_NETLIST, LIB))
    assert g.features.shape == (7, 2 * 24 + 4)


def test_small_neighbourhood():
    g = build_graph(parse_netlist(SMALL_NETLIST, LIB))
    v = g.node_names.index("g")
    hist = two_hop_histogram(g, v)
    got = {LIB.names[i]: int(c) for i, c in enumerate(hist) if c}
    assert got == {"NAND2": 2, "XNOR2": 2, "NOR2": 1, "INV": 1}


def test_small_feature_vector():
    g = build_graph(parse_netlist(SMALL_NETLIST, LIB))
    x = feature_vector(g, g.node_names.index("g"))
    assert x[col("is_pi")] == 0 and x[col("is_po")] == 1
    assert x[col("cell:XNOR2")] == 1
    assert x[2:2 + L].sum() == 1
    assert x[col("in_degree")] == 2 and x[col("out_degree")] == 1


def test_buf_replacement_row():
    row = buf_replacement_row(L, LIB.index["BUF"])
    assert row[col("is_pi")] == 1 and row[col("is_po")] == 1
    assert row[col("cell:BUF")] == 1 and row[2:2 + L].sum() == 1
    assert not row[2 + L:2 + 2 * L].any()
    assert row[col("in_degree")] == 1 and row[col("out_degree")] == 1


def test_single_buf_graph():
    g = build_graph(parse_netlist("module t; input i; output o; BUF u (.A(i), .Y(o)); endmodule", LIB))
    assert g.n == 1 and g.edges == []
    assert g.features[0, col("is_pi")] == 1 and g.features[0, col("is_po")] == 1
    assert g.features[0, col("in_degree")] == 1 and g.features[0, col("out_degree")] == 1


def test_exact_adder_graph_connected():
    # one component, apart from the bit-0 sum gate that only sees ports
    nl = gen_fixture(FixtureSpec("exact", 12))
    g = build_graph(nl)
    assert g.n == len(nl.gates)
    lonely = [v for v in range(g.n) if not g.neighbors(v)]
    assert len(lonely) == 1
    start = 0 if lonely[0] else 1
    seen, stack = {start}, [start]
    while stack:
        for u in g.neighbors(stack.pop()):
            if u not in seen:
                seen.add(u)
                stack.append(u)
    assert len(seen) == g.n - 1


def test_lca_graph_has_isolated_copies():
    exact = build_graph(gen_fixture(FixtureSpec("exact", 12)))
    g = build_graph(gen_fixture(FixtureSpec("LCA", 12, 6)))
    buf = LIB.index["BUF"]
    copies = [v for v in range(g.n) if not g.neighbors(v) and g.cells[v] == buf]
    assert len(copies) == 6
    assert g.n < exact.n


def bfs_census(graph, v):
    A = adjacency(graph)
    U = A | A.T
    np.fill_diagonal(U, False)
    one = U[v]
    two = (U[one].any(axis=0) if one.any() else np.zeros(graph.n, bool)) | one
    two[v] = False
    return np.bincount(graph.cells[two], minlength=graph.num_cells)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_histogram_matches_bfs_census(seed):
    g = random_dag(np.random.default_rng(seed), n_max=10)
    for v in range(g.n):
        assert (two_hop_histogram(g, v) == bfs_census(g, v)).all()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_graph_invariants(seed):
    g = random_dag(np.random.default_rng(seed))
    for u, v in g.pins:
        assert v in g.succ[u] and u in g.pred[v]
    assert sum(len(s) for s in g.succ) == len(g.pins)
    assert (g.features[:, 2:2 + L].sum(axis=1) == 1).all()
    again = CircuitGraph.from_json(g.to_json())
    assert again.to_json() == g.to_json()
    assert np.array_equal(again.features, g.features)


def test_isolated_node_has_zero_neighbourhood():
    g = build_graph(gen_fixture(FixtureSpec("LTA", 8, 3)))
    buf = [v for v in range(g.n) if not g.neighbors(v)]
    assert buf
    assert all(not two_hop_histogram(g, v).any() for v in buf)


def test_subgraph_keeps_stored_rows():
    g = build_graph(parse_netlist(SMALL_NETLIST, LIB))
    keep = [g.node_names.index(n) for n in ("u3", "u1", "g")]
    sub = g.subgraph(keep)
    assert np.array_equal(sub.features, g.features[sorted(keep)])
    names = {(sub.node_names[u], sub.node_names[v]) for u, v in sub.pins}
    assert names == {("u3", "u1"), ("u1", "g")}


def test_disjoint_union_offsets():
    a = build_graph(parse_netlist(SMALL_NETLIST, LIB))
    b = build_graph(gen_fixture(FixtureSpec("exact", 3)))
    u = disjoint_union([a, b])
    assert u.n == a.n + b.n
    assert len(u.pins) == len(a.pins) + len(b.pins)
    assert all(x >= a.n and y >= a.n for x, y in list(u.pins)[len(a.pins):])
    assert np.array_equal(u.features, np.vstack([a.features, b.features]))


def test_standardizer_two_values():
    s = fit_standardizer([np.array([[0.0], [2.0]])])
    assert np.allclose(apply_standardizer(s, np.array([[0.0], [2.0]])).ravel(), [-1, 1])


def test_standardizer_constant_column():
    X = np.array([[3.0, 1.0], [3.0, 2.0], [3.0, 4.0]])
    s = Standardizer.fit([X])
    Z = s.transform(X)
    assert (Z[:, 0] == 0).all()
    assert abs(Z[:, 1].mean()) < 1e-12 and abs(Z[:, 1].std() - 1) < 1e-12


def test_standardizer_round_trip():
    X = np.random.default_rng(0).normal(size=(20, 5))
    s = Standardizer.fit([X[:10], X[10:]])
    t = Standardizer.from_dict(s.to_dict())
    assert np.array_equal(s.transform(X), t.transform(X))


def test_standardizer_needs_data():
    with pytest.raises(ValueError):
        Standardizer.fit([])


def test_train_stats_not_zero_mean_on_eval_graph():
    train = [build_graph(gen_fixture(FixtureSpec("exact", w))) for w in (4, 8)]
    s = Standardizer.fit([g.features for g in train])
    ev = s.transform(build_graph(gen_fixture(FixtureSpec("LTA", 8, 4))).features)
    assert np.abs(ev.mean(axis=0)).max() > 0.1
