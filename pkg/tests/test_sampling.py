import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from appgnn.fixtures import FixtureSpec, gen_fixture
from appgnn.graph import CircuitGraph, build_graph
from appgnn.netlist import parse_cell_library
from appgnn.sampling import (SamplingConfig, find_datapath, identify_leaf_nodes, leaf_node_sampling,
                             leaf_sampling_with_report, random_node_sampling, random_sampling_with_report,
                             sample_graph)

from oracles import (chain_netlist, graph_name_edges, node_index, oracle_datapath, oracle_datapath_literal,
                     oracle_leaves, oracle_sample, random_dag)


@pytest.fixture
def chain():
    return build_graph(chain_netlist())


def names(graph, nodes):
    return {graph.node_names[v] for v in nodes}


def test_chain_datapath_of_u17(chain):
    dp = find_datapath(chain, node_index(chain, "add_U17"))
    assert names(chain, dp) == {"add_U13", "add_U14", "add_U15", "add_U16"}


def test_chain_root_has_empty_datapath(chain):
    assert find_datapath(chain, node_index(chain, "add_U20")) == set()


def test_chain_sample_u17_removes_five(chain):
    out = sample_graph(chain, [node_index(chain, "add_U17")])
    assert out.n == chain.n - 5
    assert "add_U17" not in out.node_names


def test_chain_sample_u20_removes_one(chain):
    out = sample_graph(chain, [node_index(chain, "add_U20")])
    assert out.n == chain.n - 1


def test_random_sampling_with_seed_hitting_u17(chain):
    for seed in range(200):
        out, rep = random_sampling_with_report(chain, SamplingConfig("random", 1, seed))
        if rep.selected == ["add_U17"]:
            break
    else:
        pytest.fail("no seed selects U17")
    assert out.n == chain.n - 5
    assert len(rep.removed) == 5


def test_leaf_u19_gets_buf(chain):
    leaves = identify_leaf_nodes(chain)
    assert names(chain, leaves) == {"add_U12", "add_U17", "add_U19", "add_U20"}
    for seed in range(200):
        out, rep = leaf_sampling_with_report(chain, SamplingConfig("leaf", 1, seed))
        if rep.selected == ["add_U19"]:
            break
    assert rep.removed == ["add_U18", "add_U19"]
    assert rep.added == ["add_U19_buf"]
    assert out.n == chain.n - 2 + 1
    assert len(identify_leaf_nodes(out)) == len(leaves)
    v = out.node_names.index("add_U19_buf")
    assert out.cell_names[out.cells[v]] == "BUF"
    assert out.is_pi[v] and out.is_po[v]
    assert out.features[v, -2] == 1 and out.features[v, -1] == 1
    assert out.labels[v] == chain.labels[node_index(chain, "add_U19")]
    assert not out.neighbors(v)


def test_leaves_examples():
    chain = CircuitGraph("c", ["BUF"], np.zeros(3, int), list("abc"), np.zeros(3, int),
                         np.array([1, 0, 0], bool), np.array([0, 0, 1], bool), np.array([1, 0, 0]),
                         {(0, 1): 1, (1, 2): 1})
    assert identify_leaf_nodes(chain) == {2}
    flat = CircuitGraph("f", ["BUF"], np.zeros(3, int), list("abc"), np.zeros(3, int),
                        np.ones(3, bool), np.ones(3, bool), np.ones(3, int), {})
    assert identify_leaf_nodes(flat) == {0, 1, 2}


def test_rca_leaves_are_output_gates():
    nl = gen_fixture(FixtureSpec("exact", 3))
    g = build_graph(nl)
    assert identify_leaf_nodes(g) == g.po_nodes
    assert len(g.po_nodes) == 4


def test_fanout_free_tree_collapses():
    # in-tree: every internal node has a single successor
    pins = {(1, 0): 1, (2, 0): 1, (3, 1): 1, (4, 1): 1, (5, 2): 1}
    n = 6
    g = CircuitGraph("t", ["BUF", "AND2"], np.ones(n, int), [f"v{i}" for i in range(n)], np.zeros(n, int),
                     np.zeros(n, bool), np.arange(n) == 0, np.zeros(n, int), pins)
    assert sample_graph(g, identify_leaf_nodes(g)).n == 0


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_against_oracles(seed):
    rng = np.random.default_rng(seed)
    g = random_dag(rng)
    assert identify_leaf_nodes(g) == oracle_leaves(g)
    for c in range(g.n):
        dp = find_datapath(g, c)
        assert dp == oracle_datapath(g, c)
        assert all(g.out_degree(p) == 1 for p in dp)
        assert find_datapath(g, c, exclusive=False) == oracle_datapath_literal(g, c)
    k = int(rng.integers(1, g.n + 1))
    sel = [int(x) for x in rng.choice(g.n, size=k, replace=False)]
    out = sample_graph(g, sel)
    want_nodes, want_edges = oracle_sample(g, sel)
    assert set(out.node_names) == want_nodes
    assert graph_name_edges(out) == want_edges


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_leaf_sampling_preserves_leaf_count(seed, n):
    # outputs only at sinks, as in a netlist whose output gates have no fan-out
    g = random_dag(np.random.default_rng(seed), extra_po=0.0)
    leaves = identify_leaf_nodes(g)
    n = min(n, len(leaves))
    out, rep = leaf_sampling_with_report(g, SamplingConfig("leaf", n, seed))
    assert len(identify_leaf_nodes(out)) == len(leaves)
    assert len(rep.added) == n
    assert out.n <= g.n
    assert set(out.node_names) - {f"{x}_buf" for x in rep.selected} <= set(g.node_names)


def test_internal_output_gate_can_become_leaf():
    # a -> b, a -> c and a also drives an output. Removing both leaves leaves
    # a as a new sink; it is kept because it still drives its own output.
    g = CircuitGraph("po", ["BUF", "AND2"], np.ones(3, int), list("abc"), np.zeros(3, int),
                     np.array([1, 0, 0], bool), np.ones(3, bool), np.array([2, 1, 1]),
                     {(0, 1): 1, (0, 2): 1})
    out = leaf_node_sampling(g, SamplingConfig("leaf", 2, 0))
    assert out.node_names[0] == "a"
    assert len(identify_leaf_nodes(out)) == 3


def test_leaf_sampling_on_adders_preserves_leaves():
    for spec in [FixtureSpec("exact", 8), FixtureSpec("exact", 12, 0, "nand"), FixtureSpec("LOA", 8, 3)]:
        g = build_graph(gen_fixture(spec))
        for n in range(1, len(identify_leaf_nodes(g)) + 1):
            out = leaf_node_sampling(g, SamplingConfig("leaf", n, n))
            assert len(identify_leaf_nodes(out)) == len(identify_leaf_nodes(g))


def test_all_leaves_of_lta_leaves_only_buffers():
    g = build_graph(gen_fixture(FixtureSpec("LTA", 6, 3)))
    n = len(identify_leaf_nodes(g))
    out = leaf_node_sampling(g, SamplingConfig("leaf", n, 0))
    assert out.n == n
    assert {out.cell_names[c] for c in out.cells} == {"BUF"}


def test_random_all_nodes_empties_graph(chain):
    assert random_node_sampling(chain, SamplingConfig("random", chain.n, 3)).n == 0


def test_sampling_is_deterministic(chain):
    cfg = SamplingConfig("leaf", 2, 11)
    assert leaf_node_sampling(chain, cfg).to_json() == leaf_node_sampling(chain, cfg).to_json()
    cfg = SamplingConfig("random", 3, 11)
    assert random_node_sampling(chain, cfg).to_json() == random_node_sampling(chain, cfg).to_json()


def test_features_not_recomputed_by_default(chain):
    out = random_node_sampling(chain, SamplingConfig("random", 1, 0))
    rows = {n: chain.features[i] for i, n in enumerate(chain.node_names)}
    for i, n in enumerate(out.node_names):
        assert np.array_equal(out.features[i], rows[n])
    fresh = random_node_sampling(chain, SamplingConfig("random", 1, 0, recompute_features=True))
    assert fresh.n == out.n


def test_cyclic_graph_terminates():
    pins = {(0, 1): 1, (1, 2): 1, (2, 0): 1, (2, 3): 1}
    g = CircuitGraph("cyc", ["BUF"], np.zeros(4, int), list("abcd"), np.zeros(4, int),
                     np.zeros(4, bool), np.array([0, 0, 0, 1], bool), np.zeros(4, int), pins)
    assert find_datapath(g, 3) == set()
    assert find_datapath(g, 1) == {0}
    assert find_datapath(g, 2) == {0, 1}


@pytest.mark.parametrize("cfg", [
    SamplingConfig("leaf", 5, 0),
    SamplingConfig("random", 12, 0),
])
def test_too_many_selected(chain, cfg):
    with pytest.raises(ValueError):
        (leaf_node_sampling if cfg.mode == "leaf" else random_node_sampling)(chain, cfg)


def test_config_validation(chain):
    with pytest.raises(ValueError):
        SamplingConfig("leaf", 0)
    with pytest.raises(ValueError):
        SamplingConfig("cut", 1)
    with pytest.raises(ValueError):
        sample_graph(chain, [])
    with pytest.raises(ValueError):
        sample_graph(chain, [99])


def test_leaf_sampling_needs_buf():
    lib = parse_cell_library("AND2 2\n")
    from appgnn.netlist import parse_netlist
    nl = parse_netlist("module t; input a, b; output o; AND2 u (.A(a), .B(b), .Y(o)); endmodule", lib)
    with pytest.raises(ValueError, match="BUF"):
        leaf_node_sampling(build_graph(nl), SamplingConfig("leaf", 1))
