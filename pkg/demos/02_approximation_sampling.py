"""Removing logic the way approximation does.

Random node sampling cuts a gate plus the chain that only feeds it. Leaf
sampling does the same from an output gate and puts a BUF in its place,
so the sampled circuit keeps its output count, like a truncated adder
that ties its low sum bits off.
"""
from appgnn import SamplingConfig, build_graph, identify_leaf_nodes
from appgnn.fixtures import FixtureSpec, gen_fixture
from appgnn.sampling import leaf_sampling_with_report, removal_set

g = build_graph(gen_fixture(FixtureSpec("exact", 8)))
print(f"exact 8-bit adder: {g.n} gates, {len(identify_leaf_nodes(g))} leaves")

leaves = sorted(identify_leaf_nodes(g), key=lambda v: g.node_names[v])
# sum XORs share their inputs with the carry chain, so each takes only
# itself; the carry-out gate owns its generate AND and takes it along
for v in leaves:
    gone = sorted(g.node_names[u] for u in removal_set(g, [v]))
    print(f"  selecting {g.node_names[v]:8s} removes {gone}")

for level in (1, 3, 6):
    s, rep = leaf_sampling_with_report(g, SamplingConfig("leaf", level, rng_seed=1))
    print(f"\nlevel {level}: removed {len(rep.removed)} gates, added {rep.added}")
    print(f"  {s.n} nodes left, leaves {len(identify_leaf_nodes(s))} (was {len(identify_leaf_nodes(g))})")

# for comparison, a real truncated adder of the same width
lta = build_graph(gen_fixture(FixtureSpec("LTA", 8, 3)))
print(f"\nLTA(8,3) for comparison: {lta.n} nodes, {len(identify_leaf_nodes(lta))} leaves")
