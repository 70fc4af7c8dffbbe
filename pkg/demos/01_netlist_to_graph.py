"""From structural Verilog to a feature matrix.

Parses a 3-bit ripple-carry adder, checks it by simulation, then prints
the graph and a few feature rows.
"""
import numpy as np

from appgnn import build_graph, default_library, parse_netlist, simulate, write_netlist
from appgnn.fixtures import FixtureSpec, gen_fixture

text = write_netlist(gen_fixture(FixtureSpec("exact", 3)))
print(text)

nl = parse_netlist(text, default_library())
a, b = np.meshgrid(np.arange(8), np.arange(8))
a, b = a.ravel(), b.ravel()
ins = {f"a{i}": (a >> i) & 1 for i in range(3)}
ins.update({f"b{i}": (b >> i) & 1 for i in range(3)})
out = simulate(nl, ins)
total = sum(np.asarray(out[f"s{i}"], dtype=int) << i for i in range(3)) + (np.asarray(out["cout"], dtype=int) << 3)
print("all 64 input pairs add correctly:", bool((total == a + b).all()))

g = build_graph(nl)
print(f"\n{g.n} nodes, {len(g.pins)} driver->sink edges, feature width {g.features.shape[1]}")
cells = g.cell_names
for v in range(g.n):
    f = g.features[v]
    hist = {cells[j]: int(c) for j, c in enumerate(f[2 + len(cells):2 + 2 * len(cells)]) if c}
    print(f"  {g.node_names[v]:8s} {cells[g.cells[v]]:6s} pi={int(f[0])} po={int(f[1])} "
          f"in={int(f[-2])} out={int(f[-1])} two-hop={hist}")
