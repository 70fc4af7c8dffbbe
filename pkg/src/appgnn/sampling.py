"""Node sampling that mimics structural approximation of a circuit graph.

A selected node is removed together with its datapath: the fan-in cone
nodes whose only fan-out leads (through other such nodes) into it. Random
sampling picks seed nodes anywhere; leaf sampling picks primary-output leaves
and puts an isolated ``BUF`` node in place of each removed leaf.

When several leaves are removed, a node can lose its whole fan-out without
being in any single datapath. Leaf sampling prunes such dangling logic by
default (``prune_dangling``) so the sampled graph has exactly as many leaves
as the source; random sampling keeps the plain removal unless asked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import CircuitGraph


@dataclass
class SamplingConfig:
    mode: str = "leaf"  # "random" or "leaf"
    num_selected: int = 1
    rng_seed: int = 0
    recompute_features: bool = False
    prune_dangling: bool | None = None  # default: on for leaf mode only

    def __post_init__(self):
        if self.mode not in ("random", "leaf"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if self.num_selected < 1:
            raise ValueError("num_selected must be >= 1")
        if self.prune_dangling is None:
            self.prune_dangling = self.mode == "leaf"


@dataclass
class SamplingReport:
    selected: list[str] = field(default_factory=list)
    removed: list[str] = field(default_factory=list)
    added: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"selected": self.selected, "removed": self.removed, "added": self.added}


def find_datapath(graph: CircuitGraph, c: int, exclusive: bool = True) -> set[int]:
    """Nodes in the datapath of ``c`` (``c`` itself is never returned).

    With ``exclusive=True`` the backward walk only continues through
    predecessors of output degree 1, so every returned node feeds ``c`` and
    nothing else. ``exclusive=False`` follows the literal recursion, which
    walks the whole fan-in cone and keeps every node of output degree 1 in it.
    Each node is expanded at most once, so cycles terminate.
    """
    found: set[int] = set()
    visited = {c}
    stack = [c]
    while stack:
        x = stack.pop()
        for p in graph.pred[x]:
            if p in visited:
                continue
            visited.add(p)
            single = graph.out_degree(p) == 1
            if single:
                found.add(p)
            if single or not exclusive:
                stack.append(p)
    return found


def identify_leaf_nodes(graph: CircuitGraph) -> set[int]:
    return {v for v in range(graph.n) if graph.out_degree(v) == 0}


def removal_set(graph: CircuitGraph, selected) -> set[int]:
    drop: set[int] = set()
    for i in selected:
        drop.add(int(i))
        drop |= find_datapath(graph, int(i))
    return drop


def dangling_after(graph: CircuitGraph, drop: set[int]) -> set[int]:
    """Non-output nodes left without fan-out once ``drop`` is removed (transitively)."""
    extra: set[int] = set()
    gone = set(drop)
    frontier = {p for v in gone for p in graph.pred[v]}
    while frontier:
        nxt = set()
        for v in frontier:
            if v in gone or graph.is_po[v] or not graph.succ[v]:
                continue
            if all(w in gone for w in graph.succ[v]):
                gone.add(v)
                extra.add(v)
                nxt.update(graph.pred[v])
        frontier = nxt
    return extra


def sample_graph(graph: CircuitGraph, selected) -> CircuitGraph:
    """Remove every selected node together with its datapath."""
    selected = list(selected)
    if not selected:
        raise ValueError("no nodes selected for removal")
    bad = [v for v in selected if not 0 <= int(v) < graph.n]
    if bad:
        raise ValueError(f"selected nodes {bad} not in graph")
    return graph.remove_nodes(removal_set(graph, selected))


def _choose(candidates: list[int], n: int, seed: int) -> list[int]:
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(candidates), size=n, replace=False)
    return [candidates[i] for i in picks]


def buf_replacement_row(num_cells: int, buf_index: int) -> np.ndarray:
    row = np.zeros(2 * num_cells + 4)
    row[0] = row[1] = 1.0
    row[2 + buf_index] = 1.0
    row[-2:] = 1.0
    return row


def random_sampling_with_report(graph: CircuitGraph, cfg: SamplingConfig):
    n = cfg.num_selected
    if n > graph.n:
        raise ValueError(f"cannot select {n} nodes from a graph with {graph.n}")
    selected = _choose(list(range(graph.n)), n, cfg.rng_seed)
    drop = removal_set(graph, selected)
    if cfg.prune_dangling:
        drop |= dangling_after(graph, drop)
    out = graph.remove_nodes(drop)
    if cfg.recompute_features:
        out.recompute_features()
    report = SamplingReport(
        selected=[graph.node_names[v] for v in selected],
        removed=[graph.node_names[v] for v in sorted(drop)],
    )
    return out, report


def leaf_sampling_with_report(graph: CircuitGraph, cfg: SamplingConfig):
    if "BUF" not in graph.cell_names:
        raise ValueError("leaf sampling needs a BUF cell in the library")
    leaves = sorted(identify_leaf_nodes(graph))
    if not leaves:
        raise ValueError("graph has no leaf nodes")
    n = cfg.num_selected
    if n > len(leaves):
        raise ValueError(f"cannot select {n} leaves, graph has {len(leaves)}")
    selected = _choose(leaves, n, cfg.rng_seed)
    drop = removal_set(graph, selected)
    if cfg.prune_dangling:
        drop |= dangling_after(graph, drop)
    out = graph.remove_nodes(drop)
    buf = graph.cell_names.index("BUF")
    row = buf_replacement_row(graph.num_cells, buf)
    added = []
    for leaf in selected:
        name = f"{graph.node_names[leaf]}_buf"
        out = out.add_isolated_node(buf, name, int(graph.labels[leaf]), row,
                                    is_pi=True, is_po=True, pi_pins=1)
        added.append(name)
    if cfg.recompute_features:
        out.recompute_features()
    report = SamplingReport(
        selected=[graph.node_names[v] for v in selected],
        removed=[graph.node_names[v] for v in sorted(drop)],
        added=added,
    )
    return out, report


def random_node_sampling(graph: CircuitGraph, cfg: SamplingConfig) -> CircuitGraph:
    return random_sampling_with_report(graph, cfg)[0]


def leaf_node_sampling(graph: CircuitGraph, cfg: SamplingConfig) -> CircuitGraph:
    return leaf_sampling_with_report(graph, cfg)[0]


def sample_with_report(graph: CircuitGraph, cfg: SamplingConfig):
    if cfg.mode == "random":
        return random_sampling_with_report(graph, cfg)
    return leaf_sampling_with_report(graph, cfg)
