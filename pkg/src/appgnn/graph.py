"""Directed circuit graphs and node feature vectors.

Each gate becomes one node; an edge ``u -> v`` means the output net of ``u``
drives an input pin of ``v``. A node's raw feature row is laid out as::

    [is_pi, is_po] + one-hot(cell) + two-hop cell counts + [in_degree, out_degree]

so ``d = 2 * len(library) + 4``. Degrees count pin connections, including
primary-input pins and the primary-output port, so a gate that buffers a
primary input straight to a primary output has degrees (1, 1). Pins tied to
a constant count as primary-input pins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .netlist import CONSTANTS, Netlist


@dataclass
class CircuitGraph:
    name: str
    cell_names: list[str]  # library order
    cells: np.ndarray  # (n,) cell index per node
    node_names: list[str]
    labels: np.ndarray  # (n,) class id, -1 when unknown
    is_pi: np.ndarray  # (n,) bool
    is_po: np.ndarray  # (n,) bool
    pi_pins: np.ndarray  # (n,) input pins driven by primary inputs
    pins: dict[tuple[int, int], int]  # edge -> number of connected sink pins
    features: np.ndarray = None  # (n, d) raw stored feature rows
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.cells)
        self.succ: list[list[int]] = [[] for _ in range(n)]
        self.pred: list[list[int]] = [[] for _ in range(n)]
        for u, v in sorted(self.pins):
            self.succ[u].append(v)
            self.pred[v].append(u)
        if self.features is None:
            self.features = feature_matrix(self)

    @property
    def n(self) -> int:
        return len(self.cells)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(self.pins)

    @property
    def num_cells(self) -> int:
        return len(self.cell_names)

    @property
    def pi_nodes(self) -> set[int]:
        return set(np.flatnonzero(self.is_pi).tolist())

    @property
    def po_nodes(self) -> set[int]:
        return set(np.flatnonzero(self.is_po).tolist())

    def out_degree(self, v: int) -> int:
        return len(self.succ[v])

    def in_degree(self, v: int) -> int:
        return len(self.pred[v])

    def neighbors(self, v: int) -> list[int]:
        """Undirected neighbours of ``v``, without ``v`` itself."""
        return sorted((set(self.succ[v]) | set(self.pred[v])) - {v})

    def undirected_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Source/target arrays of the symmetric edge set (no self-loops)."""
        pairs = set()
        for u, v in self.pins:
            if u != v:
                pairs.add((u, v))
                pairs.add((v, u))
        if not pairs:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        arr = np.array(sorted(pairs), dtype=np.int64)
        return arr[:, 0], arr[:, 1]

    def pin_degrees(self, v: int) -> tuple[int, int]:
        """(in, out) pin-connection counts of ``v`` in the current structure."""
        din = int(self.pi_pins[v]) + sum(self.pins[(u, v)] for u in self.pred[v])
        dout = int(self.is_po[v]) + sum(self.pins[(v, w)] for w in self.succ[v])
        return din, dout

    def subgraph(self, nodes, name: str | None = None) -> "CircuitGraph":
        """Node-induced subgraph; stored feature rows are carried over unchanged."""
        keep = sorted(set(int(v) for v in nodes))
        remap = {v: i for i, v in enumerate(keep)}
        pins = {
            (remap[u], remap[v]): c
            for (u, v), c in self.pins.items()
            if u in remap and v in remap
        }
        idx = np.array(keep, dtype=np.int64)
        return CircuitGraph(
            name=name or self.name,
            cell_names=self.cell_names,
            cells=self.cells[idx],
            node_names=[self.node_names[i] for i in keep],
            labels=self.labels[idx],
            is_pi=self.is_pi[idx],
            is_po=self.is_po[idx],
            pi_pins=self.pi_pins[idx],
            pins=pins,
            features=self.features[idx].copy(),
            class_names=list(self.class_names),
        )

    def remove_nodes(self, nodes) -> "CircuitGraph":
        drop = set(int(v) for v in nodes)
        return self.subgraph([v for v in range(self.n) if v not in drop])

    def add_isolated_node(self, cell: int, name: str, label: int, row: np.ndarray,
                          is_pi: bool, is_po: bool, pi_pins: int) -> "CircuitGraph":
        return CircuitGraph(
            name=self.name,
            cell_names=self.cell_names,
            cells=np.append(self.cells, cell),
            node_names=self.node_names + [name],
            labels=np.append(self.labels, label),
            is_pi=np.append(self.is_pi, is_pi),
            is_po=np.append(self.is_po, is_po),
            pi_pins=np.append(self.pi_pins, pi_pins),
            pins=dict(self.pins),
            features=np.vstack([self.features, row[None, :]]),
            class_names=list(self.class_names),
        )

    def recompute_features(self) -> "CircuitGraph":
        self.features = feature_matrix(self)
        return self

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "library": list(self.cell_names),
            "classes": list(self.class_names),
            "nodes": [
                {
                    "id": i,
                    "name": self.node_names[i],
                    "cell": self.cell_names[int(self.cells[i])],
                    "label": int(self.labels[i]),
                    "is_pi": bool(self.is_pi[i]),
                    "is_po": bool(self.is_po[i]),
                    "pi_pins": int(self.pi_pins[i]),
                }
                for i in range(self.n)
            ],
            "edges": [[u, v] for u, v in self.edges],
            "edge_pins": [self.pins[e] for e in self.edges],
            "features": self.features.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "CircuitGraph":
        cell_names = list(data["library"])
        index = {c: i for i, c in enumerate(cell_names)}
        nodes = data["nodes"]
        edges = [tuple(e) for e in data["edges"]]
        counts = data.get("edge_pins") or [1] * len(edges)
        feats = data.get("features")
        return cls(
            name=data.get("name", "graph"),
            cell_names=cell_names,
            cells=np.array([index[nd["cell"]] for nd in nodes], dtype=np.int64),
            node_names=[nd.get("name", str(nd["id"])) for nd in nodes],
            labels=np.array([nd.get("label", -1) for nd in nodes], dtype=np.int64),
            is_pi=np.array([nd["is_pi"] for nd in nodes], dtype=bool),
            is_po=np.array([nd["is_po"] for nd in nodes], dtype=bool),
            pi_pins=np.array([nd.get("pi_pins", int(nd["is_pi"])) for nd in nodes], dtype=np.int64),
            pins={(int(u), int(v)): int(c) for (u, v), c in zip(edges, counts)},
            features=None if feats is None else np.array(feats, dtype=float).reshape(len(nodes), -1),
            class_names=list(data.get("classes", [])),
        )

    @classmethod
    def from_json(cls, text: str) -> "CircuitGraph":
        return cls.from_dict(json.loads(text))


def build_graph(nl: Netlist) -> CircuitGraph:
    """Turn a validated netlist into a :class:`CircuitGraph` (gate order kept)."""
    lib = nl.library
    drv = nl.drivers()
    pis = set(nl.primary_inputs)
    pos = set(nl.primary_outputs)
    n = len(nl.gates)
    pins: dict[tuple[int, int], int] = {}
    pi_pins = np.zeros(n, dtype=np.int64)
    is_po = np.zeros(n, dtype=bool)
    for v, g in enumerate(nl.gates):
        cell = lib[g.cell]
        for pin in cell.input_pins:
            net = g.connections[pin]
            u = drv.get(net)
            if u is not None:
                pins[(u, v)] = pins.get((u, v), 0) + 1
            elif net in pis or net in CONSTANTS:
                pi_pins[v] += 1
        is_po[v] = g.connections[cell.output_pin] in pos
    labels = np.array([-1 if g.label is None else g.label for g in nl.gates], dtype=np.int64)
    return CircuitGraph(
        name=nl.name,
        cell_names=lib.names,
        cells=np.array([g.cell for g in nl.gates], dtype=np.int64),
        node_names=[g.instance_name for g in nl.gates],
        labels=labels,
        is_pi=pi_pins > 0,
        is_po=is_po,
        pi_pins=pi_pins,
        pins=pins,
        class_names=list(nl.class_names),
    )


def two_hop_histogram(graph: CircuitGraph, v: int) -> np.ndarray:
    """Cell-type counts over nodes at undirected distance 1 or 2 from ``v``."""
    first = set(graph.neighbors(v))
    hood = set(first)
    for u in first:
        hood.update(graph.neighbors(u))
    hood.discard(v)
    counts = np.zeros(graph.num_cells)
    for u in hood:
        counts[graph.cells[u]] += 1
    return counts


def feature_vector(graph: CircuitGraph, v: int) -> np.ndarray:
    L = graph.num_cells
    x = np.zeros(2 * L + 4)
    x[0] = graph.is_pi[v]
    x[1] = graph.is_po[v]
    x[2 + graph.cells[v]] = 1.0
    x[2 + L: 2 + 2 * L] = two_hop_histogram(graph, v)
    x[2 + 2 * L:] = graph.pin_degrees(v)
    return x


def feature_matrix(graph: CircuitGraph) -> np.ndarray:
    L = graph.num_cells
    if graph.n == 0:
        return np.zeros((0, 2 * L + 4))
    return np.vstack([feature_vector(graph, v) for v in range(graph.n)])


def feature_layout(cell_names: list[str]) -> list[str]:
    return (
        ["is_pi", "is_po"]
        + [f"cell:{c}" for c in cell_names]
        + [f"hop2:{c}" for c in cell_names]
        + ["in_degree", "out_degree"]
    )


def disjoint_union(graphs: list[CircuitGraph], name: str = "union") -> CircuitGraph:
    if not graphs:
        raise ValueError("nothing to merge")
    pins = {}
    offset = 0
    for g in graphs:
        for (u, v), c in g.pins.items():
            pins[(u + offset, v + offset)] = c
        offset += g.n
    return CircuitGraph(
        name=name,
        cell_names=graphs[0].cell_names,
        cells=np.concatenate([g.cells for g in graphs]),
        node_names=[f"{g.name}/{s}" for g in graphs for s in g.node_names],
        labels=np.concatenate([g.labels for g in graphs]),
        is_pi=np.concatenate([g.is_pi for g in graphs]),
        is_po=np.concatenate([g.is_po for g in graphs]),
        pi_pins=np.concatenate([g.pi_pins for g in graphs]),
        pins=pins,
        features=np.vstack([g.features for g in graphs]),
        class_names=list(graphs[0].class_names),
    )


@dataclass
class Standardizer:
    """Per-column z-score with population std; near-constant columns map to 0."""

    mean: np.ndarray
    std: np.ndarray
    eps: float = 1e-12

    @classmethod
    def fit(cls, matrices: list[np.ndarray]) -> "Standardizer":
        mats = [np.asarray(m, dtype=float) for m in matrices if len(m)]
        if not mats:
            raise ValueError("cannot fit a standardizer on an empty set")
        X = np.vstack(mats)
        if not np.isfinite(X).all():
            raise ValueError("feature matrix contains non-finite values")
        return cls(X.mean(axis=0), X.std(axis=0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        ok = self.std >= self.eps
        out = np.zeros_like(X)
        out[:, ok] = (X[:, ok] - self.mean[ok]) / self.std[ok]
        return out

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float))


def fit_standardizer(matrices: list[np.ndarray]) -> Standardizer:
    return Standardizer.fit(matrices)


def apply_standardizer(stats: Standardizer, X: np.ndarray) -> np.ndarray:
    return stats.transform(X)
