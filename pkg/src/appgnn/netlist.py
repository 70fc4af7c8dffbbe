"""Cell libraries, structural gate-level netlists, and boolean simulation.

The netlist dialect is a small structural-Verilog subset::

    module add3;
    input a0, a1, b0, b1;
    output s0, s1, cout;
    wire c1;
    XOR2 U1 (.A(a0), .B(b0), .Y(s0));
    ...
    endmodule

Every instance connects each pin of its cell exactly once. Input pins may
also be tied to the constants ``1'b0`` / ``1'b1``. Only combinational cells
are accepted.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import reduce
from importlib import resources
from typing import Callable, Iterable, Mapping

import numpy as np


class NetlistError(ValueError):
    """Raised for malformed cell libraries or netlists."""


_SEQUENTIAL = re.compile(r"^(S?DFF|DLH|DLL|LATCH|SDFF|DFF|FF)", re.IGNORECASE)
_DEFAULT_PINS = "ABCDEFGH"
CONSTANTS = {"1'b0": 0, "1'b1": 1}


@dataclass(frozen=True)
class CellDef:
    name: str
    input_pins: tuple[str, ...]
    output_pin: str = "Y"

    def __post_init__(self):
        if not self.input_pins:
            raise NetlistError(f"cell {self.name!r} has no input pins")
        pins = self.input_pins + (self.output_pin,)
        if len(set(pins)) != len(pins):
            raise NetlistError(f"cell {self.name!r} has duplicate pin names")

    @property
    def pins(self) -> tuple[str, ...]:
        return self.input_pins + (self.output_pin,)


class CellLibrary:
    """Ordered set of cells. The order fixes the feature layout."""

    def __init__(self, cells: Iterable[CellDef]):
        self.cells: list[CellDef] = list(cells)
        self.index: dict[str, int] = {}
        for i, c in enumerate(self.cells):
            if c.name in self.index:
                raise NetlistError(f"duplicate cell name {c.name!r}")
            self.index[c.name] = i

    def __len__(self):
        return len(self.cells)

    def __getitem__(self, key: int | str) -> CellDef:
        if isinstance(key, str):
            return self.cells[self.index[key]]
        return self.cells[key]

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def __eq__(self, other):
        return isinstance(other, CellLibrary) and self.cells == other.cells

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.cells]

    @property
    def has_buf(self) -> bool:
        return "BUF" in self.index

    def require_buf(self):
        if not self.has_buf:
            raise NetlistError("cell library has no BUF cell (needed for leaf sampling)")

    def to_text(self) -> str:
        lines = []
        for c in self.cells:
            default = tuple(_DEFAULT_PINS[: len(c.input_pins)])
            if c.input_pins == default and c.output_pin == "Y":
                lines.append(f"{c.name} {len(c.input_pins)}")
            else:
                lines.append(f"{c.name} {len(c.input_pins)} {' '.join(c.pins)}")
        return "\n".join(lines) + "\n"


def parse_cell_library(text: str) -> CellLibrary:
    """Parse ``NAME <num_inputs> [in_pin ... out_pin]`` lines; ``#`` starts a comment.

    Without explicit pins the inputs are named A, B, C, ... and the output Y.
    """
    cells = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise NetlistError(f"line {lineno}: expected 'NAME <num_inputs>'")
        name = parts[0]
        try:
            n_in = int(parts[1])
        except ValueError:
            raise NetlistError(f"line {lineno}: bad input count {parts[1]!r}") from None
        if n_in < 1:
            raise NetlistError(f"line {lineno}: cell {name!r} has zero inputs")
        if len(parts) == 2:
            if n_in > len(_DEFAULT_PINS):
                raise NetlistError(f"line {lineno}: too many inputs for default pin names")
            cell = CellDef(name, tuple(_DEFAULT_PINS[:n_in]))
        elif len(parts) == n_in + 3:
            cell = CellDef(name, tuple(parts[2:-1]), parts[-1])
        else:
            raise NetlistError(f"line {lineno}: expected {n_in} input pins and one output pin")
        cells.append(cell)
    return CellLibrary(cells)


def default_library() -> CellLibrary:
    text = resources.files("appgnn").joinpath("default_cells.lib").read_text()
    return parse_cell_library(text)


# Boolean semantics keyed by cell name; arguments follow input pin order.
# Works on python ints and numpy integer arrays holding 0/1.
def _not(x):
    return x ^ 1


def _and(*xs):
    return reduce(lambda p, q: p & q, xs)


def _or(*xs):
    return reduce(lambda p, q: p | q, xs)


CELL_FUNCTIONS: dict[str, Callable] = {
    "BUF": lambda a: a,
    "INV": _not,
    "AND2": _and,
    "AND3": _and,
    "AND4": _and,
    "OR2": _or,
    "OR3": _or,
    "OR4": _or,
    "NAND2": lambda *x: _not(_and(*x)),
    "NAND3": lambda *x: _not(_and(*x)),
    "NAND4": lambda *x: _not(_and(*x)),
    "NOR2": lambda *x: _not(_or(*x)),
    "NOR3": lambda *x: _not(_or(*x)),
    "NOR4": lambda *x: _not(_or(*x)),
    "XOR2": lambda a, b: a ^ b,
    "XNOR2": lambda a, b: _not(a ^ b),
    "AOI21": lambda a, b, c: _not((a & b) | c),
    "AOI22": lambda a, b, c, d: _not((a & b) | (c & d)),
    "OAI21": lambda a, b, c: _not((a | b) & c),
    "OAI22": lambda a, b, c, d: _not((a | b) & (c | d)),
    "AO21": lambda a, b, c: (a & b) | c,
    "OA21": lambda a, b, c: (a | b) & c,
    "MUX2": lambda a, b, s: (a & _not(s)) | (b & s),
    "MAJ3": lambda a, b, c: (a & b) | (a & c) | (b & c),
}


@dataclass
class GateInst:
    instance_name: str
    cell: int
    connections: dict[str, str]
    label: int | None = None


@dataclass
class Netlist:
    name: str
    library: CellLibrary
    gates: list[GateInst]
    nets: list[str]
    primary_inputs: list[str]
    primary_outputs: list[str]
    class_names: list[str] = field(default_factory=list)

    def cell_of(self, gate: GateInst) -> CellDef:
        return self.library[gate.cell]

    def drivers(self) -> dict[str, int]:
        """Map net -> index of the driving gate (primary inputs are absent)."""
        out = {}
        for i, g in enumerate(self.gates):
            out[g.connections[self.cell_of(g).output_pin]] = i
        return out

    def topological_order(self) -> list[int]:
        drv = self.drivers()
        indeg = [0] * len(self.gates)
        fanout: list[list[int]] = [[] for _ in self.gates]
        for i, g in enumerate(self.gates):
            for pin in self.cell_of(g).input_pins:
                j = drv.get(g.connections[pin])
                if j is not None:
                    indeg[i] += 1
                    fanout[j].append(i)
        ready = [i for i, d in enumerate(indeg) if d == 0]
        order = []
        while ready:
            i = ready.pop()
            order.append(i)
            for j in fanout[i]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    ready.append(j)
        if len(order) != len(self.gates):
            stuck = sorted(self.gates[i].instance_name for i, d in enumerate(indeg) if d > 0)
            raise NetlistError(f"combinational cycle through {', '.join(stuck[:5])}")
        return order

    def labels_by_name(self) -> dict[str, str]:
        return {
            g.instance_name: self.class_names[g.label]
            for g in self.gates
            if g.label is not None
        }


_STMT = re.compile(r"\s+")
_INST = re.compile(r"^(\w+)\s+(\S+)\s*\((.*)\)$", re.DOTALL)
_CONN = re.compile(r"\.(\w+)\s*\(\s*([^()\s]*)\s*\)")


def _split_nets(body: str) -> list[str]:
    return [n.strip() for n in body.split(",") if n.strip()]


def parse_netlist(
    text: str,
    lib: CellLibrary,
    labels: Mapping[str, str] | None = None,
    class_names: list[str] | None = None,
    prefixes: Mapping[str, str] | None = None,
) -> Netlist:
    """Parse and validate a structural netlist.

    Labels come from ``labels`` (instance name -> class name) when given,
    otherwise from the instance-name prefix before the first underscore,
    looked up in ``prefixes`` (prefix -> class name). ``class_names`` fixes the
    class-id order; unknown class names raise.
    """
    text = re.sub(r"//[^\n]*", "", text)
    text = re.sub(r"/\*.*?\*/", "", text, flags=re.DOTALL)
    m = re.search(r"\bendmodule\b", text)
    if not m:
        raise NetlistError("missing endmodule")
    trailing = text[m.end():].strip()
    if trailing:
        raise NetlistError("text after endmodule")
    stmts = [s.strip() for s in text[: m.start()].split(";")]
    stmts = [_STMT.sub(" ", s) for s in stmts if s]
    if not stmts or not stmts[0].startswith("module "):
        raise NetlistError("netlist must start with 'module <name>;'")
    name = stmts[0].split(" ", 1)[1].strip()
    name = name.split("(", 1)[0].strip()

    pis: list[str] = []
    pos: list[str] = []
    nets: list[str] = []
    declared: set[str] = set()
    gates: list[GateInst] = []
    seen_inst: set[str] = set()

    def declare(net):
        if net not in declared:
            declared.add(net)
            nets.append(net)

    for stmt in stmts[1:]:
        kw, _, rest = stmt.partition(" ")
        if kw in ("input", "output", "wire"):
            for net in _split_nets(rest):
                declare(net)
                if kw == "input":
                    pis.append(net)
                elif kw == "output":
                    pos.append(net)
            continue
        mi = _INST.match(stmt)
        if not mi:
            raise NetlistError(f"cannot parse statement: {stmt!r}")
        cell_name, inst, body = mi.groups()
        if _SEQUENTIAL.match(cell_name):
            raise NetlistError(f"sequential cell {cell_name!r} ({inst}) is not supported")
        if cell_name not in lib:
            raise NetlistError(f"instance {inst}: unknown cell {cell_name!r}")
        if inst in seen_inst:
            raise NetlistError(f"duplicate instance name {inst!r}")
        seen_inst.add(inst)
        cell = lib[cell_name]
        conns: dict[str, str] = {}
        for pin, net in _CONN.findall(body):
            if pin not in cell.pins:
                raise NetlistError(f"instance {inst}: cell {cell_name} has no pin {pin!r}")
            if pin in conns:
                raise NetlistError(f"instance {inst}: pin {pin} connected twice")
            conns[pin] = net
        for pin in cell.pins:
            if not conns.get(pin):
                raise NetlistError(f"instance {inst}: pin {pin} is dangling")
        gates.append(GateInst(inst, lib.index[cell_name], conns))

    for net in pis + pos:
        if not net:
            raise NetlistError("empty port name")

    driven: dict[str, str] = {n: "<input>" for n in pis}
    driven.update({c: "<constant>" for c in CONSTANTS})
    for g in gates:
        cell = lib[g.cell]
        for pin in cell.input_pins:
            net = g.connections[pin]
            if net not in declared and net not in CONSTANTS:
                raise NetlistError(f"instance {g.instance_name}: pin {pin} is dangling (undeclared net {net!r})")
        out = g.connections[cell.output_pin]
        if out not in declared:
            raise NetlistError(f"instance {g.instance_name}: output net {out!r} is undeclared")
        if out in driven:
            raise NetlistError(f"net {out!r} is multiply driven ({driven[out]}, {g.instance_name})")
        driven[out] = g.instance_name
    for g in gates:
        cell = lib[g.cell]
        for pin in cell.input_pins:
            if g.connections[pin] not in driven:
                raise NetlistError(
                    f"instance {g.instance_name}: pin {pin} is dangling (net {g.connections[pin]!r} has no driver)"
                )
    for net in pos:
        if net not in driven:
            raise NetlistError(f"primary output {net!r} has no driver")

    nl = Netlist(name, lib, gates, nets, pis, pos, list(class_names or []))
    nl.topological_order()
    assign_labels(nl, labels=labels, prefixes=prefixes)
    return nl


def assign_labels(
    nl: Netlist,
    labels: Mapping[str, str] | None = None,
    prefixes: Mapping[str, str] | None = None,
):
    """Fill ``gate.label`` from a sidecar mapping or from instance-name prefixes."""
    if labels is None and prefixes is None:
        return
    class_index = {c: i for i, c in enumerate(nl.class_names)}
    fixed = bool(class_index)

    def lookup(cls: str) -> int:
        if cls not in class_index:
            if fixed:
                raise NetlistError(f"class {cls!r} missing from class map {nl.class_names}")
            class_index[cls] = len(nl.class_names)
            nl.class_names.append(cls)
        return class_index[cls]

    for g in nl.gates:
        cls = None
        if labels is not None:
            cls = labels.get(g.instance_name)
        elif prefixes is not None:
            cls = prefixes.get(g.instance_name.split("_", 1)[0])
        g.label = None if cls is None else lookup(cls)


def load_labels(text: str) -> dict[str, str]:
    data = json.loads(text)
    if not isinstance(data, dict):
        raise NetlistError("label sidecar must be a JSON object")
    return {str(k): str(v) for k, v in data.items()}


def write_netlist(nl: Netlist) -> str:
    """Serialize back to the structural dialect accepted by :func:`parse_netlist`."""
    port = set(nl.primary_inputs) | set(nl.primary_outputs)
    wires = [n for n in nl.nets if n not in port]
    lines = [f"module {nl.name};"]
    if nl.primary_inputs:
        lines.append(f"input {', '.join(nl.primary_inputs)};")
    if nl.primary_outputs:
        lines.append(f"output {', '.join(nl.primary_outputs)};")
    if wires:
        lines.append(f"wire {', '.join(wires)};")
    for g in nl.gates:
        cell = nl.cell_of(g)
        conns = ", ".join(f".{p}({g.connections[p]})" for p in cell.pins)
        lines.append(f"{cell.name} {g.instance_name} ({conns});")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def simulate(nl: Netlist, inputs: Mapping[str, int | np.ndarray]) -> dict:
    """Evaluate primary outputs for one assignment or a vector of assignments.

    Values are 0/1 ints or integer arrays of 0/1 (evaluated element-wise).
    """
    missing = [n for n in nl.primary_inputs if n not in inputs]
    if missing:
        raise NetlistError(f"no value for primary inputs {missing[:5]}")
    for g in nl.gates:
        if nl.cell_of(g).name not in CELL_FUNCTIONS:
            raise NetlistError(f"cell {nl.cell_of(g).name!r} has no boolean semantics")
    values: dict = dict(CONSTANTS)
    for n in nl.primary_inputs:
        v = inputs[n]
        values[n] = np.asarray(v, dtype=np.uint8) if isinstance(v, np.ndarray) else int(v)
    for i in nl.topological_order():
        g = nl.gates[i]
        cell = nl.cell_of(g)
        args = [values[g.connections[p]] for p in cell.input_pins]
        values[g.connections[cell.output_pin]] = CELL_FUNCTIONS[cell.name](*args)
    return {n: values[n] for n in nl.primary_outputs}
