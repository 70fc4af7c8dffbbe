"""Synthetic gate-level circuits and dataset assembly.

Adders come in the exact ripple-carry form and in five approximate families:

* LTA  - the k output LSBs are tied to 0
* LCA  - the k output LSBs copy operand ``a``
* LOA  - the k output LSBs are ``a | b``
* ETA-I - the k output LSBs are ``a ^ b``; a generate ``a_j & b_j`` forces
  every lower output bit to 1 through an OR chain
* ACA  - the m LSBs are exact; every higher sum bit comes from its own m-bit
  window adder over operand bits ``[i-m+1, i]``

The LPA families feed no carry from the approximate part into the exact
upper ``w - k`` bits. Multipliers, subtractors, comparators and muxes provide
the other node classes for training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import CircuitGraph, Standardizer, build_graph
from .netlist import CellLibrary, Netlist, default_library, parse_netlist
from .sampling import SamplingConfig, identify_leaf_nodes, sample_with_report
from .seeding import derive_seed

CLASS_NAMES = ["adder", "multiplier", "subtractor", "comparator", "mux"]
PREFIXES = {"add": "adder", "mul": "multiplier", "sub": "subtractor", "comp": "comparator", "mux": "mux"}
FAMILIES = ("exact", "LTA", "LCA", "LOA", "ETA-I", "ACA")
ADDER_STYLES = ("xor", "nand", "maj")


class _Builder:
    """Accumulates gate instances and emits validated netlist text."""

    def __init__(self, name: str, prefix: str, lib: CellLibrary):
        self.name = name
        self.prefix = prefix
        self.lib = lib
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.wires: list[str] = []
        self.lines: list[str] = []
        self._n = 0

    def input_bus(self, base: str, width: int) -> list[str]:
        nets = [f"{base}{i}" for i in range(width)]
        self.inputs += nets
        return nets

    def gate(self, cell: str, *ins: str, out: str | None = None) -> str:
        cdef = self.lib[cell]
        if len(ins) != len(cdef.input_pins):
            raise ValueError(f"{cell} takes {len(cdef.input_pins)} inputs")
        self._n += 1
        inst = f"{self.prefix}_U{self._n}"
        if out is None:
            out = f"n{self._n}"
            self.wires.append(out)
        else:
            self.outputs.append(out)
        conns = [f".{p}({n})" for p, n in zip(cdef.input_pins, ins)]
        conns.append(f".{cdef.output_pin}({out})")
        self.lines.append(f"{cell} {inst} ({', '.join(conns)});")
        return out

    def text(self) -> str:
        out = [f"module {self.name};", f"input {', '.join(self.inputs)};",
               f"output {', '.join(self.outputs)};"]
        if self.wires:
            out.append(f"wire {', '.join(self.wires)};")
        out += self.lines
        out.append("endmodule")
        return "\n".join(out) + "\n"

    def netlist(self) -> Netlist:
        return parse_netlist(self.text(), self.lib, class_names=list(CLASS_NAMES), prefixes=PREFIXES)


def _full_add(bld: _Builder, a, b, c, style, sum_out=None, carry_out=None,
              want_sum=True, want_carry=True):
    """One bit of a ripple adder; ``c=None`` gives a half adder."""
    s = co = None
    if c is None:
        if want_sum:
            s = bld.gate("XOR2", a, b, out=sum_out)
        if want_carry:
            co = bld.gate("AND2", a, b, out=carry_out)
        return s, co
    if style == "maj":
        if want_sum:
            s = bld.gate("XOR2", bld.gate("XOR2", a, b), c, out=sum_out)
        if want_carry:
            co = bld.gate("MAJ3", a, b, c, out=carry_out)
        return s, co
    p = bld.gate("XOR2", a, b)
    if want_sum:
        s = bld.gate("XOR2", p, c, out=sum_out)
    if want_carry:
        if style == "nand":
            co = bld.gate("NAND2", bld.gate("NAND2", a, b), bld.gate("NAND2", p, c), out=carry_out)
        else:
            co = bld.gate("AO21", p, c, bld.gate("AND2", a, b), out=carry_out)
    return s, co


def _ripple(bld, a_bits, b_bits, style, sum_outs=None, cin=None, cout=None,
            want_cout=True, want_sums=None):
    """Ripple-carry adder over the given bit lists. Returns (sum nets, carry-out net)."""
    w = len(a_bits)
    want_sums = [True] * w if want_sums is None else want_sums
    sums = []
    c = cin
    for i in range(w):
        last = i == w - 1
        out = None if sum_outs is None else sum_outs[i]
        s, c = _full_add(bld, a_bits[i], b_bits[i], c, style, out,
                         cout if last else None, want_sums[i], not last or want_cout)
        sums.append(s)
    return sums, c


@dataclass(frozen=True)
class FixtureSpec:
    family: str
    width: int
    param: int = 0  # k for LPA families, m for ACA
    style: str = "xor"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if self.style not in ADDER_STYLES:
            raise ValueError(f"unknown adder style {self.style!r}")
        if self.family == "ACA":
            if not 1 <= self.param <= self.width:
                raise ValueError("ACA needs 1 <= m <= w")
        elif self.family != "exact" and not 0 <= self.param < self.width:
            raise ValueError(f"{self.family} needs 0 <= k < w")

    @property
    def name(self) -> str:
        fam = self.family.lower().replace("-", "")
        tag = f"{fam}_w{self.width}"
        if self.family == "ACA":
            tag += f"_m{self.param}"
        elif self.family != "exact":
            tag += f"_k{self.param}"
        if self.style != "xor":
            tag += f"_{self.style}"
        return tag


def gen_fixture(spec: FixtureSpec, lib: CellLibrary | None = None) -> Netlist:
    """Gate-level adder netlist for ``spec`` (inputs a*, b*; outputs s*, cout)."""
    lib = lib or default_library()
    w, k, fam = spec.width, spec.param, spec.family
    bld = _Builder(spec.name, "add", lib)
    a = bld.input_bus("a", w)
    b = bld.input_bus("b", w)
    s = [f"s{i}" for i in range(w)]

    if fam == "ACA":
        m = k
        _ripple(bld, a[:m], b[:m], spec.style, s[:m], cout="cout", want_cout=(m == w))
        for i in range(m, w):
            lo = i - m + 1
            _ripple(bld, a[lo:i + 1], b[lo:i + 1], spec.style, [None] * (m - 1) + [s[i]],
                    cout="cout", want_cout=(i == w - 1), want_sums=[False] * (m - 1) + [True])
        return bld.netlist()

    # exact upper part on bits k..w-1 (k = 0 gives the exact adder)
    k = 0 if fam == "exact" else k
    _ripple(bld, a[k:], b[k:], spec.style, s[k:], cout="cout")
    for i in range(k):
        if fam == "LTA":
            bld.gate("BUF", "1'b0", out=s[i])
        elif fam == "LCA":
            bld.gate("BUF", a[i], out=s[i])
        elif fam == "LOA":
            bld.gate("OR2", a[i], b[i], out=s[i])
    if fam == "ETA-I" and k:
        gen = {j: bld.gate("AND2", a[j], b[j]) for j in range(1, k)}
        force = None  # OR of generates above position i
        for i in range(k - 1, -1, -1):
            if force is None:
                bld.gate("XOR2", a[i], b[i], out=s[i])
            else:
                bld.gate("OR2", bld.gate("XOR2", a[i], b[i]), force, out=s[i])
            if i >= 1:
                force = gen[i] if force is None else bld.gate("OR2", gen[i], force)
    return bld.netlist()


def adder_reference(family: str, w: int, k: int, a, b):
    """Integer model of each adder family; returns the (w+1)-bit result."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if family == "exact":
        return a + b
    if family == "ACA":
        m = k
        lo_mask = (1 << m) - 1
        out = (a & lo_mask) + (b & lo_mask)
        if m == w:
            return out
        out &= lo_mask
        for i in range(m, w):
            lo = i - m + 1
            win = ((a >> lo) & lo_mask) + ((b >> lo) & lo_mask)
            out |= ((win >> (m - 1)) & 1) << i
            if i == w - 1:
                out |= ((win >> m) & 1) << w
        return out
    mask = (1 << k) - 1
    upper = ((a >> k) + (b >> k)) << k
    if family == "LTA":
        low = np.zeros_like(a)
    elif family == "LCA":
        low = a & mask
    elif family == "LOA":
        low = (a | b) & mask
    elif family == "ETA-I":
        low = (a ^ b) & mask
        for i in range(k):
            force = np.zeros_like(a, dtype=bool)
            for j in range(i + 1, k):
                force |= ((a >> j) & 1 & (b >> j)).astype(bool)
            low |= force.astype(np.int64) << i
    else:
        raise ValueError(f"unknown family {family!r}")
    return upper | low


def _add_row(bld, xs, ys, style, outs, cout=None):
    """Ripple-add two bit lists where entries of ``xs`` may be None (absent)."""
    c = None
    sums = []
    for i, (x, y) in enumerate(zip(xs, ys)):
        co_name = cout if i == len(ys) - 1 else None
        if x is None and c is None:
            s = bld.gate("BUF", y, out=outs[i]) if outs[i] else y
        elif x is None:
            s, c = _full_add(bld, y, c, None, style, outs[i], co_name)
        else:
            s, c = _full_add(bld, x, y, c, style, outs[i], co_name)
        sums.append(s)
    return sums, c


def gen_multiplier(width: int, style: str = "xor", lib: CellLibrary | None = None) -> Netlist:
    """Unsigned array multiplier: AND partial products added row by row."""
    lib = lib or default_library()
    w = width
    bld = _Builder(f"mul_w{w}_{style}", "mul", lib)
    a = bld.input_bus("a", w)
    b = bld.input_bus("b", w)
    if w < 2:
        raise ValueError("multiplier width must be >= 2")
    row0 = [bld.gate("AND2", a[i], b[0], out="p0" if i == 0 else None) for i in range(w)]
    acc = row0[1:] + [None]
    for j in range(1, w):
        pp = [bld.gate("AND2", a[i], b[j]) for i in range(w)]
        last = j == w - 1
        outs = [f"p{j + i}" if (i == 0 or last) else None for i in range(w)]
        sums, c = _add_row(bld, acc, pp, style, outs, cout=f"p{2 * w - 1}" if last else None)
        acc = sums[1:] + [c]
    return bld.netlist()


def gen_subtractor(width: int, style: str = "xor", lib: CellLibrary | None = None) -> Netlist:
    """``a - b`` as ``a + ~b + 1``; outputs d*, and the carry ``nb`` (1 = no borrow)."""
    lib = lib or default_library()
    w = width
    bld = _Builder(f"sub_w{w}_{style}", "sub", lib)
    a = bld.input_bus("a", w)
    b = bld.input_bus("b", w)
    nb = [bld.gate("INV", x) for x in b]
    bld.gate("XNOR2", a[0], nb[0], out="d0")
    c = bld.gate("OR2", a[0], nb[0], out="nb" if w == 1 else None)
    for i in range(1, w):
        _, c = _full_add(bld, a[i], nb[i], c, style, f"d{i}", "nb" if i == w - 1 else None)
    return bld.netlist()


def gen_comparator(width: int, lib: CellLibrary | None = None) -> Netlist:
    """Magnitude comparator with outputs gt, lt, eq."""
    lib = lib or default_library()
    w = width
    bld = _Builder(f"comp_w{w}", "comp", lib)
    a = bld.input_bus("a", w)
    b = bld.input_bus("b", w)
    na = [bld.gate("INV", x) for x in a]
    nb = [bld.gate("INV", x) for x in b]
    eq = [bld.gate("XNOR2", a[i], b[i]) for i in range(w)]
    gt = lt = None
    for i in range(w):
        g_i = bld.gate("AND2", a[i], nb[i], out="gt" if (w == 1) else None)
        l_i = bld.gate("AND2", na[i], b[i], out="lt" if (w == 1) else None)
        if i == 0:
            gt, lt = g_i, l_i
        else:
            last = i == w - 1
            gt = bld.gate("AO21", eq[i], gt, g_i, out="gt" if last else None)
            lt = bld.gate("AO21", eq[i], lt, l_i, out="lt" if last else None)
    terms = eq
    while len(terms) > 4:
        terms = [bld.gate(f"AND{len(terms[i:i + 4])}", *terms[i:i + 4]) if len(terms[i:i + 4]) > 1
                 else terms[i] for i in range(0, len(terms), 4)]
    if len(terms) == 1:
        bld.gate("BUF", terms[0], out="eq")
    else:
        bld.gate(f"AND{len(terms)}", *terms, out="eq")
    return bld.netlist()


def gen_mux(width: int, style: str = "tree", lib: CellLibrary | None = None) -> Netlist:
    """``width``-bit 4:1 multiplexer with data buses d0..d3 and selects s0, s1."""
    lib = lib or default_library()
    w = width
    bld = _Builder(f"mux_w{w}_{style}", "mux", lib)
    d = [bld.input_bus(f"d{j}_", w) for j in range(4)]
    s0, s1 = bld.input_bus("s", 2)
    if w >= 4:  # fan-out buffering of the select lines
        s0, s1 = bld.gate("BUF", s0), bld.gate("BUF", s1)
    if style == "tree":
        for i in range(w):
            lo = bld.gate("MUX2", d[0][i], d[1][i], s0)
            hi = bld.gate("MUX2", d[2][i], d[3][i], s0)
            bld.gate("MUX2", lo, hi, s1, out=f"y{i}")
    else:
        n0, n1 = bld.gate("INV", s0), bld.gate("INV", s1)
        sel = [bld.gate("AND2", n0, n1), bld.gate("AND2", s0, n1),
               bld.gate("AND2", n0, s1), bld.gate("AND2", s0, s1)]
        for i in range(w):
            x = bld.gate("AOI22", d[0][i], sel[0], d[1][i], sel[1])
            y = bld.gate("AOI22", d[2][i], sel[2], d[3][i], sel[3])
            bld.gate("NAND2", x, y, out=f"y{i}")
    return bld.netlist()


def default_levels(graph: CircuitGraph, mode: str = "leaf", max_level: int = 9) -> list[int]:
    """Levels 1..9, capped so that at least one candidate node survives."""
    pool = len(identify_leaf_nodes(graph)) if mode == "leaf" else graph.n
    return list(range(1, min(max_level, pool - 1) + 1))


def augment(graphs: list[CircuitGraph], mode: str = "leaf", levels: list[int] | None = None,
            seed: int = 0, recompute_features: bool = False) -> list[CircuitGraph]:
    """One sampled variant per source graph and removal level.

    ``levels=None`` uses :func:`default_levels` per graph; explicit levels
    that exceed the candidate count raise ``ValueError``.
    """
    out = []
    for g in graphs:
        if (g.labels < 0).any():
            raise ValueError(f"graph {g.name} has unlabeled nodes")
        for n in (default_levels(g, mode) if levels is None else levels):
            cfg = SamplingConfig(mode, n, derive_seed(seed, "augment", g.name, mode, n),
                                 recompute_features)
            sampled, _ = sample_with_report(g, cfg)
            sampled.name = f"{g.name}_{mode}{n}"
            out.append(sampled)
    return out


SPLITS = ("train", "val", "test")


def make_splits(n_graphs: int, fractions=(0.65, 0.20, 0.15), seed: int = 0,
                groups: list | None = None) -> list[str]:
    """Graph-level train/val/test assignment.

    Validation and test counts are the rounded fractions; train takes the
    remainder. With ``groups`` whole groups are assigned together (counts
    then refer to groups).
    """
    f = np.asarray(fractions, dtype=float)
    if f.shape != (3,) or (f < 0).any() or f.sum() <= 0:
        raise ValueError("fractions must be three non-negative numbers")
    f = f / f.sum()
    keys = list(range(n_graphs)) if groups is None else sorted(set(groups), key=str)
    n = len(keys)
    n_val = int(np.floor(f[1] * n + 0.5))
    n_test = int(np.floor(f[2] * n + 0.5))
    n_train = n - n_val - n_test
    for name, want, got in zip(SPLITS, f, (n_train, n_val, n_test)):
        if want > 0 and got <= 0:
            raise ValueError(f"split {name!r} would be empty ({n} items, fractions {f.round(3).tolist()})")
    rng = np.random.default_rng(derive_seed(seed, "splits"))
    order = rng.permutation(n)
    assign = {}
    for rank, i in enumerate(order):
        assign[keys[i]] = "val" if rank < n_val else "test" if rank < n_val + n_test else "train"
    if groups is None:
        return [assign[i] for i in range(n_graphs)]
    return [assign[gkey] for gkey in groups]


@dataclass
class Dataset:
    graphs: list[CircuitGraph]
    splits: list[str]
    class_names: list[str] = field(default_factory=lambda: list(CLASS_NAMES))
    stats: Standardizer | None = None

    def __post_init__(self):
        if len(self.graphs) != len(self.splits):
            raise ValueError("one split label per graph")
        for g in self.graphs:
            if (g.labels < 0).any():
                raise ValueError(f"graph {g.name} is not fully labeled")

    def split(self, name: str) -> list[CircuitGraph]:
        return [g for g, s in zip(self.graphs, self.splits) if s == name]

    def fit_stats(self) -> Standardizer:
        train = self.split("train")
        if not train:
            raise ValueError("no training graphs")
        self.stats = Standardizer.fit([g.features for g in train])
        return self.stats


def training_circuits(lib: CellLibrary | None = None, adder_widths=(8, 9, 12, 16)) -> list[Netlist]:
    """Exact circuits of all five classes used as the base training corpus."""
    lib = lib or default_library()
    nets = []
    for w in adder_widths:
        for style in ADDER_STYLES:
            nets.append(gen_fixture(FixtureSpec("exact", w, 0, style), lib))
    for w in (3, 4, 5):
        for style in ("xor", "nand"):
            nets.append(gen_multiplier(w, style, lib))
    for w in (4, 8, 12):
        nets.append(gen_subtractor(w, ADDER_STYLES[w % 3], lib))
        nets.append(gen_comparator(w, lib))
        nets.append(gen_mux(w // 2, "tree" if w % 8 else "aoi", lib))
    return nets


def build_manifest_entry(spec: FixtureSpec, nl: Netlist, exact_count: int) -> dict:
    return {
        "name": spec.name,
        "family": spec.family,
        "w": spec.width,
        ("m" if spec.family == "ACA" else "k"): spec.param,
        "node_count": len(nl.gates),
        "normalized_area": len(nl.gates) / exact_count,
    }


def graph_of(nl: Netlist) -> CircuitGraph:
    return build_graph(nl)
