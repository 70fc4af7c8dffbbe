"""Command-line front end: ``appgnn {convert,sample,gen,train,eval,report}``."""

from __future__ import annotations

import argparse
import csv
import fnmatch
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .fixtures import (CLASS_NAMES, PREFIXES, Dataset, FixtureSpec, augment,
                       build_manifest_entry, gen_fixture, make_splits)
from .graph import CircuitGraph, build_graph
from .netlist import NetlistError, default_library, load_labels, parse_cell_library, parse_netlist, write_netlist
from .sampling import SamplingConfig, sample_with_report
from .seeding import derive_seed
from .train import TrainConfig, evaluate, load_checkpoint, save_checkpoint, train

log = logging.getLogger("appgnn")


class CliError(Exception):
    pass


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _library(args):
    if args.lib:
        return parse_cell_library(Path(args.lib).read_text())
    return default_library()


def _classes(args) -> list[str] | None:
    if not getattr(args, "classes", None):
        return None
    p = Path(args.classes)
    if p.exists():
        data = json.loads(p.read_text())
        if isinstance(data, dict):  # name -> id
            return [k for k, _ in sorted(data.items(), key=lambda kv: kv[1])]
        return list(data)
    return [c.strip() for c in args.classes.split(",") if c.strip()]


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _load_graph(path) -> CircuitGraph:
    try:
        return CircuitGraph.from_json(Path(path).read_text())
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise CliError(f"{path}: not a graph JSON file ({exc!r})") from None


def cmd_convert(args) -> int:
    lib = _library(args)
    classes = _classes(args) or list(CLASS_NAMES)
    out = Path(args.out)
    manifest = []
    for path in map(Path, args.netlists):
        labels = None
        if args.labels:
            lp = Path(args.labels)
            if lp.is_dir():
                lp = lp / f"{path.stem}.labels.json"
            labels = load_labels(lp.read_text())
        try:
            nl = parse_netlist(path.read_text(), lib, labels=labels, class_names=list(classes),
                               prefixes=None if labels is not None else PREFIXES)
        except NetlistError as exc:
            raise CliError(f"{path}: {exc}") from None
        g = build_graph(nl)
        dest = out / f"{path.stem}.graph.json"
        _write(dest, g.to_json())
        manifest.append({"netlist": str(path), "graph": dest.name, "nodes": g.n,
                         "edges": len(g.pins), "labeled": bool((g.labels >= 0).all())})
    _write(out / "manifest.json", json.dumps(manifest, indent=1))
    return 0


def cmd_sample(args) -> int:
    if args.n < 1:
        raise CliError("--n must be >= 1")
    g = _load_graph(args.graph)
    cfg = SamplingConfig(args.mode, args.n, derive_seed(args.seed, "sample", g.name),
                         recompute_features=args.recompute)
    try:
        out, report = sample_with_report(g, cfg)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    _write(Path(args.out), out.to_json())
    rpath = Path(args.report) if args.report else Path(args.out).with_suffix(".report.json")
    _write(rpath, json.dumps(report.to_dict(), indent=1))
    return 0


def cmd_gen(args) -> int:
    lib = _library(args)
    params = _int_list(args.k) if args.k else [0]
    out = Path(args.out)
    exact = gen_fixture(FixtureSpec("exact", args.width, 0, args.style), lib)
    manifest = []
    for k in params:
        try:
            spec = FixtureSpec(args.family, args.width, k, args.style)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        nl = gen_fixture(spec, lib)
        _write(out / f"{spec.name}.v", write_netlist(nl))
        _write(out / f"{spec.name}.labels.json", json.dumps(nl.labels_by_name(), indent=0))
        manifest.append(build_manifest_entry(spec, nl, len(exact.gates)))
    _write(out / "manifest.json", json.dumps(manifest, indent=1))
    return 0


def _train_config(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, roots=args.roots, depth=args.depth, lr=args.lr,
                       dropout=args.dropout, seed=args.seed, single_thread=args.single_thread,
                       hidden=args.hidden, heads=args.heads)


def cmd_train(args) -> int:
    graphs = [_load_graph(p) for p in args.graphs]
    if not graphs:
        raise CliError("no training graphs")
    classes = _classes(args) or graphs[0].class_names or list(CLASS_NAMES)
    fractions = [float(x) for x in args.splits.split(",")]
    groups = [g.name for g in graphs]
    if args.augment != "none":
        picked = [g for g in graphs if fnmatch.fnmatch(g.name, args.augment_match)]
        levels = _int_list(args.levels) if args.levels else None
        extra = augment(picked, args.augment, levels, seed=derive_seed(args.seed, "augment"))
        graphs += extra
        groups += [e.name.rsplit("_", 1)[0] for e in extra]
    if args.group_by_source:
        splits = make_splits(len(graphs), fractions, args.seed, groups=groups)
    else:
        splits = make_splits(len(graphs), fractions, args.seed)
    ds = Dataset(graphs, splits, classes)
    result = train(ds, _train_config(args))
    out = Path(args.out)
    _write(out / "checkpoint.json", save_checkpoint(result))
    _write(out / "history.csv", result.history_csv())
    _write(out / "splits.json", json.dumps({g.name: s for g, s in zip(graphs, splits)}, indent=1))
    return 0


def _areas(manifest_paths) -> dict:
    areas = {}
    for p in manifest_paths or []:
        for entry in json.loads(Path(p).read_text()):
            if "normalized_area" in entry:
                areas[entry["name"]] = entry["normalized_area"]
    return areas


def cmd_eval(args) -> int:
    ck = Path(args.checkpoint)
    if not ck.is_file():
        raise CliError(f"checkpoint not found: {ck}")
    model, stats, classes, _ = load_checkpoint(ck.read_text())
    graphs = [_load_graph(p) for p in args.graphs]
    try:
        report = evaluate(model, stats, graphs, classes, _areas(args.manifest), args.single_thread)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    out = Path(args.out)
    _write(out / "report.json", json.dumps(report.to_dict(), indent=1))
    _write(out / "area_accuracy.csv", report.area_csv())
    return 0


def family_of(name: str) -> str:
    return name.split("_", 1)[0]


def cmd_report(args) -> int:
    runs = [json.loads(Path(p).read_text()) for p in args.reports]
    per_family: dict[str, list[list[float]]] = {}
    rows = []
    for run_id, run in enumerate(runs):
        fam_accs: dict[str, list[float]] = {}
        for g in run["graphs"]:
            fam_accs.setdefault(family_of(g["name"]), []).append(g["accuracy"])
            rows.append([run_id, g["name"], g.get("normalized_area"), g["accuracy"]])
        for fam, accs in fam_accs.items():
            per_family.setdefault(fam, []).append(float(np.mean(accs)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["family", "runs", "mean_accuracy", "std_accuracy"])
    for fam in sorted(per_family):
        vals = np.array(per_family[fam])
        w.writerow([fam, len(vals), repr(float(vals.mean())), repr(float(vals.std()))])
    out = Path(args.out)
    _write(out / "family_accuracy.csv", buf.getvalue())
    lines = [f"{'family':<10} {'runs':>4}  accuracy"]
    for fam in sorted(per_family):
        vals = np.array(per_family[fam])
        lines.append(f"{fam:<10} {len(vals):>4}  {100 * vals.mean():6.2f} ± {100 * vals.std():5.2f}")
    table = "\n".join(lines) + "\n"
    _write(out / "family_accuracy.txt", table)
    print(table, end="")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "circuit", "normalized_area", "accuracy"])
    for r in rows:
        w.writerow([r[0], r[1], "" if r[2] is None else repr(r[2]), repr(r[3])])
    _write(out / "area_accuracy.csv", buf.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    env_seed = int(os.environ.get("APPGNN_SEED", "0"))
    p = argparse.ArgumentParser(prog="appgnn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--lib", help="cell library file (default: built-in 24 cells)")
        if seed:
            sp.add_argument("--seed", type=int, default=env_seed)

    c = sub.add_parser("convert", help="netlists -> graph JSON")
    common(c, seed=False)
    c.add_argument("netlists", nargs="+")
    c.add_argument("--labels", help="label sidecar JSON, or a directory of <stem>.labels.json")
    c.add_argument("--classes", help="comma list or JSON file of class names")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_convert)

    s = sub.add_parser("sample", help="node sampling on one graph")
    common(s)
    s.add_argument("graph")
    s.add_argument("--mode", choices=["random", "leaf"], default="leaf")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--recompute", action="store_true", help="recompute survivor features")
    s.add_argument("--out", required=True)
    s.add_argument("--report")
    s.set_defaults(func=cmd_sample)

    g = sub.add_parser("gen", help="generate adder fixtures")
    common(g, seed=False)
    g.add_argument("--family", choices=["exact", "LTA", "LCA", "LOA", "ETA-I", "ACA"], required=True)
    g.add_argument("--width", type=int, required=True)
    g.add_argument("--k", "--m", dest="k", help="approximation parameters, e.g. 2,4,6 or 1-9")
    g.add_argument("--style", choices=["xor", "nand", "maj"], default="xor")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a GAT on graph JSON files")
    common(t)
    t.add_argument("graphs", nargs="+")
    t.add_argument("--classes")
    t.add_argument("--out", required=True)
    t.add_argument("--augment", choices=["none", "leaf", "random"], default="none")
    t.add_argument("--augment-match", default="*", help="glob on graph names to augment")
    t.add_argument("--levels", help="removal levels, e.g. 1-9 (default per graph)")
    t.add_argument("--splits", default="0.65,0.20,0.15")
    t.add_argument("--group-by-source", action="store_true")
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--roots", type=int, default=3000)
    t.add_argument("--depth", type=int, default=2)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--dropout", type=float, default=0.1)
    t.add_argument("--hidden", type=int, default=256)
    t.add_argument("--heads", type=int, default=8)
    t.add_argument("--single-thread", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on labeled graphs")
    e.add_argument("graphs", nargs="+")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--manifest", action="append", help="gen manifest(s) with normalized_area")
    e.add_argument("--single-thread", action="store_true")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("report", help="aggregate eval reports")
    r.add_argument("reports", nargs="+")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, NetlistError, ValueError, OSError) as exc:
        print(f"appgnn {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
