"""Train on exact circuits, with and without sampled variants, and test on approximate adders.

Takes about half a minute. Both models see the same 27 exact circuits
(adders, multipliers, subtractors, comparators, muxes); the second one
also trains on leaf-sampled copies of the exact adders.
"""
import sys

from appgnn import Dataset, FixtureSpec, TrainConfig, augment, build_graph, evaluate, gen_fixture, make_splits, train
from appgnn.fixtures import training_circuits

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 100

base = [build_graph(nl) for nl in training_circuits()]
names = [g.name for g in base]
splits = make_splits(len(base), seed=seed)
adders = [g for g in base if g.name.startswith("exact")]
aug = augment(adders, "leaf", seed=seed)
aug_splits = [splits[names.index(a.name.rsplit("_", 1)[0])] for a in aug]
print(f"{len(base)} exact circuits, {len(aug)} sampled variants")

tests = {fam: [build_graph(gen_fixture(FixtureSpec(fam, w, k))) for w in (8, 12, 16) for k in range(2, w, 2)]
         for fam in ("LTA", "LCA", "LOA", "ETA-I")}

cfg = TrainConfig(epochs=epochs, seed=seed)
models = {"baseline": train(Dataset(base, splits), cfg),
          "appgnn": train(Dataset(base + aug, splits + aug_splits), cfg)}

print(f"\n{'family':8s}" + "".join(f"{k:>10s}" for k in models))
for fam, graphs in tests.items():
    row = [evaluate(r.model, r.stats, graphs).accuracy for r in models.values()]
    print(f"{fam:8s}" + "".join(f"{100 * a:9.1f}%" for a in row))

print("\nbaseline on LTA w=16 as k grows:")
r = models["baseline"]
for k in (2, 4, 6, 8):
    acc = evaluate(r.model, r.stats, [build_graph(gen_fixture(FixtureSpec("LTA", 16, k)))]).accuracy
    print(f"  k={k}: {100 * acc:.1f}%")
