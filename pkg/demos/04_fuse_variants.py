"""
Fusing procedural variants into one multi-path DAG
==================================================

The same task observed in different sources yields single-path variants.
Fusion aligns semantically equivalent steps (optimal bipartite matching on
label embeddings), unions the edges so branch points appear where the
variants diverge, and pools the Bayesian statistics exactly.
"""

from memstrata import (
    Config,
    Description,
    MemoryStore,
    ObservationRecord,
    align_nodes,
    auto_fuse,
    enumerate_paths,
    pool_beta,
    transition_prob,
)

store = MemoryStore(Config(dim=512, action_verbs=("chop", "mix", "blend", "serve")))

# Mining also surfaces the shared fragment [chop, serve] at full support.
# A verifier is the stage that rejects such incomplete patterns; this
# deterministic stand-in insists on complete three-step routines.
store.set_verifier(lambda pattern, related: 0.0 if len(pattern.steps) < 3 else pattern.support)

# variant A (three sources): chop -> mix -> serve
# variant B (two sources):   chop -> blend -> serve
rid = 0
for video, middle in [("a1", "mix"), ("a2", "mix"), ("a3", "mix"),
                      ("b1", "blend"), ("b2", "blend")]:
    for t, text in enumerate([
            "chop the fruit", f"{middle} the fruit", "serve the salad"]):
        rid += 1
        store.ingest(ObservationRecord(rid, video, float(t), [Description(text)], [], []))

store.distill()
print("distilled variants:")
for node in store.logic.values():
    print(f"  #{node.id}: {node.c!r}")

# ---------------------------------------------------------------
# 1. Alignment: identical labels match at similarity 1.0;
#    mix_fruit vs blend_fruit share only 'fruit' (0.5 < 0.8)
# ---------------------------------------------------------------
a, b = store.logic[1], store.logic[2]
alignment = align_nodes(a.dag, b.dag, store.embedder, store.config.tau_align)
for l1, l2, sim in alignment.pairs:
    print(f"aligned {l1} <-> {l2}  sim={sim:.2f}")
print("unmatched:", alignment.unmatched1, alignment.unmatched2)

# ---------------------------------------------------------------
# 2. Fusion replaces the pair with one branching procedure
# ---------------------------------------------------------------
reports = auto_fuse(store)
fused = store.logic[reports[0].new_id]
print(f"\nfused into #{fused.id}; START->GOAL paths:")
for path in enumerate_paths(fused.dag):
    steps = path[1:-1]
    prob = 1.0
    for src, dst in zip(path, path[1:]):
        prob *= transition_prob(fused.dag, src, dst)
    print(f"  {' -> '.join(steps)}   P={prob:.3f}")

# ---------------------------------------------------------------
# 3. Statistic pooling is exact observation pooling
# ---------------------------------------------------------------
# Two posteriors over the shared (1,1) prior combine by alpha1+alpha2-1:
# 8 successes/2 failures merged with 5/5 equals the 13/7 single batch.
print("\npool_beta((9,3), (6,6)) =", pool_beta((9, 3), (6, 6)))
print("single-batch posterior   =", (1 + 13, 1 + 7))
print("\ninvariant sweep:", store.check() or "clean")
