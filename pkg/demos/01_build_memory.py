"""
Building a three-layer memory from an observation stream
=========================================================

Observations arrive as records carrying pre-extracted descriptions,
conclusions, and perceptual vectors. Ingest turns them into:

  - entity anchors   (clustered face/voice identities)
  - episodic nodes   (timestamped event descriptions)
  - semantic nodes   (consolidated conclusions with reinforce/weaken weights)
"""

import numpy as np

from memstrata import (
    Conclusion,
    Config,
    Description,
    MemoryStore,
    ObservationRecord,
    Percept,
)

store = MemoryStore(Config(dim=512, action_verbs=("chop", "mix", "serve")))


def face_vector(seed):
    v = np.zeros(512)
    v[seed] = 1.0
    return v


# ---------------------------------------------------------------
# 1. Three kitchen sessions, each showing the same routine
# ---------------------------------------------------------------
rid = 0
for video in ("monday", "tuesday", "friday"):
    for t, (text, attrs) in enumerate([
        ("@jack chop the fruit", {"tool": "knife"}),
        ("@jack mix the fruit in a bowl", {"tool": "bowl"}),
        ("@jack serve the salad", {"tool": "plate"}),
    ]):
        rid += 1
        episodes, semantic_events = store.ingest(ObservationRecord(
            rid, video, float(t),
            [Description(text, attrs)],
            # every session ends with the same impression of Jack
            [Conclusion("character", "@jack is a careful cook")] if t == 2 else [],
            # a face sighting resolves (or creates) the @jack anchor
            [Percept("face", face_vector(3), "jack")] if t == 0 else [],
        ))
        print(f"{video} t={t}: episodes {episodes} semantic {semantic_events}")

# ---------------------------------------------------------------
# 2. What the layers hold now
# ---------------------------------------------------------------
print("\nanchors:")
for anchor in store.anchors.values():
    print(f"  #{anchor.id} {anchor.label!r} assigned {anchor.count} percepts")

print("episodic nodes:", len(store.episodic))

print("semantic layer:")
for node in store.semantic.values():
    # repeated identical conclusions reinforce instead of duplicating
    print(f"  #{node.id} [{node.type}] {node.attrs!r} weight={node.weight}")

# ---------------------------------------------------------------
# 3. A contradicting-enough conclusion weakens what it displaces
# ---------------------------------------------------------------
rid += 1
_, events = store.ingest(ObservationRecord(
    rid, "saturday", 0.0,
    [Description("@jack drop the bowl")],
    [Conclusion("character", "@jack seems clumsy and rushed today somehow")],
    [],
))
print("\nafter a dissimilar conclusion:", events)
for node in store.semantic.values():
    print(f"  #{node.id} [{node.type}] {node.attrs!r} weight={node.weight}")

print("\ninvariant sweep:", store.check() or "clean")
