"""
Hybrid retrieval and deterministic symbolic queries
===================================================

Queries are classified (factual / constraint / character), scored across
all three layers with the goal-step blend for logic nodes, re-ranked by
query type, and, where structure is needed, answered by deterministic
functions on the procedural DAG: constraint-filtered path enumeration,
evidence-grounded lookup, character aggregation, expected steps to GOAL.
"""

import numpy as np

from memstrata import (
    Conclusion,
    Config,
    Constraint,
    Description,
    MemoryStore,
    ObservationRecord,
    Percept,
    Predicate,
    aggregate_character_behaviors,
    answer_procedure,
    classify,
    get_procedure_with_evidence,
    goal_reach_probability,
    query_step_sequence,
)

store = MemoryStore(Config(dim=512, action_verbs=("chop", "mix", "blend", "serve")))
# keep only complete routines (see demo 04 for why)
store.set_verifier(lambda pattern, related: 0.0 if len(pattern.steps) < 3 else pattern.support)


def face(seed):
    v = np.zeros(512)
    v[seed] = 1.0
    return v


rid = 0
for video, middle in [("a1", "mix"), ("a2", "mix"), ("b1", "blend"), ("b2", "blend")]:
    for t, text in enumerate([
            "@jack chop the fruit", f"@jack {middle} the fruit in a bowl",
            "@jack serve the salad"]):
        rid += 1
        attrs = {"tool": "bowl"} if t == 1 and middle == "mix" else {}
        store.ingest(ObservationRecord(
            rid, video, float(t), [Description(text, attrs)],
            [Conclusion("character", "@jack is a careful cook")] if t == 2 else [],
            [Percept("face", face(3), "jack")] if t == 0 else []))
rid += 1
store.ingest(ObservationRecord(
    rid, "home", 0.0, [Description("the bowl at home is broken")], [], []))
store.distill()
from memstrata import auto_fuse

auto_fuse(store)
goal = next(iter(store.logic.values())).c

# ---------------------------------------------------------------
# 1. Rule-tier classification
# ---------------------------------------------------------------
for q in ("When did Jack chop the fruit?",
          "How can Jack finish the salad without the bowl?",
          "What kind of person is Jack?"):
    print(f"{classify(q):<10} <- {q!r}")

# ---------------------------------------------------------------
# 2. Factual query: episodic evidence ranks first
# ---------------------------------------------------------------
result = store.retrieve("When did Jack chop the fruit?", k=3)
print("\nfactual top-3:")
for item in result.ranked:
    print(f"  {item.layer}:{item.node_id} init={item.score_init:.3f} final={item.score_final:.3f}")

# ---------------------------------------------------------------
# 3. Constraint query: symbolic path filtering on the fused DAG
# ---------------------------------------------------------------
no_bowl = Constraint([Predicate("tool", "neq", "bowl")])
paths = query_step_sequence(store, goal, no_bowl)
print("\npaths avoiding tool=bowl:")
for p in paths:
    print(f"  {' -> '.join(p.steps)}  P={p.probability:.3f}")
# mix_fruit carries tool=bowl, so only the blend variant survives.

# ---------------------------------------------------------------
# 4. Evidence-grounded lookup and character aggregation
# ---------------------------------------------------------------
pe = get_procedure_with_evidence(store, goal)
print(f"\nprocedure #{pe.logic_id} evidence spans {len(pe.evidence)} episodes, "
      f"first: {pe.evidence[0].d!r}")
jack = store.anchor_by_label("jack")
behaviors = aggregate_character_behaviors(store, jack)
print(f"procedures involving @jack: {[n.id for n in behaviors]}")

# ---------------------------------------------------------------
# 5. Expected steps to completion (absorbing-chain semantics)
# ---------------------------------------------------------------
print(f"\nexpected steps from chop_fruit to GOAL: "
      f"{goal_reach_probability(pe.dag, 'chop_fruit'):.3f}")

# ---------------------------------------------------------------
# 6. One symbolic call vs iterative episodic hopping
# ---------------------------------------------------------------
with_logic = answer_procedure(store, goal, use_logic=True)
baseline = answer_procedure(store, "How should Jack make the fruit salad?",
                            use_logic=False)
print(f"\nlogic layer answered in {with_logic.calls} store call(s); "
      f"episodic-only baseline needed {baseline.calls}")
