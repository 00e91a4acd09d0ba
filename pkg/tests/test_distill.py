import itertools
import random

import numpy as np

from memstrata import (
    ActionSequence,
    Config,
    Description,
    MemoryStore,
    ObservationRecord,
    Pattern,
    extract_action,
    extract_action_sequences,
    prefixspan,
    verify_default,
)
from memstrata.dag import GOAL, START
from conftest import fruit_salad_store, random_corpus, simple_chain_store

VERBS = ("chop", "mix", "serve")


# -- brute-force oracle: exhaustive subsequence enumeration -------------------


def brute_force_patterns(sequences, sigma):
    """All length>=2 subsequences with support >= sigma, by enumeration."""
    n = len(sequences)
    found = {}
    for seq in sequences:
        subs = set()
        for length in range(2, len(seq) + 1):
            for idxs in itertools.combinations(range(len(seq)), length):
                subs.add(tuple(seq[i] for i in idxs))
        for sub in subs:
            found[sub] = found.get(sub, 0) + 1
    return {
        sub: count / n for sub, count in found.items() if count / n >= sigma - 1e-9
    }


# -- action extraction --------------------------------------------------------


def test_extract_action_verb_plus_object():
    assert extract_action("Jack chops fruit", VERBS) == "chop_fruit"
    assert extract_action("Jack mixes fruit", VERBS) == "mix_fruit"


def test_extract_action_skips_stopwords():
    assert extract_action("Jack chops the fruit", VERBS) == "chop_fruit"
    assert extract_action("he served up the salad", VERBS) == "serve_salad"


def test_extract_action_verb_alone():
    assert extract_action("Jack serves", VERBS) == "serve"


def test_extract_action_fallback_full_description():
    assert extract_action("the bowl is broken", VERBS) == "the_bowl_is_broken"


def test_extract_action_empty():
    assert extract_action("", VERBS) is None
    assert extract_action("!!!", VERBS) is None


def test_extract_action_sequences_groups_and_orders():
    store = MemoryStore(Config(dim=32, action_verbs=VERBS))
    store.ingest(ObservationRecord(1, "v2", 0.0, [Description("chop fruit")], [], []))
    store.ingest(ObservationRecord(2, "v1", 0.0, [Description("serve salad")], [], []))
    store.ingest(ObservationRecord(3, "v1", 1.0, [Description("mix fruit")], [], []))
    seqs = extract_action_sequences(store)
    assert [(s.video, s.actions) for s in seqs] == [
        ("v1", ["serve_salad", "mix_fruit"]),
        ("v2", ["chop_fruit"]),
    ]


def test_extract_action_sequences_lexicon_example():
    store = MemoryStore(Config(dim=64, action_verbs=VERBS))
    store.ingest(ObservationRecord(
        1, "v1", 0.0,
        [Description("Jack chops fruit"), Description("Jack mixes fruit")], [], []))
    seqs = extract_action_sequences(store)
    assert len(seqs) == 1
    assert seqs[0].actions == ["chop_fruit", "mix_fruit"]


def test_extract_action_sequences_empty_store():
    store = MemoryStore(Config(dim=16))
    assert extract_action_sequences(store) == []


# -- prefixspan ----------------------------------------------------------------


def seqs(*action_lists):
    return [ActionSequence(f"v{i}", list(a)) for i, a in enumerate(action_lists)]


def test_prefixspan_no_shared_order():
    assert prefixspan(seqs(["a", "b"], ["b", "a"]), 1.0) == []


def test_prefixspan_support_two_thirds():
    patterns = prefixspan(seqs(["a", "b", "c"], ["a", "c"], ["a", "b"]), 0.6)
    # brute force: ab in 2/3, ac in 2/3; bc only in 1/3
    assert {(p.steps, round(p.support, 6)) for p in patterns} == {
        (("a", "b"), round(2 / 3, 6)),
        (("a", "c"), round(2 / 3, 6)),
    }


def test_prefixspan_order_sensitivity():
    patterns = prefixspan(seqs(["cut", "blanch"], ["cut", "blanch"]), 1.0)
    assert [p.steps for p in patterns] == [("cut", "blanch")]
    reverse = prefixspan(seqs(["blanch", "cut"], ["blanch", "cut"]), 1.0)
    assert [p.steps for p in reverse] == [("blanch", "cut")]


def test_prefixspan_non_contiguous_subsequence():
    patterns = prefixspan(seqs(["a", "x", "b"], ["a", "b"]), 1.0)
    assert ("a", "b") in {p.steps for p in patterns}


def test_prefixspan_counts_each_sequence_once():
    patterns = prefixspan(seqs(["a", "b", "a", "b"]), 1.0)
    ab = [p for p in patterns if p.steps == ("a", "b")]
    assert ab and ab[0].support == 1.0


def test_prefixspan_output_sorted():
    patterns = prefixspan(seqs(["a", "b", "c"], ["a", "b", "c"], ["a", "c"]), 0.5)
    keys = [(-p.support, p.steps) for p in patterns]
    assert keys == sorted(keys)


def test_prefixspan_supporting_videos():
    patterns = prefixspan(seqs(["a", "b"], ["c", "d"], ["a", "b"]), 0.5)
    ab = next(p for p in patterns if p.steps == ("a", "b"))
    assert ab.supporting_videos == ("v0", "v2")


def test_prefixspan_matches_brute_force_on_random_corpora():
    rng = random.Random(42)
    for _ in range(200):
        corpus = random_corpus(rng)
        sigma = rng.choice([0.3, 0.5, 0.75, 1.0])
        sequences = [ActionSequence(f"v{i}", s) for i, s in enumerate(corpus)]
        mined = {p.steps: p.support for p in prefixspan(sequences, sigma)}
        expected = brute_force_patterns(corpus, sigma)
        assert mined == expected


def test_prefixspan_support_antimonotone():
    rng = random.Random(9)
    for _ in range(50):
        corpus = random_corpus(rng)
        sequences = [ActionSequence(f"v{i}", s) for i, s in enumerate(corpus)]
        mined = {p.steps: p.support for p in prefixspan(sequences, 0.3)}
        for steps, support in mined.items():
            for shorter_len in range(2, len(steps)):
                for idxs in itertools.combinations(range(len(steps)), shorter_len):
                    sub = tuple(steps[i] for i in idxs)
                    if sub in mined:
                        assert mined[sub] >= support - 1e-12


# -- verification ---------------------------------------------------------------


def test_verify_default_rules():
    assert verify_default(Pattern(("a",), 1.0, ("v0",)), []) == 0.0
    assert verify_default(Pattern(("a", "b"), 0.66, ("v0",)), []) == 0.66


def test_verify_threshold_filters_low_support(tmp_path):
    # support 0.2 < tau_verify 0.25 -> no logic node
    store = MemoryStore(Config(dim=64, sigma_support=0.2, action_verbs=("go",)))
    rid = 0
    for video in ("a", "b", "c", "d", "e"):
        rid += 1
        steps = ["go north", "go south"] if video == "a" else [f"sit {video}"]
        store.ingest(ObservationRecord(
            rid, video, 0.0, [Description(s) for s in steps], [], []))
    created = store.distill()
    assert created == []


# -- distillation ----------------------------------------------------------------


def test_distill_fruit_salad_creates_exactly_one_node():
    store = fruit_salad_store()
    created = store.distill()
    assert len(created) == 1
    node = store.logic[created[0]]
    assert node.steps == ("chop_fruit", "mix_fruit", "serve_salad")
    labels = [START, "chop_fruit", "mix_fruit", "serve_salad", GOAL]
    assert [l for l in labels if l in node.dag.nodes] == labels
    assert node.dag.has_edge(START, "chop_fruit")
    assert node.dag.has_edge("chop_fruit", "mix_fruit")
    assert node.dag.has_edge("mix_fruit", "serve_salad")
    assert node.dag.has_edge("serve_salad", GOAL)


def test_distill_no_repeats_no_nodes():
    # Two disjoint sources: every length-2 pattern has support 0.5 < 0.6.
    store = MemoryStore(Config(dim=64, sigma_support=0.6, action_verbs=("nonexistentverb",)))
    store.ingest(ObservationRecord(1, "a", 0.0, [Description("alpha one"), Description("beta two")], [], []))
    store.ingest(ObservationRecord(2, "b", 0.0, [Description("gamma three"), Description("delta four")], [], []))
    assert store.distill() == []


def test_distill_attrs_copied_from_evidence():
    store = fruit_salad_store()
    node = store.logic[store.distill()[0]]
    assert node.dag.nodes["mix_fruit"].attrs == {"tool": "bowl"}
    assert node.dag.nodes["chop_fruit"].attrs == {"tool": "knife"}


def test_distill_outcome_seeds_beta_stats():
    store = MemoryStore(Config(dim=64, action_verbs=("nonexistentverb",)))
    rid = 0
    for video in ("a", "b"):
        rid += 1
        store.ingest(ObservationRecord(rid, video, 0.0, [
            Description("alpha one", outcome="failure" if video == "a" else "success"),
            Description("beta two"),
        ], [], []))
    node = store.logic[store.distill()[0]]
    # alpha_one: 1 success + 1 failure over the prior (1,1) -> (2,2)
    assert node.dag.nodes["alpha_one"].success_alpha == 2.0
    assert node.dag.nodes["alpha_one"].success_beta == 2.0
    assert node.dag.nodes["beta_two"].success_alpha == 3.0


def test_distill_index_vectors():
    store = simple_chain_store()
    node = store.logic[store.distill()[0]]
    assert np.array_equal(node.i_goal, store.embed(node.c))
    step_mean = np.mean([store.embed(s) for s in node.steps], axis=0)
    step_mean /= np.linalg.norm(step_mean)
    assert np.allclose(node.i_step, step_mean, atol=1e-12)
    assert abs(np.linalg.norm(node.i_step) - 1.0) <= 1e-9


def test_distill_rerun_is_noop():
    store = fruit_salad_store()
    first = store.distill()
    assert store.distill() == []
    assert len(store.logic) == len(first)


def test_distill_links_cover_every_step():
    store = fruit_salad_store()
    node = store.logic[store.distill()[0]]
    linked_actions = {store.episodic[i].action for i in node.episodic_links}
    assert set(node.steps) <= linked_actions


def test_distill_custom_goal_namer():
    store = simple_chain_store()
    store.set_goal_namer(lambda pattern: "do " + "+".join(pattern.steps))
    node = store.logic[store.distill()[0]]
    assert node.c.startswith("do ")
    assert np.array_equal(node.i_goal, store.embed(node.c))
