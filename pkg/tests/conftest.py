"""Shared fixture builders for the test suite."""

import json
import random

import numpy as np
import pytest

from memstrata import (
    Conclusion,
    Config,
    Description,
    MemoryStore,
    ObservationRecord,
    Percept,
)

FRUIT_VERBS = ("chop", "mix", "serve", "wash", "blend", "grab", "pour", "slice")


def one_hot(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim)
    v[index] = 1.0
    return v


def fruit_salad_store(dim: int = 512, extra_sources: bool = True) -> MemoryStore:
    """Three sources sharing chop->mix->serve, attrs tool=bowl on mix.

    With ``extra_sources`` the store also holds the broken-bowl and
    store-has-bowls context episodes plus semantic conclusions.
    """
    cfg = Config(dim=dim, action_verbs=FRUIT_VERBS)
    store = MemoryStore(cfg)
    rid = 0
    for video in ("v1", "v2", "v3"):
        for ti, (text, attrs) in enumerate([
            ("@jack chop the fruit", {"tool": "knife"}),
            ("@jack mix the fruit in a bowl", {"tool": "bowl"}),
            ("@jack serve the salad", {"tool": "plate"}),
        ]):
            rid += 1
            store.ingest(ObservationRecord(
                rid, video, float(ti),
                [Description(text, dict(attrs))],
                [Conclusion("character", "@jack is a careful cook")] if ti == 2 else [],
                [Percept("face", one_hot(3, dim), "jack")] if ti == 0 else [],
            ))
    if extra_sources:
        rid += 1
        store.ingest(ObservationRecord(
            rid, "home", 0.0,
            [Description("the bowl at home is broken")],
            [Conclusion("knowledge", "the store downstairs has bowls one minute away")],
            [],
        ))
    return store


@pytest.fixture
def fruit_store():
    return fruit_salad_store()


def simple_chain_store(actions=("alpha_one", "beta_two", "gamma_three"),
                       videos=("s1", "s2"), dim=128) -> MemoryStore:
    """Minimal store whose sequences repeat the given action labels."""
    cfg = Config(dim=dim, action_verbs=("nonexistentverb",))
    store = MemoryStore(cfg)
    rid = 0
    for video in videos:
        for ti, action in enumerate(actions):
            rid += 1
            # No lexicon verb: the fallback makes the whole text the action.
            text = action.replace("_", " ")
            store.ingest(ObservationRecord(rid, video, float(ti), [Description(text)], [], []))
    return store


def random_corpus(rng: random.Random, max_sequences=6, max_len=6, alphabet=5):
    n_seq = rng.randint(1, max_sequences)
    letters = [chr(ord("a") + i) for i in range(alphabet)]
    return [
        [rng.choice(letters) for _ in range(rng.randint(1, max_len))]
        for _ in range(n_seq)
    ]


def jsonl_lines(records) -> str:
    lines = [json.dumps({"version": 1})]
    lines.extend(json.dumps(r) for r in records)
    return "\n".join(lines) + "\n"
