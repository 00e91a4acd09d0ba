"""Logic distillation: mine recurring action patterns, verify, build DAG nodes.

Pipeline (phase 2): episodic memory -> per-source action sequences ->
PrefixSpan frequent subsequences -> verification -> single-path procedural
DAG + dual index vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import tokenize
from .dag import ProceduralDag, assert_valid, enumerate_paths

# Tokens skipped when looking for the object of a verb. Not linguistics,
# just enough to turn "chops the fruit" into chop_fruit deterministically.
_STOPWORDS = frozenset(
    "the a an some this that these those his her its their my your our "
    "of to in on at with and then is are was were be been it up down "
    "into onto for from by".split()
)

_VERB_SUFFIXES = ("", "s", "es", "ed", "d", "ing")


@dataclass
class ActionSequence:
    video: str
    actions: list


@dataclass
class Pattern:
    steps: tuple
    support: float
    supporting_videos: tuple


@dataclass
class LogicNode:
    """Distilled procedure: goal text, dual index vectors, DAG, evidence."""

    id: int
    c: str
    i_goal: np.ndarray
    i_step: np.ndarray
    dag: ProceduralDag
    episodic_links: set = field(default_factory=set)
    anchors: set = field(default_factory=set)
    score: float = 0.0
    steps: tuple = ()


def _match_verb(token: str, verbs) -> str | None:
    for verb in verbs:
        if token == verb:
            return verb
        if token.startswith(verb) and token[len(verb):] in _VERB_SUFFIXES:
            return verb
    return None


def extract_action(text: str, verbs) -> str | None:
    """Map one description to an action label.

    First lexicon verb found (inflections -s/-es/-ed/-d/-ing tolerated)
    plus the next non-stopword token; a verb with no object stands alone.
    Descriptions without a lexicon verb fall back to the full normalized
    description; empty text has no action.
    """
    tokens = tokenize(text)
    if not tokens:
        return None
    for i, token in enumerate(tokens):
        verb = _match_verb(token, verbs)
        if verb is None:
            continue
        for nxt in tokens[i + 1:]:
            if nxt not in _STOPWORDS:
                return f"{verb}_{nxt}"
        return verb
    return "_".join(tokens)


def extract_action_sequences(store, episode_ids=None) -> list[ActionSequence]:
    """Group episodic nodes by source, order by time, map to action labels."""
    nodes = (
        store.episodic.values()
        if episode_ids is None
        else [store.episodic[i] for i in sorted(episode_ids)]
    )
    by_video: dict[str, list] = {}
    for node in nodes:
        by_video.setdefault(node.video, []).append(node)
    sequences = []
    for video in sorted(by_video):
        ordered = sorted(by_video[video], key=lambda n: (n.t, n.id))
        actions = [n.action for n in ordered if n.action]
        if actions:
            sequences.append(ActionSequence(video, actions))
    return sequences


def _is_subsequence(small, big) -> bool:
    it = iter(big)
    return all(step in it for step in small)


def prefixspan(sequences, sigma: float) -> list[Pattern]:
    """All length>=2 subsequence patterns with support >= sigma.

    ``p in S`` means p occurs as a possibly non-contiguous subsequence;
    each sequence counts at most once per pattern. Sorted by descending
    support, then lexicographic steps.
    """
    n = len(sequences)
    if n == 0:
        return []
    seqs = [list(s.actions) for s in sequences]
    videos = [s.video for s in sequences]
    min_count = max(1, int(np.ceil(sigma * n - 1e-9)))
    patterns = []

    def grow(prefix, projected):
        # projected: list of (sequence index, next scan position)
        occurrences: dict[str, list] = {}
        for seq_idx, pos in projected:
            seen_here = set()
            seq = seqs[seq_idx]
            for j in range(pos, len(seq)):
                item = seq[j]
                if item in seen_here:
                    continue
                seen_here.add(item)
                occurrences.setdefault(item, []).append((seq_idx, j + 1))
        for item in sorted(occurrences):
            supporters = occurrences[item]
            if len(supporters) < min_count:
                continue
            extended = prefix + (item,)
            if len(extended) >= 2:
                patterns.append(
                    Pattern(
                        steps=extended,
                        support=len(supporters) / n,
                        supporting_videos=tuple(sorted({videos[i] for i, _ in supporters})),
                    )
                )
            grow(extended, supporters)

    grow((), [(i, 0) for i in range(n)])
    patterns.sort(key=lambda p: (-p.support, p.steps))
    return patterns


def verify_default(pattern: Pattern, related_memories) -> float:
    """Deterministic verifier: support of the pattern, 0 for fragments."""
    if len(pattern.steps) < 2:
        return 0.0
    return pattern.support


def default_goal_name(pattern: Pattern) -> str:
    return "procedure: " + " → ".join(pattern.steps)


def _normalized_mean(vectors) -> np.ndarray:
    mean = np.mean(vectors, axis=0)
    norm = float(np.linalg.norm(mean))
    return mean / norm if norm > 0.0 else mean


def _covered_by_existing(steps, store) -> bool:
    # Skip candidates already represented: equal to, or a subsequence of,
    # a label path of an existing logic node's DAG.
    for logic_id in sorted(store.logic):
        node = store.logic[logic_id]
        for path in enumerate_paths(node.dag, store.config.max_paths, store.config.max_path_len):
            inner = tuple(path[1:-1])
            if steps == inner or _is_subsequence(steps, inner):
                return True
    return False


def distill(store, episode_ids=None) -> list[int]:
    """Run the full distillation pipeline; returns new LogicNode ids.

    ``episode_ids`` restricts sequence extraction (used by the candidate
    pool); verification evidence is always gathered store-wide. Candidates
    are processed longest-first within equal support so complete procedures
    land before their fragments, which are then skipped as subsumed.
    """
    sequences = extract_action_sequences(store, episode_ids)
    candidates = prefixspan(sequences, store.config.sigma_support)
    candidates.sort(key=lambda p: (-p.support, -len(p.steps), p.steps))

    verifier = store.verifier_fn
    goal_namer = store.goal_namer_fn
    created = []
    for pattern in candidates:
        step_set = set(pattern.steps)
        if len(step_set) != len(pattern.steps):
            continue  # repeated action cannot form an acyclic step graph
        related = [
            store.episodic[i]
            for i in sorted(store.episodic)
            if store.episodic[i].action in step_set
        ]
        score = verifier(pattern, related)
        if score <= store.config.tau_verify:
            continue
        if _covered_by_existing(pattern.steps, store):
            continue

        dag = ProceduralDag.single_path(pattern.steps)
        for step in pattern.steps:
            node = dag.nodes[step]
            for ep in sorted(
                (e for e in related if e.action == step), key=lambda e: (e.t, e.id)
            ):
                for key, value in ep.attrs.items():
                    node.attrs.setdefault(key, value)
                if ep.outcome == "success":
                    node.success_alpha += 1.0
                else:
                    node.success_beta += 1.0
        assert_valid(dag, "distill")

        c = goal_namer(pattern)
        i_goal = store.embed(c)
        i_step = _normalized_mean([store.embed(s) for s in pattern.steps])
        logic_id = store.next_logic_id
        store.next_logic_id += 1
        node = LogicNode(
            id=logic_id,
            c=c,
            i_goal=i_goal,
            i_step=i_step,
            dag=dag,
            episodic_links={e.id for e in related},
            anchors=set().union(*(e.anchors for e in related)) if related else set(),
            score=score,
            steps=tuple(pattern.steps),
        )
        store.logic[logic_id] = node
        store.index.upsert(("logic", logic_id, "goal"), i_goal)
        store.index.upsert(("logic", logic_id, "step"), i_step)
        created.append(logic_id)
    return created
