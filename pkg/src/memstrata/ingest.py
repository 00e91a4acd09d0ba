"""Observation processing: entity anchors, episodic nodes, semantic consolidation.

Records arrive with pre-extracted descriptions, conclusions, and perceptual
vectors (face/voice); the engine never runs perception models itself. Entity
mentions inside text are written as ``@hint`` tokens and must resolve to a
percept in the same record or to an anchor that already exists.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .core import cosine
from .distill import extract_action
from .errors import (
    DanglingMention,
    DimensionMismatch,
    DuplicateObservation,
    MalformedRecord,
)

_MENTION_RE = re.compile(r"@([\w-]+)")

OUTCOMES = ("success", "failure")
PERCEPT_KINDS = ("face", "voice")


@dataclass
class Description:
    text: str
    attrs: dict = field(default_factory=dict)
    outcome: str = "success"


@dataclass
class Conclusion:
    type: str
    text: str


@dataclass
class Percept:
    kind: str
    vector: np.ndarray
    hint: str


@dataclass
class ObservationRecord:
    id: int
    video: str
    t: float
    descriptions: list = field(default_factory=list)
    conclusions: list = field(default_factory=list)
    percepts: list = field(default_factory=list)


@dataclass
class EntityAnchor:
    id: int
    label: str
    centroid_face: np.ndarray | None = None
    centroid_voice: np.ndarray | None = None
    count: int = 0
    face_count: int = 0
    voice_count: int = 0


@dataclass
class EpisodicNode:
    id: int
    t: float
    d: str
    v_e: np.ndarray = None
    video: str = ""
    anchors: set = field(default_factory=set)
    action: str | None = None
    outcome: str = "success"
    attrs: dict = field(default_factory=dict)


@dataclass
class SemanticNode:
    id: int
    type: str
    attrs: str = ""
    v_s: np.ndarray = None
    anchors: set = field(default_factory=set)
    weight: int = 1


@dataclass
class ObservationMeta:
    video: str
    episodes: list


def parse_mentions(text: str) -> list[str]:
    return _MENTION_RE.findall(text)


# -- record parsing ---------------------------------------------------------


def record_from_dict(obj: dict) -> ObservationRecord:
    """Build a record from one decoded JSONL object, validating shape."""
    try:
        rec_id = obj["id"]
        video = obj["video"]
        t = obj["t"]
    except (KeyError, TypeError) as exc:
        raise MalformedRecord(f"record missing required field: {exc}") from None
    if not isinstance(rec_id, int):
        raise MalformedRecord(f"record id must be an integer, got {rec_id!r}")
    if not isinstance(video, str) or not video:
        raise MalformedRecord(f"record video must be a nonempty string, got {video!r}")
    if not isinstance(t, (int, float)):
        raise MalformedRecord(f"record t must be a number, got {t!r}")

    descriptions = []
    for d in obj.get("descriptions", []):
        if isinstance(d, str):
            descriptions.append(Description(d))
        elif isinstance(d, dict) and isinstance(d.get("text"), str):
            outcome = d.get("outcome", "success")
            if outcome not in OUTCOMES:
                raise MalformedRecord(f"bad outcome {outcome!r}")
            attrs = d.get("attrs", {})
            if not isinstance(attrs, dict):
                raise MalformedRecord("description attrs must be an object")
            descriptions.append(Description(d["text"], dict(attrs), outcome))
        else:
            raise MalformedRecord(f"bad description entry: {d!r}")

    conclusions = []
    for c in obj.get("conclusions", []):
        if isinstance(c, dict) and isinstance(c.get("type"), str) and isinstance(c.get("text"), str):
            conclusions.append(Conclusion(c["type"], c["text"]))
        elif isinstance(c, (list, tuple)) and len(c) == 2:
            conclusions.append(Conclusion(str(c[0]), str(c[1])))
        else:
            raise MalformedRecord(f"bad conclusion entry: {c!r}")

    percepts = []
    for p in obj.get("percepts", []):
        if not isinstance(p, dict):
            raise MalformedRecord(f"bad percept entry: {p!r}")
        kind = p.get("kind")
        hint = p.get("hint")
        vec = p.get("vector")
        if kind not in PERCEPT_KINDS:
            raise MalformedRecord(f"percept kind must be face|voice, got {kind!r}")
        if not isinstance(hint, str) or not hint:
            raise MalformedRecord("percept hint must be a nonempty string")
        if not isinstance(vec, list) or not all(isinstance(x, (int, float)) for x in vec):
            raise MalformedRecord("percept vector must be a list of numbers")
        percepts.append(Percept(kind, np.asarray(vec, dtype=np.float64), hint))

    return ObservationRecord(rec_id, video, float(t), descriptions, conclusions, percepts)


def read_observation_lines(lines) -> list[ObservationRecord]:
    """Parse JSONL observations. First line must be the {"version": 1} header."""
    records = []
    saw_header = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"line {lineno}: bad JSON: {exc}") from None
        if not saw_header:
            if not (isinstance(obj, dict) and obj.get("version") == 1 and len(obj) == 1):
                raise MalformedRecord('line 1: expected version header {"version": 1}')
            saw_header = True
            continue
        records.append(record_from_dict(obj))
    if not saw_header:
        raise MalformedRecord("missing observation version header")
    return records


def read_observations(path: str) -> list[ObservationRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return read_observation_lines(fh)


# -- operations --------------------------------------------------------------


def resolve_anchor(store, percept: Percept) -> int:
    """Assign a percept to the closest same-kind anchor, or create one.

    The winning anchor's centroid becomes the running mean of its assigned
    vectors. A new anchor is seeded whenever the best similarity falls
    below tau_anchor (or no same-kind centroid exists).
    """
    if percept.vector.shape != (store.config.dim,):
        raise DimensionMismatch(
            f"percept vector has shape {percept.vector.shape}, store dim is {store.config.dim}"
        )
    best_id, best_sim = None, -2.0
    for anchor_id in sorted(store.anchors):
        anchor = store.anchors[anchor_id]
        centroid = anchor.centroid_face if percept.kind == "face" else anchor.centroid_voice
        if centroid is None:
            continue
        sim = cosine(percept.vector, centroid)
        if sim > best_sim:
            best_id, best_sim = anchor_id, sim

    if best_id is not None and best_sim >= store.config.tau_anchor:
        anchor = store.anchors[best_id]
        if percept.kind == "face":
            k = anchor.face_count
            anchor.centroid_face = (anchor.centroid_face * k + percept.vector) / (k + 1)
            anchor.face_count += 1
        else:
            k = anchor.voice_count
            anchor.centroid_voice = (anchor.centroid_voice * k + percept.vector) / (k + 1)
            anchor.voice_count += 1
        anchor.count += 1
        store.percept_count += 1
        return best_id

    anchor_id = store.next_anchor_id
    store.next_anchor_id += 1
    anchor = EntityAnchor(anchor_id, percept.hint, count=1)
    if percept.kind == "face":
        anchor.centroid_face = percept.vector.copy()
        anchor.face_count = 1
    else:
        anchor.centroid_voice = percept.vector.copy()
        anchor.voice_count = 1
    store.anchors[anchor_id] = anchor
    store.percept_count += 1
    return anchor_id


def _anchor_by_label(store, label: str) -> int | None:
    for anchor_id in sorted(store.anchors):
        if store.anchors[anchor_id].label == label:
            return anchor_id
    return None


def consolidate_semantic(store, ctype: str, text: str, anchors: set) -> list:
    """Reinforce, weaken, or insert one abstracted-knowledge item.

    Candidates are the semantic nodes whose anchor set covers the new
    item's anchors. The most similar candidate above tau_pos is reinforced
    (weight+1, no insert); otherwise the least similar candidate below
    tau_neg is weakened (weight-1, pruned at <= 0) before the new node is
    inserted. Ties break toward the lowest node id.
    """
    v = store.embed(text)
    events = []
    candidates = [
        node for node in store.semantic.values() if anchors <= node.anchors
    ]
    if candidates:
        scored = sorted(
            ((cosine(v, node.v_s), node.id) for node in candidates),
            key=lambda pair: (-pair[0], pair[1]),
        )
        best_sim, best_id = scored[0]
        if best_sim > store.config.tau_pos:
            store.semantic[best_id].weight += 1
            events.append(("reinforced", best_id))
            return events
        worst_sim, worst_id = min(scored, key=lambda pair: (pair[0], pair[1]))
        if worst_sim < store.config.tau_neg:
            node = store.semantic[worst_id]
            node.weight -= 1
            events.append(("weakened", worst_id))
            if node.weight <= 0:
                del store.semantic[worst_id]
                store.index.remove(("sem", worst_id))
                events.append(("pruned", worst_id))

    node_id = store.next_node_id
    store.next_node_id += 1
    node = SemanticNode(node_id, ctype, text, v, set(anchors), weight=1)
    store.semantic[node_id] = node
    store.index.upsert(("sem", node_id), v)
    events.append(("created", node_id))
    return events


def ingest_observation(store, rec: ObservationRecord):
    """Algorithm phase 1 for one record: anchors, episodic nodes, semantics.

    Atomic: all validation happens before the first mutation, so a raised
    error leaves the store untouched. Returns (new episodic ids, semantic
    event log).
    """
    if rec.id in store.observations:
        raise DuplicateObservation(f"observation {rec.id} already ingested")
    last_t = store.video_clock.get(rec.video)
    if last_t is not None and rec.t < last_t:
        raise MalformedRecord(
            f"timestamp {rec.t} for {rec.video!r} precedes previous {last_t}"
        )
    for desc in rec.descriptions:
        if desc.outcome not in OUTCOMES:
            raise MalformedRecord(f"bad outcome {desc.outcome!r}")
    for p in rec.percepts:
        if p.vector.shape != (store.config.dim,):
            raise DimensionMismatch(
                f"percept vector has shape {p.vector.shape}, store dim is {store.config.dim}"
            )

    percept_hints = {p.hint for p in rec.percepts}
    for text in [d.text for d in rec.descriptions] + [c.text for c in rec.conclusions]:
        for mention in parse_mentions(text):
            if mention in percept_hints:
                continue
            if _anchor_by_label(store, mention) is None:
                raise DanglingMention(f"@{mention} has no percept hint and no existing anchor")

    # Validation done; mutations start here.
    hint_map: dict[str, int] = {}
    for p in rec.percepts:
        anchor_id = resolve_anchor(store, p)
        hint_map.setdefault(p.hint, anchor_id)

    def mention_anchors(text: str) -> set:
        found = set()
        for mention in parse_mentions(text):
            if mention in hint_map:
                found.add(hint_map[mention])
            else:
                found.add(_anchor_by_label(store, mention))
        return found

    episodic_ids = []
    for desc in rec.descriptions:
        node_id = store.next_node_id
        store.next_node_id += 1
        v = store.embed(desc.text)
        node = EpisodicNode(
            id=node_id,
            t=rec.t,
            d=desc.text,
            v_e=v,
            video=rec.video,
            anchors=mention_anchors(desc.text),
            action=extract_action(desc.text, store.config.action_verbs),
            outcome=desc.outcome,
            attrs=dict(desc.attrs),
        )
        store.episodic[node_id] = node
        store.index.upsert(("epi", node_id), v)
        episodic_ids.append(node_id)

    events = []
    for concl in rec.conclusions:
        events.extend(
            consolidate_semantic(store, concl.type, concl.text, mention_anchors(concl.text))
        )

    store.observations[rec.id] = ObservationMeta(rec.video, list(episodic_ids))
    store.video_clock[rec.video] = rec.t
    return episodic_ids, events
