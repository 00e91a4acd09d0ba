"""The memory store: three node layers, anchors, index, persistence.

One store is one snapshot file. Snapshots are canonical JSON: keys sorted,
collections ordered by id, floats in Python's shortest round-trip decimal
form, so two saves of the same in-memory state are byte-identical and a
load reproduces every vector bit-for-bit.
"""

from __future__ import annotations

import copy
import json
import os

import numpy as np

from .core import Config, HashingEmbedder
from .dag import GOAL, START, ProceduralDag, check_valid, transition_prob
from .distill import LogicNode, default_goal_name, verify_default
from .errors import ConfigError, CorruptSnapshot, SnapshotIoError
from .ingest import (
    OUTCOMES,
    EntityAnchor,
    EpisodicNode,
    ObservationMeta,
    SemanticNode,
    ingest_observation,
)
from .maintain import PoolEntry, apply_observation
from .retrieve import VectorIndex, make_query, retrieve

SNAPSHOT_VERSION = 1


class MemoryStore:
    """Whole-system state plus thin facade methods over the module operations.

    Single-writer discipline: ingest, distill, maintenance, and fusion are
    serialized by the caller; reads may run concurrently between writes.
    """

    def __init__(self, config: Config | None = None, embedder=None):
        self.config = (config or Config()).copy()
        self.config.validate()
        self.embedder = embedder if embedder is not None else HashingEmbedder(self.config.dim)
        self.anchors: dict[int, EntityAnchor] = {}
        self.episodic: dict[int, EpisodicNode] = {}
        self.semantic: dict[int, SemanticNode] = {}
        self.logic: dict[int, LogicNode] = {}
        self.observations: dict[int, ObservationMeta] = {}
        self.video_clock: dict[str, float] = {}
        self.pool: list[PoolEntry] = []
        self.index = VectorIndex(self.config.dim)
        self.next_node_id = 1
        self.next_anchor_id = 1
        self.next_logic_id = 1
        self.percept_count = 0
        self.retrieval_calls = 0
        self.classifier = None
        self.verifier_fn = verify_default if self.config.verifier == "default" else None
        self.goal_namer_fn = default_goal_name if self.config.goal_namer == "default" else None

    # -- plugin registration ----------------------------------------------

    def set_verifier(self, fn) -> None:
        self.verifier_fn = fn

    def set_goal_namer(self, fn) -> None:
        self.goal_namer_fn = fn

    def set_classifier(self, fn) -> None:
        self.classifier = fn

    # -- facade -------------------------------------------------------------

    def embed(self, text: str) -> np.ndarray:
        return self.embedder.embed(text)

    def ingest(self, rec):
        return ingest_observation(self, rec)

    def distill(self, episode_ids=None):
        from .distill import distill as _distill

        if self.verifier_fn is None or self.goal_namer_fn is None:
            raise ConfigError("external verifier/goal_namer selected but not registered")
        return _distill(self, episode_ids)

    def apply(self, rec):
        return apply_observation(self, rec)

    def retrieve(self, text: str, qtype: str | None = None, constraint=None,
                 person: int | None = None, k: int = 5, include_logic: bool = True):
        q = make_query(self, text, qtype, constraint, person)
        return retrieve(self, q, k, include_logic=include_logic)

    def anchor_by_label(self, label: str) -> int | None:
        for anchor_id in sorted(self.anchors):
            if self.anchors[anchor_id].label == label:
                return anchor_id
        return None

    def clone(self) -> "MemoryStore":
        return copy.deepcopy(self)

    # -- persistence ----------------------------------------------------------

    def save(self, path: str) -> None:
        payload = json.dumps(snapshot_dict(self), sort_keys=True, indent=1)
        tmp = path + ".tmp"
        try:
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(payload)
                fh.write("\n")
            os.replace(tmp, path)
        except OSError as exc:
            raise SnapshotIoError(f"cannot write snapshot {path}: {exc}") from exc

    @classmethod
    def load(cls, path: str) -> "MemoryStore":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise SnapshotIoError(f"cannot read snapshot {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorruptSnapshot(f"snapshot is not valid JSON: {exc}") from None
        return store_from_dict(data)

    # -- diagnostics ----------------------------------------------------------

    def stats(self) -> dict:
        edge_total = sum(len(outs) for node in self.logic.values() for outs in node.dag.adj.values())
        count_total = float(sum(
            stat.count for node in self.logic.values() for _, _, stat in node.dag.edges()
        ))
        return {
            "anchors": len(self.anchors),
            "episodic": len(self.episodic),
            "semantic": len(self.semantic),
            "semantic_weight": sum(n.weight for n in self.semantic.values()),
            "logic": len(self.logic),
            "dag_edges": edge_total,
            "dag_transition_count": count_total,
            "observations": len(self.observations),
            "percepts": self.percept_count,
            "pool": len(self.pool),
        }

    def check(self) -> list[str]:
        return check_store(self)


# -- global invariant sweep -----------------------------------------------


def check_store(store: MemoryStore) -> list[str]:
    """Global invariant sweep; returns all violations (empty means healthy)."""
    v: list[str] = []
    try:
        store.config.validate()
    except ConfigError as exc:
        v.append(f"config: {exc}")

    dim = store.config.dim
    for anchor_id, anchor in sorted(store.anchors.items()):
        if anchor.centroid_face is None and anchor.centroid_voice is None:
            v.append(f"anchor {anchor_id}: no centroid")
        for name, c in (("face", anchor.centroid_face), ("voice", anchor.centroid_voice)):
            if c is not None and c.shape != (dim,):
                v.append(f"anchor {anchor_id}: {name} centroid dim {c.shape}")
        if anchor.count != anchor.face_count + anchor.voice_count:
            v.append(f"anchor {anchor_id}: count mismatch")
    if sum(a.count for a in store.anchors.values()) != store.percept_count:
        v.append("anchor counts do not sum to ingested percepts")

    for node_id, node in sorted(store.episodic.items()):
        if node_id >= store.next_node_id:
            v.append(f"episodic {node_id}: id beyond counter")
        if node.outcome not in OUTCOMES:
            v.append(f"episodic {node_id}: bad outcome {node.outcome!r}")
        if not node.anchors <= set(store.anchors):
            v.append(f"episodic {node_id}: dangling anchor reference")
        if not np.array_equal(node.v_e, store.embed(node.d)):
            v.append(f"episodic {node_id}: v_e is not embed(d)")
        if not np.array_equal(store.index.get(("epi", node_id)), node.v_e):
            v.append(f"episodic {node_id}: index out of sync")

    for node_id, node in sorted(store.semantic.items()):
        if node.weight < 1:
            v.append(f"semantic {node_id}: weight {node.weight} below 1")
        if not node.anchors <= set(store.anchors):
            v.append(f"semantic {node_id}: dangling anchor reference")
        if not np.array_equal(node.v_s, store.embed(node.attrs)):
            v.append(f"semantic {node_id}: v_s is not embed(attrs)")
        if not np.array_equal(store.index.get(("sem", node_id)), node.v_s):
            v.append(f"semantic {node_id}: index out of sync")

    for logic_id, node in sorted(store.logic.items()):
        for violation in check_valid(node.dag):
            v.append(f"logic {logic_id}: {violation}")
        if not node.episodic_links:
            v.append(f"logic {logic_id}: no episodic evidence")
        if not node.episodic_links <= set(store.episodic):
            v.append(f"logic {logic_id}: dangling episodic link")
        else:
            anchor_union = set()
            for ep_id in node.episodic_links:
                anchor_union |= store.episodic[ep_id].anchors
            if node.anchors != anchor_union:
                v.append(f"logic {logic_id}: anchors not the union over evidence")
        for slot, vec in (("goal", node.i_goal), ("step", node.i_step)):
            if vec.shape != (dim,):
                v.append(f"logic {logic_id}: i_{slot} dim {vec.shape}")
            elif not np.array_equal(store.index.get(("logic", logic_id, slot)), vec):
                v.append(f"logic {logic_id}: index i_{slot} out of sync")
        for src in sorted(node.dag.adj):
            outs = node.dag.adj[src]
            if not outs:
                continue
            total = sum(transition_prob(node.dag, src, dst) for dst in sorted(outs))
            if abs(total - 1.0) > 1e-9:
                v.append(f"logic {logic_id}: transition probs at {src} sum to {total}")

    expected_index = len(store.episodic) + len(store.semantic) + 2 * len(store.logic)
    if len(store.index) != expected_index:
        v.append(f"index holds {len(store.index)} vectors, expected {expected_index}")

    for obs_id, meta in sorted(store.observations.items()):
        for ep_id in meta.episodes:
            node = store.episodic.get(ep_id)
            if node is None:
                v.append(f"observation {obs_id}: missing episode {ep_id}")
            elif node.video != meta.video:
                v.append(f"observation {obs_id}: episode {ep_id} video mismatch")

    if len(store.pool) >= store.config.pool_trigger:
        v.append("candidate pool at or beyond trigger without distillation")
    for entry in store.pool:
        if entry.observation_id not in store.observations:
            v.append(f"pool entry references unknown observation {entry.observation_id}")
    return v


# -- snapshot encode / decode ------------------------------------------------


def _vec(arr) -> list:
    return [float(x) for x in arr]


def _dag_dict(dag: ProceduralDag) -> dict:
    labels = [START] + sorted(dag.step_labels()) + [GOAL]
    return {
        "nodes": [
            {
                "label": label,
                "attrs": dag.nodes[label].attrs,
                "success_alpha": dag.nodes[label].success_alpha,
                "success_beta": dag.nodes[label].success_beta,
            }
            for label in labels
        ],
        "edges": [
            {"src": src, "dst": dst, "count": stat.count, "gamma": stat.gamma}
            for src, dst, stat in sorted(dag.edges(), key=lambda e: (e[0], e[1]))
        ],
    }


def _dag_from_dict(data: dict) -> ProceduralDag:
    dag = ProceduralDag.__new__(ProceduralDag)
    dag.nodes = {}
    dag.adj = {}
    for entry in data["nodes"]:
        dag.add_node(
            entry["label"], entry.get("attrs", {}),
            entry["success_alpha"], entry["success_beta"],
        )
    for entry in data["edges"]:
        if entry["src"] not in dag.nodes or entry["dst"] not in dag.nodes:
            raise CorruptSnapshot(f"dag edge endpoint missing: {entry['src']}->{entry['dst']}")
        dag.add_edge(entry["src"], entry["dst"], entry["count"], entry["gamma"])
    return dag


def snapshot_dict(store: MemoryStore) -> dict:
    return {
        "version": SNAPSHOT_VERSION,
        "config": store.config.to_dict(),
        "counters": {
            "node": store.next_node_id,
            "anchor": store.next_anchor_id,
            "logic": store.next_logic_id,
        },
        "percept_count": store.percept_count,
        "anchors": [
            {
                "id": a.id,
                "label": a.label,
                "count": a.count,
                "face_count": a.face_count,
                "voice_count": a.voice_count,
                "face": None if a.centroid_face is None else _vec(a.centroid_face),
                "voice": None if a.centroid_voice is None else _vec(a.centroid_voice),
            }
            for _, a in sorted(store.anchors.items())
        ],
        "episodic": [
            {
                "id": n.id,
                "t": n.t,
                "d": n.d,
                "video": n.video,
                "anchors": sorted(n.anchors),
                "action": n.action,
                "outcome": n.outcome,
                "attrs": n.attrs,
                "v": _vec(n.v_e),
            }
            for _, n in sorted(store.episodic.items())
        ],
        "semantic": [
            {
                "id": n.id,
                "type": n.type,
                "attrs": n.attrs,
                "anchors": sorted(n.anchors),
                "weight": n.weight,
                "v": _vec(n.v_s),
            }
            for _, n in sorted(store.semantic.items())
        ],
        "logic": [
            {
                "id": n.id,
                "c": n.c,
                "score": n.score,
                "steps": list(n.steps),
                "episodic_links": sorted(n.episodic_links),
                "anchors": sorted(n.anchors),
                "i_goal": _vec(n.i_goal),
                "i_step": _vec(n.i_step),
                "dag": _dag_dict(n.dag),
            }
            for _, n in sorted(store.logic.items())
        ],
        "pool": [
            {
                "observation": e.observation_id,
                "vector": _vec(e.vector),
                "actions": list(e.actions),
            }
            for e in store.pool
        ],
        "observations": [
            {"id": obs_id, "video": m.video, "episodes": list(m.episodes)}
            for obs_id, m in sorted(store.observations.items())
        ],
        "video_clock": dict(sorted(store.video_clock.items())),
    }


def store_from_dict(data: dict) -> MemoryStore:
    if not isinstance(data, dict) or data.get("version") != SNAPSHOT_VERSION:
        raise CorruptSnapshot(f"unsupported snapshot version {data.get('version')!r}"
                              if isinstance(data, dict) else "snapshot is not an object")
    try:
        config = Config.from_dict(data["config"])
        store = MemoryStore(config)
        store.next_node_id = data["counters"]["node"]
        store.next_anchor_id = data["counters"]["anchor"]
        store.next_logic_id = data["counters"]["logic"]
        store.percept_count = data["percept_count"]
        for a in data["anchors"]:
            anchor = EntityAnchor(
                id=a["id"],
                label=a["label"],
                centroid_face=None if a["face"] is None else np.asarray(a["face"], dtype=np.float64),
                centroid_voice=None if a["voice"] is None else np.asarray(a["voice"], dtype=np.float64),
                count=a["count"],
                face_count=a["face_count"],
                voice_count=a["voice_count"],
            )
            store.anchors[anchor.id] = anchor
        for e in data["episodic"]:
            node = EpisodicNode(
                id=e["id"], t=e["t"], d=e["d"],
                v_e=np.asarray(e["v"], dtype=np.float64),
                video=e["video"], anchors=set(e["anchors"]),
                action=e["action"], outcome=e["outcome"], attrs=dict(e["attrs"]),
            )
            store.episodic[node.id] = node
            store.index.upsert(("epi", node.id), node.v_e)
        for s in data["semantic"]:
            node = SemanticNode(
                id=s["id"], type=s["type"], attrs=s["attrs"],
                v_s=np.asarray(s["v"], dtype=np.float64),
                anchors=set(s["anchors"]), weight=s["weight"],
            )
            store.semantic[node.id] = node
            store.index.upsert(("sem", node.id), node.v_s)
        for l in data["logic"]:
            node = LogicNode(
                id=l["id"], c=l["c"],
                i_goal=np.asarray(l["i_goal"], dtype=np.float64),
                i_step=np.asarray(l["i_step"], dtype=np.float64),
                dag=_dag_from_dict(l["dag"]),
                episodic_links=set(l["episodic_links"]),
                anchors=set(l["anchors"]),
                score=l["score"],
                steps=tuple(l["steps"]),
            )
            store.logic[node.id] = node
            store.index.upsert(("logic", node.id, "goal"), node.i_goal)
            store.index.upsert(("logic", node.id, "step"), node.i_step)
        for p in data["pool"]:
            store.pool.append(
                PoolEntry(p["observation"], np.asarray(p["vector"], dtype=np.float64),
                          tuple(p["actions"]))
            )
        for o in data["observations"]:
            store.observations[o["id"]] = ObservationMeta(o["video"], list(o["episodes"]))
        store.video_clock = {k: float(t) for k, t in data.get("video_clock", {}).items()}
    except CorruptSnapshot:
        raise
    except ConfigError as exc:
        raise CorruptSnapshot(f"snapshot config invalid: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptSnapshot(f"snapshot structure invalid: {exc!r}") from None

    violations = check_store(store)
    if violations:
        raise CorruptSnapshot(violations[0])
    return store
