"""Knowledge fusion: merge DAG variants of one procedure into a multi-path DAG.

Three stages: embedding-based optimal node alignment, edge union with
endpoints mapped through the alignment, and Bayesian statistic pooling
(Beta: alpha1+alpha2-1; Dirichlet gammas counted once on merged edges).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import cosine
from .dag import GOAL, START, ProceduralDag, check_valid
from .errors import FusionCycle, InvalidInput, InvalidPrior

_EPS = 1e-9


@dataclass
class Alignment:
    """One-to-one step matching; START/GOAL align unconditionally."""

    pairs: list = field(default_factory=list)  # (label1, label2, similarity)
    unmatched1: list = field(default_factory=list)
    unmatched2: list = field(default_factory=list)


def _optimal_total(sim: np.ndarray) -> float:
    if sim.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(-sim)
    return float(sim[rows, cols].sum())


def _lexicographic_optimal_assignment(sim: np.ndarray) -> list:
    """Max-total assignment on a square matrix, lexicographically smallest.

    Rows are fixed in order; for each row the smallest column preserving
    optimality wins. Rows and columns are pre-sorted by label, so the
    result breaks ties by (label1, label2) as required.
    """
    size = sim.shape[0]
    remaining_rows = list(range(size))
    remaining_cols = list(range(size))
    target = _optimal_total(sim)
    assignment = []
    for row in list(remaining_rows):
        remaining_rows.remove(row)
        for col in list(remaining_cols):
            rest = sim[np.ix_(remaining_rows, [c for c in remaining_cols if c != col])]
            if sim[row, col] + _optimal_total(rest) >= target - _EPS:
                assignment.append((row, col))
                remaining_cols.remove(col)
                target -= sim[row, col]
                break
    return assignment


def align_nodes(g1: ProceduralDag, g2: ProceduralDag, embedder, tau_align: float = 0.8) -> Alignment:
    """Optimal bipartite matching of step nodes by label-embedding cosine.

    Pairs below tau_align are dropped after matching. Equal-weight
    matchings resolve to the lexicographically smallest (label1, label2).
    """
    steps1 = sorted(g1.step_labels())
    steps2 = sorted(g2.step_labels())
    alignment = Alignment(pairs=[(START, START, 1.0)])

    if steps1 and steps2:
        vecs1 = [embedder.embed(s) for s in steps1]
        vecs2 = [embedder.embed(s) for s in steps2]
        size = max(len(steps1), len(steps2))
        sim = np.zeros((size, size))
        for i, v1 in enumerate(vecs1):
            for j, v2 in enumerate(vecs2):
                sim[i, j] = cosine(v1, v2)
        matched1, matched2 = set(), set()
        step_pairs = []
        for row, col in _lexicographic_optimal_assignment(sim):
            if row >= len(steps1) or col >= len(steps2):
                continue  # padding
            if sim[row, col] < tau_align:
                continue
            step_pairs.append((steps1[row], steps2[col], float(sim[row, col])))
            matched1.add(steps1[row])
            matched2.add(steps2[col])
        alignment.pairs.extend(sorted(step_pairs))
        alignment.unmatched1 = [s for s in steps1 if s not in matched1]
        alignment.unmatched2 = [s for s in steps2 if s not in matched2]
    else:
        alignment.unmatched1 = list(steps1)
        alignment.unmatched2 = list(steps2)

    alignment.pairs.append((GOAL, GOAL, 1.0))
    return alignment


def pool_beta(a1, a2):
    """Pool two Beta posteriors that share the (1,1) creation prior.

    (alpha1+alpha2-1, beta1+beta2-1) equals the posterior of the
    concatenated trial sequence, exactly.
    """
    for alpha, beta in (a1, a2):
        if alpha < 1.0 or beta < 1.0:
            raise InvalidPrior(f"Beta parameters below the (1,1) prior: {(alpha, beta)}")
    return (a1[0] + a2[0] - 1.0, a1[1] + a2[1] - 1.0)


def fuse(g1: ProceduralDag, g2: ProceduralDag, embedder, tau_align: float = 0.8) -> ProceduralDag:
    """Merge two valid DAGs of the same procedure into one multi-path DAG.

    Aligned nodes merge (attrs union with g1 precedence, Beta pooled);
    unmatched nodes carry over; edges union with counts added and gammas
    counted once on merged edges. Fails atomically with FusionCycle if the
    union would contain a cycle; the inputs are never mutated.
    """
    for name, g in (("first", g1), ("second", g2)):
        violations = check_valid(g)
        if violations:
            raise InvalidInput(f"{name} input DAG invalid: {violations[0]}")

    alignment = align_nodes(g1, g2, embedder, tau_align)
    mapping2 = {l2: l1 for l1, l2, _ in alignment.pairs}

    fused = ProceduralDag()
    for l1, l2, _ in alignment.pairs:
        n1, n2 = g1.nodes[l1], g2.nodes[l2]
        attrs = dict(n2.attrs)
        attrs.update(n1.attrs)
        alpha, beta = pool_beta(
            (n1.success_alpha, n1.success_beta), (n2.success_alpha, n2.success_beta)
        )
        node = fused.add_node(l1)
        node.attrs = attrs
        node.success_alpha, node.success_beta = alpha, beta
    for label in alignment.unmatched1:
        n = g1.nodes[label]
        fused.add_node(label, dict(n.attrs), n.success_alpha, n.success_beta)
    for label in alignment.unmatched2:
        n = g2.nodes[label]
        target = label
        while target in fused.nodes:  # label collision with an unaligned twin
            target += "~"
        mapping2[label] = target
        fused.add_node(target, dict(n.attrs), n.success_alpha, n.success_beta)

    for src, dst, stat in g1.edges():
        fused.add_edge(src, dst, stat.count, stat.gamma)
    for src, dst, stat in g2.edges():
        ms, md = mapping2[src], mapping2[dst]
        if fused.has_edge(ms, md):
            edge = fused.adj[ms][md]
            edge.count += stat.count
            edge.gamma = edge.gamma + stat.gamma - 1.0
        else:
            fused.add_edge(ms, md, stat.count, stat.gamma)

    violations = check_valid(fused)
    if violations:
        raise FusionCycle(f"fused union is not a valid DAG: {violations[0]}")
    return fused


@dataclass
class FusionReport:
    new_id: int
    removed: tuple
    alignment: Alignment
    count_before: float
    count_after: float


def _total_count(dag: ProceduralDag) -> float:
    return sum(stat.count for _, _, stat in sorted(dag.edges(), key=lambda e: (e[0], e[1])))


def fuse_logic_nodes(store, id_a: int, id_b: int) -> FusionReport:
    """Replace two logic nodes by their fusion under the store's writer lock.

    The fused node keeps the first node's goal text; index vectors are the
    component-wise mean of the inputs'; evidence links and anchors union.
    """
    from .distill import LogicNode

    for logic_id in (id_a, id_b):
        if logic_id not in store.logic:
            raise InvalidInput(f"no logic node {logic_id}")
    if id_a == id_b:
        raise InvalidInput("cannot fuse a logic node with itself")
    a, b = store.logic[id_a], store.logic[id_b]
    alignment = align_nodes(a.dag, b.dag, store.embedder, store.config.tau_align)
    before = _total_count(a.dag) + _total_count(b.dag)
    fused_dag = fuse(a.dag, b.dag, store.embedder, store.config.tau_align)

    logic_id = store.next_logic_id
    store.next_logic_id += 1
    node = LogicNode(
        id=logic_id,
        c=a.c,
        i_goal=(a.i_goal + b.i_goal) / 2.0,
        i_step=(a.i_step + b.i_step) / 2.0,
        dag=fused_dag,
        episodic_links=set(a.episodic_links) | set(b.episodic_links),
        anchors=set(a.anchors) | set(b.anchors),
        score=max(a.score, b.score),
        steps=tuple(a.steps),
    )
    for old_id in (id_a, id_b):
        del store.logic[old_id]
        store.index.remove(("logic", old_id, "goal"))
        store.index.remove(("logic", old_id, "step"))
    store.logic[logic_id] = node
    store.index.upsert(("logic", logic_id, "goal"), node.i_goal)
    store.index.upsert(("logic", logic_id, "step"), node.i_step)
    return FusionReport(logic_id, (id_a, id_b), alignment, before, _total_count(fused_dag))


def auto_fuse(store) -> list:
    """Fuse logic-node pairs whose i_goal cosine clears tau_align.

    Lowest-id pair first; pairs whose union would cycle are skipped.
    Repeats until no eligible pair remains.
    """
    reports = []
    failed: set = set()
    while True:
        ids = sorted(store.logic)
        candidate = None
        for i, id_a in enumerate(ids):
            for id_b in ids[i + 1:]:
                if (id_a, id_b) in failed:
                    continue
                sim = cosine(store.logic[id_a].i_goal, store.logic[id_b].i_goal)
                if sim >= store.config.tau_align:
                    candidate = (id_a, id_b)
                    break
            if candidate:
                break
        if candidate is None:
            return reports
        try:
            reports.append(fuse_logic_nodes(store, *candidate))
        except FusionCycle:
            failed.add(candidate)
