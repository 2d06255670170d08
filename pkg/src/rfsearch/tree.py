"""Search tree over candidate reward programs.

Stores every sampled candidate's state (thought, source, score, feedback)
plus the bandit statistics driving selection: a smoothed value Q, visit
count N, and a self-assessed prior used inside the UCT score. The root is
virtual; its children are the initialization nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .designer import CandidateProgram
from .errors import EliteEmpty, EmptyTree
from .evaluation import TrainingFeedback

ROOT_ID = 0

STATUS_PENDING = "pending"
STATUS_EVALUATED = "evaluated"
STATUS_FAILED = "failed"


@dataclass
class NodeState:
    id: int
    parent: int | None
    children: list[int] = field(default_factory=list)
    depth: int = 0
    candidate: CandidateProgram | None = None
    score: float | None = None
    feedback: TrainingFeedback | None = None
    q_value: float | None = None
    visit_count: int = 0
    self_verify: float = 0.0
    status: str = STATUS_PENDING
    action_tag: str = "init"

    @property
    def is_root(self) -> bool:
        return self.parent is None


class SearchTree:
    """Single-writer tree; concurrent readers share immutable snapshots."""

    def __init__(self):
        self.nodes: dict[int, NodeState] = {
            ROOT_ID: NodeState(id=ROOT_ID, parent=None, status=STATUS_EVALUATED)
        }
        self._next_id = ROOT_ID + 1

    @property
    def root(self) -> NodeState:
        return self.nodes[ROOT_ID]

    def node(self, node_id: int) -> NodeState:
        return self.nodes[node_id]

    def attach(
        self,
        parent_id: int,
        candidate: CandidateProgram,
        action_tag: str,
        *,
        score: float | None = None,
        feedback: TrainingFeedback | None = None,
        self_verify: float = 0.0,
        failed: bool = False,
    ) -> NodeState:
        """Add an evaluated or failed child; pending nodes never enter the tree."""
        parent = self.nodes[parent_id]
        node = NodeState(
            id=self._next_id,
            parent=parent_id,
            depth=parent.depth + 1,
            candidate=candidate,
            action_tag=action_tag,
            self_verify=self_verify,
            visit_count=1,
        )
        if failed:
            node.status = STATUS_FAILED
            node.q_value = None  # reads as the lazy global minimum
        else:
            node.status = STATUS_EVALUATED
            node.score = score
            node.feedback = feedback
            node.q_value = score
        self._next_id += 1
        self.nodes[node.id] = node
        parent.children.append(node.id)
        return node

    # --- queries ----------------------------------------------------------

    def evaluated_nodes(self) -> list[NodeState]:
        return [
            n for n in self.nodes.values() if n.status == STATUS_EVALUATED and not n.is_root
        ]

    def candidate_nodes(self) -> list[NodeState]:
        return [n for n in self.nodes.values() if not n.is_root]

    def selectable_children(self, node: NodeState) -> list[NodeState]:
        return [
            self.nodes[c] for c in node.children if self.nodes[c].status == STATUS_EVALUATED
        ]

    def best_node(self) -> NodeState:
        """Evaluated node with the highest score; ties go to the oldest node."""
        nodes = self.evaluated_nodes()
        if not nodes:
            raise EmptyTree("no evaluated nodes")
        return max(nodes, key=lambda n: (n.score, -n.id))

    def ancestors(self, node_id: int) -> list[int]:
        """Ancestor ids from the node's parent up to and including the root."""
        out = []
        cur = self.nodes[node_id].parent
        while cur is not None:
            out.append(cur)
            cur = self.nodes[cur].parent
        return out

    def path_from_root(self, node_id: int) -> list[int]:
        path = [node_id] + self.ancestors(node_id)
        path.reverse()
        return path


# --- UCT --------------------------------------------------------------------


def uct_score(
    child: NodeState,
    parent: NodeState,
    lam: float,
    q_min: float,
    q_max: float,
    sibling_verify: list[float],
) -> float:
    """Normalized-Q exploitation plus weighted exploration and prior terms.

    The prior is the child's softmax share of its evaluated siblings'
    self-verify scores; with equal Q bounds the exploitation term is a
    neutral 0.5.
    """
    if q_max == q_min:
        exploit = 0.5
    else:
        exploit = (child.q_value - q_min) / (q_max - q_min)
    explore = math.sqrt(2.0 * math.log(parent.visit_count + 1) / child.visit_count)
    prior = math.exp(child.self_verify) / math.fsum(math.exp(v) for v in sibling_verify)
    return exploit + lam * (explore + prior)


def q_bounds(tree: SearchTree) -> tuple[float, float]:
    """Global min/max Q over evaluated nodes (recomputed per descent)."""
    qs = [n.q_value for n in tree.evaluated_nodes()]
    if not qs:
        raise EmptyTree("no evaluated nodes")
    return min(qs), max(qs)


def select_leaf(tree: SearchTree, lam: float, rng=None) -> int:
    """Descend by maximal UCT among evaluated children until none remain.

    Failed children are never entered. Ties break toward the lowest child
    index, so the walk is a pure function of the tree snapshot and lam.
    """
    if not tree.selectable_children(tree.root):
        raise EmptyTree("root has no evaluated children")
    q_min, q_max = q_bounds(tree)
    node = tree.root
    while True:
        children = tree.selectable_children(node)
        if not children:
            return node.id
        verify = [c.self_verify for c in children]
        best = None
        best_score = -math.inf
        for child in children:
            s = uct_score(child, node, lam, q_min, q_max, verify)
            if s > best_score:
                best, best_score = child, s
        node = best


def select_by_policy(tree: SearchTree, policy: str, lam: float, rng=None) -> int:
    """Selection-policy switchboard used by the search-method ablations."""
    if policy == "uct":
        return select_leaf(tree, lam, rng)
    evaluated = tree.evaluated_nodes()
    if not evaluated:
        raise EmptyTree("no evaluated nodes")
    if policy == "greedy":
        # Always the current best node, even if already expanded.
        return max(evaluated, key=lambda n: (n.score, -n.id)).id
    leaves = [n for n in evaluated if not tree.selectable_children(n)]
    if not leaves:
        leaves = evaluated
    if policy == "dfs":
        return max(leaves, key=lambda n: (n.depth, -n.id)).id
    if policy == "bfs":
        return min(leaves, key=lambda n: (n.depth, n.id)).id
    raise ValueError(f"unknown selection policy {policy!r}")


# --- backup -------------------------------------------------------------------


def backup(tree: SearchTree, leaf_id: int, eta: float) -> None:
    """Propagate value and visit counts from a leaf toward the root.

    Each ancestor gets Q <- (1-eta)Q + eta*max(child Q) and N <- sum(child N).
    Failed children contribute the current global minimum Q to the max, so
    they count visits without ever attracting the search. The root only
    tracks N.
    """
    lazy_min = None
    cur = tree.nodes[leaf_id].parent
    while cur is not None:
        node = tree.nodes[cur]
        children = [tree.nodes[c] for c in node.children]
        if not node.is_root:
            child_qs = []
            for c in children:
                if c.status == STATUS_FAILED or c.q_value is None:
                    if lazy_min is None:
                        lazy_min = _global_min_q(tree)
                    child_qs.append(lazy_min)
                else:
                    child_qs.append(c.q_value)
            node.q_value = (1.0 - eta) * (node.q_value or 0.0) + eta * max(child_qs)
        node.visit_count = sum(c.visit_count for c in children)
        cur = node.parent


def _global_min_q(tree: SearchTree) -> float:
    qs = [n.q_value for n in tree.evaluated_nodes()]
    return min(qs) if qs else 0.0


# --- elite set -----------------------------------------------------------------


@dataclass
class EliteSet:
    """Capacity-bounded store of the best-scoring nodes.

    Entries stay sorted by score descending, ties keeping insertion order;
    sampling weights entry at rank r (1-based) by 1/r, renormalized after
    each draw.
    """

    capacity: int = 8
    entries: list[tuple[int, float]] = field(default_factory=list)

    def update(self, node: NodeState) -> None:
        if node.status != STATUS_EVALUATED:
            return
        if len(self.entries) >= self.capacity and node.score <= self.entries[-1][1]:
            return
        pos = 0
        while pos < len(self.entries) and self.entries[pos][1] >= node.score:
            pos += 1
        self.entries.insert(pos, (node.id, node.score))
        if len(self.entries) > self.capacity:
            self.entries.pop()

    def sample(self, k: int, rng: np.random.Generator) -> list[int]:
        if not self.entries:
            raise EliteEmpty("elite set is empty")
        k = min(k, len(self.entries))
        remaining = list(range(len(self.entries)))
        picked: list[int] = []
        for _ in range(k):
            weights = np.array([1.0 / (idx + 1) for idx in remaining])
            weights /= weights.sum()
            choice = int(rng.choice(len(remaining), p=weights))
            picked.append(self.entries[remaining[choice]][0])
            remaining.pop(choice)
        return picked

    def ids(self) -> list[int]:
        return [node_id for node_id, _ in self.entries]


def elite_update(elite: EliteSet, node: NodeState) -> None:
    elite.update(node)


def elite_sample(elite: EliteSet, k: int, rng: np.random.Generator) -> list[int]:
    return elite.sample(k, rng)
