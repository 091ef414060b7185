"""Approximate MDP homomorphism over search-tree nodes.

Nodes are grouped batch-wise with greedy complete linkage: a node joins
the first same-depth, same-unit group whose every member is within the
reward and transition error thresholds, otherwise it founds a new group.
Grouped nodes share averaged statistics until the abstraction is split.

Nodes are duck-typed; anything with ``node_id``, ``depth``, ``slot``,
``children``, ``X``, ``N`` and a writable ``group`` attribute works. A
node's outgoing samples are read from its children (``action``,
``signature``, ``X``, ``N``).
"""

from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

# action -> (mean return through that edge, next-state signature)
Samples = Mapping[Hashable, tuple[float, Hashable]]

TRANSITION_MODES = ("normalized", "raw")


def edge_samples(node) -> dict:
    """Sampled ``<s, a, R>`` data of a node, keyed by action."""
    return {c.action: (c.X / c.N if c.N else 0.0, c.signature) for c in node.children}


def reward_error_from_samples(a: Samples, b: Samples) -> float:
    err = 0.0
    for act in a.keys() | b.keys():
        ra = a[act][0] if act in a else 0.0
        rb = b[act][0] if act in b else 0.0
        d = abs(ra - rb)
        if d > err:
            err = d
    return err


def transition_error_from_samples(a: Samples, b: Samples, mode: str = "normalized") -> float:
    """Each action in the union contributes 0 if both sides reach the same
    signature, else 2 (disjoint point masses). ``normalized`` divides by the
    union size; ``raw`` keeps the plain sum."""
    union = a.keys() | b.keys()
    if not union:
        return 0.0
    mismatched = 0
    for act in union:
        if act not in a or act not in b or a[act][1] != b[act][1]:
            mismatched += 1
    total = 2.0 * mismatched
    if mode == "normalized":
        return total / len(union)
    if mode == "raw":
        return total
    raise ValueError(f"unknown transition error mode {mode!r}")


def reward_error(s1, s2) -> float:
    return reward_error_from_samples(edge_samples(s1), edge_samples(s2))


def transition_error(s1, s2, mode: str = "normalized") -> float:
    return transition_error_from_samples(edge_samples(s1), edge_samples(s2), mode)


def _similar(a: Samples, b: Samples, eta_r: float, eta_t: float, mode: str) -> bool:
    union = a.keys() | b.keys()
    if not union:
        return eta_r >= 0.0 and eta_t >= 0.0
    mismatched = 0
    for act in union:
        in_a = act in a
        in_b = act in b
        ra = a[act][0] if in_a else 0.0
        rb = b[act][0] if in_b else 0.0
        if abs(ra - rb) > eta_r:
            return False
        if not (in_a and in_b and a[act][1] == b[act][1]):
            mismatched += 1
    err_t = 2.0 * mismatched
    if mode == "normalized":
        err_t /= len(union)
    return err_t <= eta_t


class AbstractGroup:
    """A set of same-depth, same-unit nodes sharing averaged statistics."""

    __slots__ = ("group_id", "depth", "slot", "members", "sum_x", "sum_n")

    def __init__(self, group_id: int, depth: int, slot, first) -> None:
        self.group_id = group_id
        self.depth = depth
        self.slot = slot
        self.members = [first]
        self.sum_x = first.X
        self.sum_n = first.N
        first.group = self

    @property
    def m(self) -> int:
        return len(self.members)

    def add(self, node) -> None:
        self.members.append(node)
        self.sum_x += node.X
        self.sum_n += node.N
        node.group = self

    def stats(self) -> tuple[float, float]:
        m = len(self.members)
        return self.sum_x / m, self.sum_n / m

    def __repr__(self) -> str:
        ids = [n.node_id for n in self.members]
        return f"AbstractGroup(id={self.group_id}, depth={self.depth}, slot={self.slot}, members={ids})"


def group_stats(group: AbstractGroup) -> tuple[float, float]:
    """Averaged ``(X, N)`` of a group's members."""
    return group.stats()


@dataclass
class BatchReport:
    iteration: int
    nodes: int
    groups: int
    compression: float
    construct_ms: float


class Abstraction:
    """The node partition phi. Ungrouped nodes count as singleton groups."""

    def __init__(self, eta_r: float, eta_t: float, transition_mode: str = "normalized") -> None:
        if transition_mode not in TRANSITION_MODES:
            raise ValueError(f"unknown transition error mode {transition_mode!r}")
        self.eta_r = eta_r
        self.eta_t = eta_t
        self.transition_mode = transition_mode
        self.groups: list[AbstractGroup] = []
        self._by_key: dict[tuple, list[AbstractGroup]] = defaultdict(list)
        self._grouped = 0
        self.split_done = False

    @property
    def active(self) -> bool:
        return not self.split_done

    def n_groups(self, n_nodes: int) -> int:
        return n_nodes - self._grouped + len(self.groups)

    def construct(self, nodes: Iterable) -> list[AbstractGroup]:
        """Place every ungrouped node (depth >= 1) into a group.

        Depths are processed from deepest to 1; within a depth, nodes and
        candidate groups are scanned in creation order. Existing groups are
        never dissolved. Returns the groups modified by this call.
        """
        if self.split_done:
            return []
        by_depth: dict[int, list] = defaultdict(list)
        for node in nodes:
            if node.group is None and node.depth >= 1:
                by_depth[node.depth].append(node)
        cache: dict[int, dict] = {}

        def samples(node):
            s = cache.get(node.node_id)
            if s is None:
                s = cache[node.node_id] = edge_samples(node)
            return s

        touched: dict[int, AbstractGroup] = {}
        eta_r, eta_t, mode = self.eta_r, self.eta_t, self.transition_mode
        for depth in sorted(by_depth, reverse=True):
            for s1 in sorted(by_depth[depth], key=lambda n: n.node_id):
                d1 = samples(s1)
                candidates = self._by_key[(depth, s1.slot)]
                for group in candidates:
                    if all(_similar(d1, samples(s2), eta_r, eta_t, mode) for s2 in group.members):
                        group.add(s1)
                        break
                else:
                    group = AbstractGroup(len(self.groups), depth, s1.slot, s1)
                    self.groups.append(group)
                    candidates.append(group)
                self._grouped += 1
                touched[group.group_id] = group
        return list(touched.values())

    def split(self) -> None:
        """Hand each member its group's averaged statistics and return to the identity partition."""
        for group in self.groups:
            x_hat, n_hat = group.stats()
            for node in group.members:
                node.X = x_hat
                node.N = n_hat
                node.group = None
        self.groups = []
        self._by_key.clear()
        self._grouped = 0
        self.split_done = True


def split_abstraction(abstraction: Abstraction) -> None:
    abstraction.split()


def construct_abstraction(abstraction: Abstraction, nodes: Iterable) -> list[AbstractGroup]:
    return abstraction.construct(nodes)


def compression_rate(n_nodes: int, abstraction: Abstraction | None) -> float:
    """Tree nodes per group; 1.0 for the identity partition."""
    if n_nodes <= 0:
        raise ValueError("compression rate of an empty tree is undefined")
    if abstraction is None:
        return 1.0
    return n_nodes / abstraction.n_groups(n_nodes)


def timed_construct(abstraction: Abstraction, nodes: list, iteration: int) -> BatchReport:
    t0 = time.perf_counter()
    abstraction.construct(nodes)
    ms = (time.perf_counter() - t0) * 1000.0
    n = len(nodes)
    return BatchReport(iteration, n, abstraction.n_groups(n), compression_rate(n, abstraction), ms)
