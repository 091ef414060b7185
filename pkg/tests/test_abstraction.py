from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastic_mcts.abstraction import (
    Abstraction,
    AbstractGroup,
    compression_rate,
    construct_abstraction,
    group_stats,
    reward_error,
    reward_error_from_samples,
    split_abstraction,
    transition_error,
    transition_error_from_samples,
)

from . import oracles
from .oracles import ToyNode


def _parent(*children: ToyNode, depth: int = 1, node_id: int = 100) -> ToyNode:
    node = ToyNode(node_id, depth, 0)
    node.children = list(children)
    return node


def _edge(action, mean: float, sig=0, n: int = 1) -> ToyNode:
    return ToyNode(-1, 2, 0, mean * n, n, action, sig)


def test_reward_error_identical_is_zero():
    a = _parent(_edge("x", 0.4), _edge("y", -0.2))
    b = _parent(_edge("x", 0.4), _edge("y", -0.2), node_id=101)
    assert reward_error(a, b) == 0.0


def test_reward_error_missing_action_counts_as_zero():
    a = _parent(_edge("x", 0.5))
    b = _parent(node_id=101)
    assert reward_error(a, b) == pytest.approx(0.5)


def test_reward_error_is_max_difference():
    a = {"a": (0.1, 0), "b": (0.3, 0), "c": (0.05, 0)}
    b = {"a": (0.0, 0), "b": (0.0, 0), "c": (0.0, 0)}
    assert reward_error_from_samples(a, b) == pytest.approx(0.3)


def test_reward_error_no_samples():
    assert reward_error_from_samples({}, {}) == 0.0


def test_transition_error_examples():
    same = {i: (0.0, "s") for i in range(10)}
    assert transition_error_from_samples(same, dict(same)) == 0.0
    one_off = dict(same)
    one_off[0] = (0.0, "other")
    assert transition_error_from_samples(same, one_off) == pytest.approx(0.2)
    two_off = dict(one_off)
    two_off[1] = (0.0, "other")
    assert transition_error_from_samples(same, two_off) == pytest.approx(0.4)
    assert transition_error_from_samples(same, two_off, "raw") == pytest.approx(4.0)
    assert transition_error_from_samples({}, {}) == 0.0


def test_transition_error_one_sided_action():
    a = _parent(_edge("x", 0.0, "s"), _edge("y", 0.0, "s"))
    b = _parent(_edge("x", 0.0, "s"), node_id=101)
    assert transition_error(a, b) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        transition_error(a, b, "bogus")


def test_group_stats_average():
    n1, n2 = ToyNode(1, 1, 0, 2.0, 10), ToyNode(2, 1, 0, 4.0, 20)
    g = AbstractGroup(0, 1, 0, n1)
    assert group_stats(g) == (2.0, 10)
    g.add(n2)
    assert group_stats(g) == (3.0, 15.0)
    g.sum_x += 1.0
    g.sum_n += 1
    assert group_stats(g)[0] == pytest.approx(3.5)


def test_identical_siblings_grouped():
    leaf = lambda: [_edge("a", 0.3, "s")]
    root = ToyNode(0, 0, 0)
    s1, s2 = ToyNode(1, 1, 0, 0.3, 1, "p"), ToyNode(2, 1, 0, 0.3, 1, "q")
    s1.children, s2.children = leaf(), leaf()
    root.children = [s1, s2]
    phi = Abstraction(0.1, 0.3)
    phi.construct([root, s1, s2])
    assert len(phi.groups) == 1 and phi.groups[0].members == [s1, s2]
    assert root.group is None
    assert compression_rate(3, phi) == pytest.approx(1.5)


def test_unsatisfiable_thresholds_keep_identity():
    nodes = oracles.random_toy_tree(random.Random(0), 30)
    phi = Abstraction(-1.0, -1.0)
    phi.construct(nodes)
    assert all(g.m == 1 for g in phi.groups)
    assert compression_rate(len(nodes), phi) == 1.0


def test_different_slots_never_grouped():
    a, b = ToyNode(1, 1, 0), ToyNode(2, 1, 1)
    phi = Abstraction(1.0, 2.0)
    phi.construct([a, b])
    assert a.group is not b.group


def test_compression_rate_definition():
    assert compression_rate(5, None) == 1.0
    nodes = [ToyNode(i, 1, 0) for i in range(100)]
    phi = Abstraction(0.1, 0.3)
    for k in range(10):
        g = AbstractGroup(k, 1, 0, nodes[10 * k])
        for n in nodes[10 * k + 1 : 10 * k + 10]:
            g.add(n)
        phi.groups.append(g)
    phi._grouped = 100
    assert compression_rate(100, phi) == 10.0
    with pytest.raises(ValueError):
        compression_rate(0, phi)


def test_split_assigns_group_stats_and_is_idempotent():
    n1, n2 = ToyNode(1, 1, 0, 2.0, 10), ToyNode(2, 1, 0, 4.0, 20)
    phi = Abstraction(10.0, 10.0)
    phi.construct([n1, n2])
    assert n1.group is n2.group
    split_abstraction(phi)
    assert (n1.X, n1.N) == (3.0, 15.0) and (n2.X, n2.N) == (3.0, 15.0)
    assert n1.group is None and phi.groups == []
    split_abstraction(phi)
    assert (n1.X, n1.N) == (3.0, 15.0)
    # independent after the split
    n1.X += 1.0
    assert n2.X == 3.0
    # construct is a no-op once split
    assert construct_abstraction(phi, [ToyNode(3, 1, 0)]) == []


def test_split_identity_changes_nothing():
    n1 = ToyNode(1, 1, 0, 2.0, 10)
    phi = Abstraction(-1, -1)
    phi.construct([n1])
    split_abstraction(phi)
    assert (n1.X, n1.N) == (2.0, 10)


def test_groups_persist_and_new_nodes_join():
    n1, n2 = ToyNode(1, 1, 0, 0.0, 1), ToyNode(2, 1, 0, 0.0, 1)
    phi = Abstraction(0.1, 0.3)
    phi.construct([n1])
    (g,) = phi.groups
    phi.construct([n1, n2])
    assert g.members == [n1, n2]


def test_empty_nodes_group_only_with_nonnegative_thresholds():
    a, b = ToyNode(1, 1, 0), ToyNode(2, 1, 0)
    Abstraction(0.0, 0.0).construct([a, b])
    assert a.group is b.group


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.05, 0.1, 0.5]), st.sampled_from([0.0, 0.3, 0.5, 1.0]),
       st.sampled_from(["normalized", "raw"]))
def test_construct_matches_brute_force_oracle(seed, eta_r, eta_t, mode):
    nodes = oracles.random_toy_tree(random.Random(seed), 40)
    phi = Abstraction(eta_r, eta_t, mode)
    phi.construct(nodes)
    got = sorted(sorted(n.node_id for n in g.members) for g in phi.groups)
    want = sorted(sorted(g) for g in oracles.greedy_partition(nodes, eta_r, eta_t, mode == "normalized"))
    assert got == want


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_error_functions_match_oracle(seed):
    rng = random.Random(seed)
    nodes = oracles.random_toy_tree(rng, 20)
    for a in nodes:
        for b in nodes:
            assert reward_error(a, b) == pytest.approx(oracles.reward_error(a, b))
            assert transition_error(a, b) == pytest.approx(oracles.transition_error(a, b))
            assert transition_error(a, b, "raw") == pytest.approx(oracles.transition_error(a, b, False))
