from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastic_mcts.agents import Agent
from elastic_mcts.engine import Grid, UnitAction
from elastic_mcts.harness import EXTRA_AGENTS, Level
from elastic_mcts.tuner import (
    ELASTIC_SPACE,
    MCTS_SPACE,
    NTupleModel,
    ParamSpace,
    fitness_vs_combat,
    mutate,
    ntbea_run,
)

from .conftest import make_state
from .oracles import brute_force_argmax


def separable(params: dict) -> float:
    x1 = MCTS_SPACE.values[0].index(params["C"])
    x2 = MCTS_SPACE.values[1].index(params["rollout_length"])
    return x1 / 4 + x2 / 5


def test_space_sizes():
    assert MCTS_SPACE.size == 20 and len(MCTS_SPACE.candidates()) == 20
    assert ELASTIC_SPACE.size == 240
    params = ELASTIC_SPACE.decode((0, 1, 0, 2))
    assert params == {"C": 0.1, "rollout_length": 40, "batch_size": 20, "alpha_abs": 240}


def test_space_validation():
    with pytest.raises(ValueError):
        ParamSpace((), ())
    with pytest.raises(ValueError):
        ParamSpace(("a",), ((),))


def test_model_tuples_and_counts():
    model = NTupleModel(4)
    assert len(model.tuples) == 4 + 6 + 1
    model = NTupleModel(2)
    assert len(model.tuples) == 2 + 1  # the 2-tuple is the full tuple
    model.add((0, 1), 1.0)
    model.add((0, 1), 0.0)
    assert model.count((0, 1)) == 2
    assert model.mean((0, 1)) == pytest.approx(0.5)
    assert model.mean((3, 3)) is None
    # unseen candidates are scored by exploration only
    assert model.ucb((3, 3), 2.0) > model.ucb((0, 1), 2.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mutation_changes_at_least_one_dimension(seed):
    rng = random.Random(seed)
    cand = ELASTIC_SPACE.random_candidate(rng)
    out = mutate(ELASTIC_SPACE, cand, rng)
    assert out != cand
    assert all(0 <= v < len(vals) for v, vals in zip(out, ELASTIC_SPACE.values))


def test_single_dimension_binary():
    space = ParamSpace(("flag",), ((0, 1),))
    result = ntbea_run(space, lambda p: float(p["flag"]), random.Random(0))
    assert result.params == {"flag": 1}


def test_constant_fitness_returns_most_visited():
    result = ntbea_run(MCTS_SPACE, lambda p: 0.5, random.Random(3), iterations=30)
    counts = {c: result.model.count(c) for c in MCTS_SPACE.candidates()}
    assert counts[result.best] == max(counts.values())


def test_full_tuple_counts_equal_iterations():
    result = ntbea_run(ELASTIC_SPACE, lambda p: random.random(), random.Random(1), iterations=17)
    full = result.model.tables[result.model.full_index]
    assert sum(n for _, n in full.values()) == 17
    assert len(result.history) == 17


def test_reproducible_trajectory():
    runs = [ntbea_run(MCTS_SPACE, separable, random.Random(42), iterations=20) for _ in range(2)]
    assert [h.candidate for h in runs[0].history] == [h.candidate for h in runs[1].history]


def test_separable_fitness_finds_argmax():
    want = brute_force_argmax(MCTS_SPACE, separable)
    result = ntbea_run(MCTS_SPACE, separable, random.Random(0))
    assert result.best == want


def test_empty_space_is_impossible():
    with pytest.raises(ValueError):
        ParamSpace(("a", "b"), ((1,), ()))


class _Idle(Agent):
    """Never moves; loses to anything that walks over."""

    name = "idle"

    def act(self, state, rng):
        return UnitAction(state.unacted_units()[0].id)


def _levels(n=2):
    grid = Grid.open(10, 10)
    return [Level(f"open{i}", make_state(grid, [(0, "King", (1, 1 + i)), (0, "Warrior", (2, 2)),
                                                 (1, "King", (8, 8 - i)), (1, "Warrior", (7, 7))]))
            for i in range(n)]


def test_fitness_idle_agent_near_zero(monkeypatch):
    monkeypatch.setitem(EXTRA_AGENTS, "idle", _Idle)
    score = fitness_vs_combat("idle", {}, _levels(), 4, random.Random(0))
    assert score <= 0.125


def test_fitness_symmetric_random_agents():
    score = fitness_vs_combat("random", {}, _levels(), 40, random.Random(0), opponent="random")
    assert 0.25 <= score <= 0.75


def test_fitness_single_win(monkeypatch):
    monkeypatch.setitem(EXTRA_AGENTS, "idle", _Idle)
    assert fitness_vs_combat("combat", {}, _levels(1), 1, random.Random(0), opponent="idle") == 1.0
    with pytest.raises(ValueError):
        fitness_vs_combat("combat", {}, _levels(1), 0, random.Random(0))
