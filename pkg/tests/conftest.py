from __future__ import annotations

import random
from pathlib import Path

import pytest

from elastic_mcts.engine import DEFAULT_UNIT_TYPES, GameState, Grid, Unit

DATA = Path(__file__).resolve().parents[1] / "src" / "elastic_mcts" / "data"
DESK_MAP = DATA / "maps" / "desk16.map"
OPEN_MAP = DATA / "maps" / "open10.map"


def make_state(grid: Grid, units: list[tuple[int, str, tuple[int, int]]], **kwargs) -> GameState:
    """Units given as (owner, type name, pos); ids follow list order, health is full unless overridden."""
    health = kwargs.pop("health", {})
    out = []
    for uid, (owner, name, pos) in enumerate(units):
        spec = DEFAULT_UNIT_TYPES[name]
        out.append(Unit(uid, owner, spec, pos, health.get(uid, spec.max_health)))
    return GameState(grid, out, **kwargs)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)
