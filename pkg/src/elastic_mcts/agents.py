"""Agents: uniform random, the rule-based Combat Agent, and the MCTS family."""

from __future__ import annotations

import random
from dataclasses import asdict, replace
from typing import Any, Optional

from .engine import GameState, UnitAction, enumerate_actions
from .engine.state import Unit
from .search import SearchParams, SearchStats, draw_unit_order, run_search

AGENT_NAMES = ("combat", "random", "mcts", "mcts_u", "elastic_mcts_u")


class Agent:
    """Chooses the next action for one of the active player's unacted units."""

    name = "agent"

    def act(self, state: GameState, rng: random.Random) -> UnitAction:
        raise NotImplementedError

    def reset(self) -> None:
        """Forget per-game state before a new match."""

    @property
    def last_stats(self) -> Optional[SearchStats]:
        return None


class RandomAgent(Agent):
    name = "random"

    def act(self, state: GameState, rng: random.Random) -> UnitAction:
        unit = state.unacted_units()[0]
        actions = enumerate_actions(state, unit)
        return actions[rng.randrange(len(actions))]


def isolation_scores(state: GameState, player: int, radius: int = 2) -> dict[int, int]:
    """For each enemy e: my units within ``radius`` of e minus e's allies within ``radius``."""
    scores = {}
    for e in state.units:
        if e.owner == player:
            continue
        mine = theirs = 0
        for u in state.units:
            if u.id == e.id:
                continue
            if abs(u.pos[0] - e.pos[0]) + abs(u.pos[1] - e.pos[1]) <= radius:
                if u.owner == player:
                    mine += 1
                else:
                    theirs += 1
        scores[e.id] = mine - theirs
    return scores


def _strength_key(u: Unit) -> tuple:
    return (-u.spec.attack_damage, -u.health, u.id)


class CombatAgent(Agent):
    """Focus fire on the most isolated enemy; healers tend the strongest ally.

    The isolation radius and the additive score are this package's reading
    of the rule-based baseline and can be changed per instance.
    """

    name = "combat"

    def __init__(self, isolation_radius: int = 2) -> None:
        self.isolation_radius = isolation_radius

    def choose_target(self, state: GameState, player: int) -> Unit:
        scores = isolation_scores(state, player, self.isolation_radius)
        best = max(scores.items(), key=lambda kv: (kv[1], -kv[0]))[0]
        return state.by_id[best]

    @staticmethod
    def _toward(state: GameState, actions: list[UnitAction], unit: Unit, goal: Unit) -> list[UnitAction]:
        """Actions ranked by remaining path distance to ``goal`` after the move (stable)."""
        dist = state.grid.distances_from(goal.pos)
        far = state.grid.width * state.grid.height

        def remaining(a: UnitAction) -> int:
            return dist.get(unit.pos if a.move_to is None else a.move_to, far)

        return sorted(actions, key=remaining)

    def act(self, state: GameState, rng: random.Random) -> UnitAction:
        player = state.active_player
        unit = state.unacted_units()[0]
        actions = enumerate_actions(state, unit)
        if unit.spec.is_healer:
            return self._heal(state, unit, actions)
        target = self.choose_target(state, player)
        attacks = [a for a in actions if a.target_id == target.id]
        if attacks:
            return self._toward(state, attacks, unit, target)[0]
        moves = [a for a in actions if a.target_id is None]
        return self._toward(state, moves, unit, target)[0]

    def _heal(self, state: GameState, unit: Unit, actions: list[UnitAction]) -> UnitAction:
        allies = sorted((u for u in state.units if u.owner == unit.owner and u.id != unit.id), key=_strength_key)
        for ally in allies:
            if ally.health >= ally.spec.max_health:
                continue
            heals = [a for a in actions if a.target_id == ally.id]
            if heals:
                return self._toward(state, heals, unit, ally)[0]
        moves = [a for a in actions if a.target_id is None]
        if not allies:
            return moves[0]
        return self._toward(state, moves, unit, allies[0])[0]


class SearchAgent(Agent):
    """MCTS, MCTS_u or Elastic MCTS_u depending on ``params``.

    The unit order is drawn from the agent's random stream at its first
    decision of a game and kept until ``reset`` (one order per player, so
    a single instance may also serve both sides).
    """

    def __init__(self, name: str, params: SearchParams) -> None:
        self.name = name
        self.params = params
        self.unit_order: Optional[list[int]] = None
        self._orders: dict[int, list[int]] = {}
        self._last: Optional[SearchStats] = None

    def reset(self) -> None:
        self.unit_order = None
        self._orders = {}
        self._last = None

    @property
    def last_stats(self) -> Optional[SearchStats]:
        return self._last

    def act(self, state: GameState, rng: random.Random) -> UnitAction:
        player = state.active_player
        if player not in self._orders:
            self._orders[player] = draw_unit_order(state, player, rng)
        self.unit_order = self._orders[player]
        result = run_search(state, self.params, self.unit_order, rng)
        self._last = result.stats
        return result.action


SEARCH_DEFAULTS = {
    "mcts": dict(unit_ordering=False, abstraction=False),
    "mcts_u": dict(unit_ordering=True, abstraction=False),
    "elastic_mcts_u": dict(unit_ordering=True, abstraction=True),
}


def search_params(name: str, overrides: Optional[dict[str, Any]] = None, fm_budget: Optional[int] = None) -> SearchParams:
    from .presets import PRESETS

    fields = dict(asdict(PRESETS[name])) if name in PRESETS else {}
    fields.update(SEARCH_DEFAULTS[name])
    fields.update(overrides or {})
    if fm_budget is not None:
        fields["fm_budget"] = fm_budget
    return SearchParams(**fields)


def make_agent(name: str, params: Optional[dict[str, Any]] = None, fm_budget: Optional[int] = None) -> Agent:
    """Instantiate an agent by its config name."""
    params = dict(params or {})
    if name == "random":
        return RandomAgent()
    if name == "combat":
        return CombatAgent(**params)
    if name in SEARCH_DEFAULTS:
        return SearchAgent(name, search_params(name, params, fm_budget))
    raise ValueError(f"unknown agent {name!r}; expected one of {AGENT_NAMES}")


def with_budget(params: SearchParams, fm_budget: int) -> SearchParams:
    return replace(params, fm_budget=fm_budget)
