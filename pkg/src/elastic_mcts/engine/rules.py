"""Kill The King rules: action enumeration, the forward model and outcomes."""

from __future__ import annotations

import random
from typing import Optional

from .grid import Grid, Pos
from .state import DRAW, MAX_TURNS, ONGOING, GameState, Outcome, Unit, UnitAction


class IllegalActionError(ValueError):
    pass


def reachable_tiles(grid: Grid, start: Pos, move_range: int, occupied) -> list[Pos]:
    """Floor tiles within ``move_range`` 4-neighbour steps, excluding ``start``.

    Occupied tiles are impassable. Tiles come in terrain-BFS order
    (neighbours visited as +x, -x, +y, -y), so enumeration is deterministic.
    """
    if move_range <= 0:
        return []
    if move_range > 3:
        return _reachable_bfs(grid, start, move_range, occupied)
    # Up to range 3 a detour around an occupied tile is always at least two
    # steps longer than the terrain distance, so a tile is reachable iff it is
    # free and one of its terrain predecessors is reachable.
    reached = {start}
    out = []
    for tile, _, preds in grid.diamond(start, move_range):
        if tile in occupied:
            continue
        for p in preds:
            if p in reached:
                reached.add(tile)
                out.append(tile)
                break
    return out


def _reachable_bfs(grid: Grid, start: Pos, move_range: int, occupied) -> list[Pos]:
    neighbors = grid.neighbors
    seen = {start}
    out: list[Pos] = []
    frontier = [start]
    for _ in range(move_range):
        nxt_frontier = []
        for cur in frontier:
            for nxt in neighbors.get(cur, ()):
                if nxt in seen:
                    continue
                seen.add(nxt)
                if nxt not in occupied:
                    out.append(nxt)
                    nxt_frontier.append(nxt)
        frontier = nxt_frontier
    return out


def _target_candidates(state: GameState, unit: Unit) -> list[Unit]:
    """Valid targets that could be in range from some tile the unit can reach."""
    spec = unit.spec
    reach = spec.move_range + spec.target_range
    ux, uy = unit.pos
    if spec.is_healer:
        if spec.heal_strength <= 0:
            return []
        return [
            u for u in state.units
            if u.owner == unit.owner and u.id != unit.id and u.health < u.spec.max_health
            and abs(u.pos[0] - ux) + abs(u.pos[1] - uy) <= reach
        ]
    if spec.attack_damage <= 0:
        return []
    return [
        u for u in state.units
        if u.owner != unit.owner and abs(u.pos[0] - ux) + abs(u.pos[1] - uy) <= reach
    ]


def _move_options(state: GameState, unit: Unit) -> list[Optional[Pos]]:
    return [None, *reachable_tiles(state.grid, unit.pos, unit.spec.move_range, state.occupied)]


def _check_actor(state: GameState, unit_id: int) -> Unit:
    unit = state.by_id.get(unit_id)
    if unit is None:
        raise IllegalActionError(f"unknown or dead unit {unit_id}")
    if unit.owner != state.active_player:
        raise IllegalActionError(f"unit {unit_id} does not belong to active player {state.active_player}")
    if unit_id in state.acted:
        raise IllegalActionError(f"unit {unit_id} already acted this turn")
    return unit


def enumerate_actions(state: GameState, unit: Unit) -> list[UnitAction]:
    """All (move option) x (target option) pairs for ``unit``; no precondition checks."""
    uid = unit.id
    targets = _target_candidates(state, unit)
    rng_limit = unit.spec.target_range
    actions = []
    append = actions.append
    for move in _move_options(state, unit):
        append(UnitAction(uid, move, None))
        if targets:
            px, py = unit.pos if move is None else move
            for t in targets:
                tx, ty = t.pos
                if abs(tx - px) + abs(ty - py) <= rng_limit:
                    append(UnitAction(uid, move, t.id))
    return actions


def legal_unit_actions(state: GameState, unit_id: int) -> list[UnitAction]:
    """Legal actions of one unit in engine enumeration order; DoNothing comes first."""
    if outcome(state).is_terminal:
        raise IllegalActionError("game is over")
    return enumerate_actions(state, _check_actor(state, unit_id))


def random_action(state: GameState, unit: Unit, rng: random.Random) -> UnitAction:
    """Uniform draw from ``enumerate_actions`` without materialising the list."""
    targets = _target_candidates(state, unit)
    moves = _move_options(state, unit)
    if not targets:
        return UnitAction(unit.id, moves[rng.randrange(len(moves))], None)
    rng_limit = unit.spec.target_range
    per_move = []
    total = 0
    for move in moves:
        px, py = unit.pos if move is None else move
        in_range = [t.id for t in targets if abs(t.pos[0] - px) + abs(t.pos[1] - py) <= rng_limit]
        per_move.append(in_range)
        total += 1 + len(in_range)
    k = rng.randrange(total)
    for move, in_range in zip(moves, per_move):
        if k == 0:
            return UnitAction(unit.id, move, None)
        k -= 1
        if k < len(in_range):
            return UnitAction(unit.id, move, in_range[k])
        k -= len(in_range)
    raise AssertionError("unreachable")


def apply_action_unchecked(state: GameState, action: UnitAction) -> GameState:
    """Successor state, trusting that ``action`` is legal."""
    uid, move_to, target_id = action
    units = list(state.units)
    by_id = state.by_id
    actor = by_id[uid]
    idx = units.index(actor)
    if move_to is not None:
        actor = Unit(uid, actor.owner, actor.spec, move_to, actor.health)
        units[idx] = actor
    if target_id is not None:
        target = by_id[target_id]
        tidx = units.index(target)
        spec = actor.spec
        if spec.is_healer:
            hp = min(target.spec.max_health, target.health + spec.heal_strength)
            units[tidx] = Unit(target.id, target.owner, target.spec, target.pos, hp)
        else:
            hp = target.health - spec.attack_damage
            if hp <= 0:
                del units[tidx]
            else:
                units[tidx] = Unit(target.id, target.owner, target.spec, target.pos, hp)
    acted = state.acted | {uid}
    player = state.active_player
    turn = state.turn
    if all(u.id in acted for u in units if u.owner == player):
        acted = frozenset()
        if player == 1:
            turn += 1
        player = 1 - player
    return GameState(state.grid, units, turn, player, acted)


def apply_action(state: GameState, action: UnitAction) -> GameState:
    """Validated forward-model step; raises IllegalActionError for illegal actions."""
    if action not in legal_unit_actions(state, action.unit_id):
        raise IllegalActionError(f"action {action} is not legal in this state")
    return apply_action_unchecked(state, action)


def outcome(state: GameState) -> Outcome:
    kings = [False, False]
    for u in state.units:
        if u.spec.is_king:
            kings[u.owner] = True
    if not kings[1]:
        return Outcome.win(0)
    if not kings[0]:
        return Outcome.win(1)
    if state.turn >= MAX_TURNS:
        return DRAW
    return ONGOING


class ForwardModel:
    """Forward-model context that counts every state transition it performs."""

    def __init__(self) -> None:
        self.calls = 0

    def apply(self, state: GameState, action: UnitAction, validate: bool = True) -> GameState:
        nxt = apply_action(state, action) if validate else apply_action_unchecked(state, action)
        self.calls += 1
        return nxt
