"""Immutable game-state value types for Kill The King."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

from .grid import Grid, Pos
from .units import UnitTypeSpec

MAX_TURNS = 100


class Unit(NamedTuple):
    id: int
    owner: int
    spec: UnitTypeSpec
    pos: Pos
    health: int


class UnitAction(NamedTuple):
    """One unit's decision: optional move, then optional attack/heal target.

    ``move_to=None`` means the unit stays; ``UnitAction(uid)`` is DoNothing.
    """

    unit_id: int
    move_to: Optional[Pos] = None
    target_id: Optional[int] = None

    @property
    def is_do_nothing(self) -> bool:
        return self.move_to is None and self.target_id is None

    def __str__(self) -> str:
        if self.is_do_nothing:
            return f"u{self.unit_id}:noop"
        parts = [f"u{self.unit_id}"]
        if self.move_to is not None:
            parts.append(f"move{self.move_to[0]},{self.move_to[1]}")
        if self.target_id is not None:
            parts.append(f"target{self.target_id}")
        return ":".join(parts)


class OutcomeKind(enum.Enum):
    ONGOING = "ongoing"
    WIN = "win"
    DRAW = "draw"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    winner: Optional[int] = None

    @classmethod
    def win(cls, player: int) -> Outcome:
        return cls(OutcomeKind.WIN, player)

    @property
    def is_terminal(self) -> bool:
        return self.kind is not OutcomeKind.ONGOING

    def __str__(self) -> str:
        if self.kind is OutcomeKind.WIN:
            return f"win{self.winner}"
        return self.kind.value


ONGOING = Outcome(OutcomeKind.ONGOING)
DRAW = Outcome(OutcomeKind.DRAW)


class GameState:
    """Board snapshot. Treated as immutable; the forward model returns new states.

    ``units`` is kept sorted by id, which is also the engine's unit order.
    ``acted`` holds ids of the active player's units that already acted
    this turn.
    """

    __slots__ = ("grid", "units", "turn", "active_player", "acted", "_by_id", "_occupied")

    def __init__(
        self,
        grid: Grid,
        units: Iterable[Unit],
        turn: int = 0,
        active_player: int = 0,
        acted: frozenset[int] = frozenset(),
    ) -> None:
        self.grid = grid
        self.units = tuple(units)
        self.turn = turn
        self.active_player = active_player
        self.acted = acted
        self._by_id: Optional[dict[int, Unit]] = None
        self._occupied: Optional[dict[Pos, Unit]] = None

    @property
    def by_id(self) -> dict[int, Unit]:
        if self._by_id is None:
            self._by_id = {u.id: u for u in self.units}
        return self._by_id

    @property
    def occupied(self) -> dict[Pos, Unit]:
        if self._occupied is None:
            self._occupied = {u.pos: u for u in self.units}
        return self._occupied

    def unit(self, unit_id: int) -> Optional[Unit]:
        return self.by_id.get(unit_id)

    def units_of(self, player: int) -> list[Unit]:
        return [u for u in self.units if u.owner == player]

    def king_of(self, player: int) -> Optional[Unit]:
        for u in self.units:
            if u.owner == player and u.spec.is_king:
                return u
        return None

    def unacted_units(self) -> list[Unit]:
        """Active player's living units that have not acted this turn."""
        p, acted = self.active_player, self.acted
        return [u for u in self.units if u.owner == p and u.id not in acted]

    def key(self) -> tuple:
        """Canonical serialization used for equality and hashing."""
        return (
            self.turn,
            self.active_player,
            tuple(sorted(self.acted)),
            tuple((u.id, u.owner, u.spec.name, u.pos, u.health) for u in self.units),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GameState):
            return NotImplemented
        return self.grid == other.grid and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        units = ", ".join(f"{u.id}:{u.spec.name[0]}{u.owner}@{u.pos}hp{u.health}" for u in self.units)
        return f"GameState(turn={self.turn}, active={self.active_player}, acted={sorted(self.acted)}, units=[{units}])"
