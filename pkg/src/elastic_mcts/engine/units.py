"""Unit archetypes and the key-value game-config file."""

from __future__ import annotations

import configparser
import enum
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


class ActionType(str, enum.Enum):
    MOVE = "Move"
    ATTACK = "Attack"
    HEAL = "Heal"
    DO_NOTHING = "DoNothing"


UNIT_NAMES = ("King", "Warrior", "Archer", "Healer")
COMBAT_ACTIONS = frozenset({ActionType.MOVE, ActionType.ATTACK, ActionType.DO_NOTHING})
HEALER_ACTIONS = frozenset({ActionType.MOVE, ActionType.HEAL, ActionType.DO_NOTHING})


class GameConfigError(ValueError):
    pass


@dataclass(frozen=True)
class UnitTypeSpec:
    name: str
    max_health: int
    move_range: int
    attack_range: int = 0
    attack_damage: int = 0
    heal_range: int = 0
    heal_strength: int = 0
    # derived flags, stored as plain attributes because the rules read them in hot loops
    is_king: bool = field(init=False, repr=False, compare=False)
    is_healer: bool = field(init=False, repr=False, compare=False)
    target_range: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "is_king", self.name == "King")
        object.__setattr__(self, "is_healer", self.name == "Healer")
        object.__setattr__(self, "target_range", self.heal_range if self.is_healer else self.attack_range)
        if self.name not in UNIT_NAMES:
            raise GameConfigError(f"unknown unit type {self.name!r}")
        for attr in ("max_health", "move_range", "attack_range", "attack_damage", "heal_range", "heal_strength"):
            if getattr(self, attr) < 0:
                raise GameConfigError(f"{self.name}.{attr} must be >= 0")
        if self.max_health < 1:
            raise GameConfigError(f"{self.name}.max_health must be positive")
        if self.is_healer and (self.attack_range or self.attack_damage):
            raise GameConfigError("Healer cannot attack")
        if not self.is_healer and (self.heal_range or self.heal_strength):
            raise GameConfigError(f"{self.name} cannot heal")

    @property
    def action_types(self) -> frozenset[ActionType]:
        return HEALER_ACTIONS if self.is_healer else COMBAT_ACTIONS


DEFAULT_UNIT_TYPES = {
    "King": UnitTypeSpec("King", max_health=100, move_range=2, attack_range=2, attack_damage=20),
    "Warrior": UnitTypeSpec("Warrior", max_health=120, move_range=2, attack_range=1, attack_damage=30),
    "Archer": UnitTypeSpec("Archer", max_health=80, move_range=2, attack_range=4, attack_damage=20),
    "Healer": UnitTypeSpec("Healer", max_health=60, move_range=2, heal_range=2, heal_strength=20),
}

_INT_KEYS = ("max_health", "move_range", "attack_range", "attack_damage", "heal_range", "heal_strength")


def load_game_config(text: str) -> dict[str, UnitTypeSpec]:
    """Parse the attribute table, one ``[UnitName]`` section per type.

    Types missing from the file keep their default attributes; keys missing
    from a section fall back to that type's defaults as well.
    """
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise GameConfigError(str(exc)) from exc
    table = dict(DEFAULT_UNIT_TYPES)
    for section in parser.sections():
        if section not in UNIT_NAMES:
            raise GameConfigError(f"unknown unit type section [{section}]")
        unknown = set(parser[section]) - set(_INT_KEYS)
        if unknown:
            raise GameConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
        base = DEFAULT_UNIT_TYPES[section]
        values = {key: getattr(base, key) for key in _INT_KEYS}
        for key in parser[section]:
            try:
                values[key] = parser.getint(section, key)
            except ValueError:
                raise GameConfigError(f"[{section}] {key} must be an integer") from None
        table[section] = UnitTypeSpec(section, **values)
    return table


def read_game_config(path: str | Path | None = None) -> dict[str, UnitTypeSpec]:
    if path is None:
        text = resources.files("elastic_mcts.data").joinpath("killtheking.ini").read_text()
    else:
        text = Path(path).read_text()
    return load_game_config(text)


def dump_game_config(table: dict[str, UnitTypeSpec]) -> str:
    lines = []
    for name in UNIT_NAMES:
        spec = table[name]
        lines.append(f"[{name}]")
        lines.extend(f"{key} = {getattr(spec, key)}" for key in _INT_KEYS)
        lines.append("")
    return "\n".join(lines)
