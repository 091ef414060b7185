"""Kill The King: grid maps, unit archetypes, levels and the forward model."""

from .grid import Grid, MapFormatError, TileKind, load_map, read_map
from .levels import (
    LevelError,
    Placement,
    build_state,
    distinct_placements,
    generate_levels,
    load_level,
    parse_composition,
    random_placements,
    read_level,
)
from .rules import (
    ForwardModel,
    IllegalActionError,
    apply_action,
    apply_action_unchecked,
    enumerate_actions,
    legal_unit_actions,
    outcome,
    random_action,
    reachable_tiles,
)
from .state import DRAW, MAX_TURNS, ONGOING, GameState, Outcome, OutcomeKind, Unit, UnitAction
from .units import (
    DEFAULT_UNIT_TYPES,
    ActionType,
    GameConfigError,
    UnitTypeSpec,
    dump_game_config,
    load_game_config,
    read_game_config,
)
