"""Level files (unit placements on a map) and seeded level generation."""

from __future__ import annotations

import os
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

from .grid import Grid, Pos, read_map
from .state import GameState, Unit
from .units import DEFAULT_UNIT_TYPES, UnitTypeSpec


class LevelError(ValueError):
    pass


@dataclass(frozen=True)
class Placement:
    player: int
    type_name: str
    pos: Pos

    def line(self) -> str:
        return f"{self.player} {self.type_name} {self.pos[0]} {self.pos[1]}"


def parse_placements(text: str) -> tuple[Optional[str], list[Placement]]:
    """Split a level file into its ``map`` reference and placement lines."""
    map_ref = None
    placements = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "map":
            if len(parts) != 2:
                raise LevelError(f"line {lineno}: expected 'map <path>'")
            map_ref = parts[1]
            continue
        if len(parts) != 4:
            raise LevelError(f"line {lineno}: expected '<player> <TypeName> <x> <y>', got {line!r}")
        try:
            player, x, y = int(parts[0]), int(parts[2]), int(parts[3])
        except ValueError:
            raise LevelError(f"line {lineno}: non-integer field in {line!r}") from None
        placements.append(Placement(player, parts[1], (x, y)))
    return map_ref, placements


def build_state(
    grid: Grid,
    placements: list[Placement],
    unit_types: Mapping[str, UnitTypeSpec] = DEFAULT_UNIT_TYPES,
) -> GameState:
    """Validate placements and produce the turn-0 state; unit ids follow file order."""
    seen: set[Pos] = set()
    kings = [0, 0]
    units = []
    for uid, p in enumerate(placements):
        if p.player not in (0, 1):
            raise LevelError(f"player index must be 0 or 1, got {p.player}")
        spec = unit_types.get(p.type_name)
        if spec is None:
            raise LevelError(f"unknown unit type {p.type_name!r}")
        if not grid.in_bounds(p.pos):
            raise LevelError(f"placement {p.line()!r} is out of bounds")
        if not grid.is_floor(p.pos):
            raise LevelError(f"placement {p.line()!r} is on a blocked cell")
        if p.pos in seen:
            raise LevelError(f"two units placed on {p.pos}")
        seen.add(p.pos)
        if spec.is_king:
            kings[p.player] += 1
        units.append(Unit(uid, p.player, spec, p.pos, spec.max_health))
    for player, count in enumerate(kings):
        if count != 1:
            raise LevelError(f"player {player} has {count} kings, expected exactly 1")
    return GameState(grid, units)


def load_level(text: str, grid: Grid, unit_types: Mapping[str, UnitTypeSpec] = DEFAULT_UNIT_TYPES) -> GameState:
    _, placements = parse_placements(text)
    return build_state(grid, placements, unit_types)


def read_level(path: str | Path, unit_types: Mapping[str, UnitTypeSpec] = DEFAULT_UNIT_TYPES) -> GameState:
    """Load a level file together with the map it references (relative to the level)."""
    path = Path(path)
    text = path.read_text()
    map_ref, placements = parse_placements(text)
    if map_ref is None:
        raise LevelError(f"{path}: missing 'map <path>' line")
    map_path = Path(map_ref)
    if not map_path.is_absolute():
        map_path = path.parent / map_path
    return build_state(read_map(map_path), placements, unit_types)


_COMPOSITION_RE = re.compile(r"(\d*)([KWAH])")
_LETTER_TO_TYPE = {"K": "King", "W": "Warrior", "A": "Archer", "H": "Healer"}


def parse_composition(spec: str) -> list[str]:
    """Expand an army code such as ``K1W1A1H``, ``KWAH`` or ``K10W`` into type names.

    A count precedes the letter it multiplies; a bare letter counts once.
    """
    spec = spec.strip().upper()
    pos = 0
    names: list[str] = []
    while pos < len(spec):
        m = _COMPOSITION_RE.match(spec, pos)
        if m is None:
            raise LevelError(f"cannot parse army composition {spec!r}")
        count = int(m.group(1)) if m.group(1) else 1
        names.extend([_LETTER_TO_TYPE[m.group(2)]] * count)
        pos = m.end()
    if names.count("King") != 1:
        raise LevelError(f"composition {spec!r} must contain exactly one King")
    return names


def random_placements(grid: Grid, composition: list[str], rng: random.Random) -> list[Placement]:
    """Seeded, collision-free placements; player 0 on the left half, player 1 on the right."""
    half = grid.width // 2
    floor = sorted(grid.floor_cells)
    sides = ([p for p in floor if p[0] < half], [p for p in floor if p[0] >= grid.width - half])
    placements = []
    for player, cells in enumerate(sides):
        if len(cells) < len(composition):
            raise LevelError(
                f"player {player}'s half has {len(cells)} floor cells, {len(composition)} units requested"
            )
        taken: set[Pos] = set()
        for name in composition:
            while True:
                pos = cells[rng.randrange(len(cells))]
                if pos not in taken:
                    break
            taken.add(pos)
            placements.append(Placement(player, name, pos))
    return placements


def level_text(map_ref: str, placements: list[Placement]) -> str:
    return "\n".join([f"map {map_ref}", *(p.line() for p in placements)]) + "\n"


def distinct_placements(grid: Grid, names: list[str], count: int, rng: random.Random) -> list[list[Placement]]:
    """``count`` pairwise different random placements of ``names`` for both players."""
    seen: set[tuple] = set()
    out: list[list[Placement]] = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 100 * count + 100:
            raise LevelError("could not generate enough distinct levels on this map")
        placements = random_placements(grid, names, rng)
        signature = tuple(p.line() for p in placements)
        if signature not in seen:
            seen.add(signature)
            out.append(placements)
    return out


def generate_levels(
    map_path: str | Path,
    composition: str,
    count: int,
    seed: int,
    out_dir: str | Path,
    prefix: Optional[str] = None,
) -> list[Path]:
    """Write ``count`` distinct level files placing ``composition`` for both players."""
    map_path = Path(map_path)
    grid = read_map(map_path)
    names = parse_composition(composition)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = prefix or f"{map_path.stem}_{composition.upper()}"
    map_ref = os.path.relpath(map_path.resolve(), out_dir.resolve())
    paths = []
    for i, placements in enumerate(distinct_placements(grid, names, count, random.Random(seed))):
        path = out_dir / f"{prefix}_{i:03d}.level"
        path.write_text(level_text(map_ref, placements))
        paths.append(path)
    return paths

