"""Tile grids and the MovingAI ``.map`` reader."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

FLOOR_CHARS = frozenset(".GS")
BLOCKED_CHARS = frozenset("@OTW")

Pos = tuple[int, int]


class MapFormatError(ValueError):
    """Raised when a map file does not follow the MovingAI layout."""


class TileKind(enum.IntEnum):
    FLOOR = 0
    BLOCKED = 1


@dataclass(frozen=True)
class Grid:
    """Rectangular tile map; ``cells[y][x]`` addresses column x of row y."""

    width: int
    height: int
    cells: tuple[tuple[TileKind, ...], ...]
    _floor: frozenset[Pos] = field(init=False, repr=False, compare=False)
    _neighbors: dict = field(init=False, repr=False, compare=False, hash=False)
    _diamonds: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise MapFormatError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if len(self.cells) != self.height or any(len(row) != self.width for row in self.cells):
            raise MapFormatError("cells do not match declared width/height")
        floor = frozenset(
            (x, y)
            for y, row in enumerate(self.cells)
            for x, kind in enumerate(row)
            if kind == TileKind.FLOOR
        )
        object.__setattr__(self, "_floor", floor)
        neighbors = {}
        for x, y in floor:
            neighbors[(x, y)] = tuple(
                p for p in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)) if p in floor
            )
        object.__setattr__(self, "_neighbors", neighbors)
        object.__setattr__(self, "_diamonds", {})

    @classmethod
    def open(cls, width: int, height: int) -> Grid:
        return cls(width, height, tuple((TileKind.FLOOR,) * width for _ in range(height)))

    @classmethod
    def from_rows(cls, rows: list[str]) -> Grid:
        """Build a grid from body rows of map characters."""
        height = len(rows)
        width = len(rows[0]) if rows else 0
        cells = []
        for y, row in enumerate(rows):
            if len(row) != width:
                raise MapFormatError(f"row {y} has length {len(row)}, expected {width}")
            cells.append(tuple(_tile(ch, y) for ch in row))
        return cls(width, height, tuple(cells))

    @property
    def floor_cells(self) -> frozenset[Pos]:
        return self._floor

    @property
    def neighbors(self) -> dict[Pos, tuple[Pos, ...]]:
        """Floor neighbours of each floor cell, ordered +x, -x, +y, -y."""
        return self._neighbors

    def diamond(self, start: Pos, radius: int) -> tuple[tuple[Pos, int, tuple[Pos, ...]], ...]:
        """Terrain-only BFS region around ``start``, memoised.

        Entries are ``(tile, distance, predecessors)`` in BFS order, where
        predecessors are the tile's neighbours one step closer to ``start``.
        """
        key = (start, radius)
        cached = self._diamonds.get(key)
        if cached is not None:
            return cached
        dist = {start: 0}
        order = []
        frontier = [start]
        for d in range(1, radius + 1):
            nxt = []
            for cur in frontier:
                for n in self._neighbors.get(cur, ()):
                    if n not in dist:
                        dist[n] = d
                        nxt.append(n)
            order.extend(nxt)
            frontier = nxt
        out = tuple(
            (t, dist[t], tuple(p for p in self._neighbors[t] if dist.get(p) == dist[t] - 1)) for t in order
        )
        self._diamonds[key] = out
        return out

    def in_bounds(self, pos: Pos) -> bool:
        x, y = pos
        return 0 <= x < self.width and 0 <= y < self.height

    def is_floor(self, pos: Pos) -> bool:
        return pos in self._floor

    def distances_from(self, source: Pos) -> dict[Pos, int]:
        """4-neighbour BFS distances over floor cells, ignoring units."""
        floor = self._floor
        dist = {source: 0}
        queue = deque([source])
        while queue:
            x, y = cur = queue.popleft()
            d = dist[cur] + 1
            for nxt in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if nxt in floor and nxt not in dist:
                    dist[nxt] = d
                    queue.append(nxt)
        return dist

    def to_text(self) -> str:
        body = "\n".join("".join("." if k == TileKind.FLOOR else "@" for k in row) for row in self.cells)
        return f"type octile\nheight {self.height}\nwidth {self.width}\nmap\n{body}\n"


def _tile(ch: str, y: int) -> TileKind:
    if ch in FLOOR_CHARS:
        return TileKind.FLOOR
    if ch in BLOCKED_CHARS:
        return TileKind.BLOCKED
    raise MapFormatError(f"unknown map character {ch!r} in row {y}")


def _header_value(line: str, key: str) -> int:
    parts = line.split()
    if len(parts) != 2 or parts[0] != key:
        raise MapFormatError(f"expected '{key} <int>' header, got {line!r}")
    try:
        return int(parts[1])
    except ValueError:
        raise MapFormatError(f"non-integer {key} in header: {line!r}") from None


def load_map(text: str) -> Grid:
    """Parse a MovingAI ASCII map.

    The header is ``type <name>``, ``height H``, ``width W``, ``map``,
    followed by exactly H rows of W characters.
    """
    lines = text.splitlines()
    # trailing blank lines are common in the published files
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) < 4:
        raise MapFormatError("map header is incomplete")
    if not lines[0].startswith("type"):
        raise MapFormatError(f"expected 'type' header, got {lines[0]!r}")
    height = _header_value(lines[1], "height")
    width = _header_value(lines[2], "width")
    if lines[3].strip() != "map":
        raise MapFormatError(f"expected 'map' line, got {lines[3]!r}")
    body = [row.rstrip("\r") for row in lines[4:]]
    if len(body) != height:
        raise MapFormatError(f"header declares height {height} but body has {len(body)} rows")
    for y, row in enumerate(body):
        if len(row) != width:
            raise MapFormatError(f"row {y} has {len(row)} characters, header declares width {width}")
    return Grid.from_rows(body)


def read_map(path: str | Path) -> Grid:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(
            f"map file {path} not found; benchmark maps are not bundled, "
            "download them from the MovingAI benchmark site (see README)"
        )
    return load_map(path.read_text())
