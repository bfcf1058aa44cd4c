"""Tile identity, notation, melds, walls, and dora derivation.

Kind indexing is fixed across the whole package: 0-8 = 1m-9m, 9-17 = 1p-9p,
18-26 = 1s-9s, 27-33 = East, South, West, North, Haku, Hatsu, Chun. A physical
tile is (kind, copy) with copy 0-3; copy 0 of each five is the red five.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

NUM_KINDS = 34
TILES_PER_KIND = 4
TOTAL_TILES = NUM_KINDS * TILES_PER_KIND

MAN, PIN, SOU, HONORS = 0, 1, 2, 3

EAST, SOUTH, WEST, NORTH = 27, 28, 29, 30
HAKU, HATSU, CHUN = 31, 32, 33

# One red five per suit, conventionally the first physical copy.
AKA_KINDS = (4, 13, 22)

_HONOR_NAMES = ("E", "S", "W", "N", "Hk", "Ht", "Ch")

KIND_NAMES = tuple(
    f"{r}{s}" for s in "mps" for r in range(1, 10)
) + _HONOR_NAMES

_NAME_TO_KIND = {name: k for k, name in enumerate(KIND_NAMES)}
# Red fives get their own notation.
_NAME_TO_KIND["0m"] = 4
_NAME_TO_KIND["0p"] = 13
_NAME_TO_KIND["0s"] = 22

DEAD_WALL_SIZE = 14
LIVE_WALL_SIZE = 70
MAX_DORA_INDICATORS = 5

# Dead wall slots: 4 replacement draws, then 5 dora indicators, then 5 ura.
_REPLACEMENT_SLOTS = range(0, 4)
_INDICATOR_SLOTS = range(4, 9)
_URA_SLOTS = range(9, 14)


def suit_of(kind: int) -> int:
    """0=man, 1=pin, 2=sou, 3=honors."""
    return min(kind // 9, 3)


def rank_of(kind: int) -> int:
    """1-9 for suited kinds, 1-7 for honors."""
    return kind % 9 + 1 if kind < 27 else kind - 27 + 1


def is_honor(kind: int) -> bool:
    return kind >= 27


def is_terminal(kind: int) -> bool:
    return kind < 27 and kind % 9 in (0, 8)


def is_orphan(kind: int) -> bool:
    """Terminal or honor (the kokushi tile set)."""
    return is_honor(kind) or is_terminal(kind)


ORPHAN_KINDS = tuple(k for k in range(NUM_KINDS) if is_orphan(k))


def kind_from_name(name: str) -> int:
    try:
        return _NAME_TO_KIND[name]
    except KeyError:
        raise ValueError(f"unknown tile name {name!r}") from None


@dataclass(frozen=True, order=True)
class Tile:
    kind: int
    copy: int

    def __post_init__(self):
        if not 0 <= self.kind < NUM_KINDS:
            raise ValueError(f"kind out of range: {self.kind}")
        if not 0 <= self.copy < TILES_PER_KIND:
            raise ValueError(f"copy out of range: {self.copy}")

    @property
    def aka(self) -> bool:
        return self.copy == 0 and self.kind in AKA_KINDS

    @property
    def name(self) -> str:
        if self.aka:
            return "0" + KIND_NAMES[self.kind][1]
        return KIND_NAMES[self.kind]

    def __repr__(self):
        return f"Tile({self.name}#{self.copy})"


def tile_from_text(text: str) -> Tile:
    """Parse notation like '7p', '0s' (red five), 'E'. Copy is the first
    physical copy consistent with the notation; use records-level machinery
    when exact copies matter."""
    kind = kind_from_name(text)
    if text[0] == "0":
        return Tile(kind, 0)
    if kind in AKA_KINDS:
        return Tile(kind, 1)
    return Tile(kind, 0)


def full_tile_set() -> tuple[Tile, ...]:
    return tuple(Tile(k, c) for k in range(NUM_KINDS) for c in range(TILES_PER_KIND))


def sort_hand(tiles) -> tuple[Tile, ...]:
    """Kind order; within a kind red fives sort after plain copies."""
    return tuple(sorted(tiles, key=lambda t: (t.kind, t.aka, t.copy)))


def dora_from_indicator(kind: int) -> int:
    """Next kind in the indicator loop: 9 wraps to 1 within its suit, North
    wraps to East, Chun wraps to Haku."""
    if kind < 27:
        base = (kind // 9) * 9
        return base + (kind - base + 1) % 9
    if kind < 31:
        return EAST + (kind - EAST + 1) % 4
    return HAKU + (kind - HAKU + 1) % 3


PON, CHI, OPEN_KAN, CLOSED_KAN, ADDED_KAN = (
    "pon", "chi", "open_kan", "closed_kan", "added_kan",
)
MELD_TYPES = (PON, CHI, OPEN_KAN, CLOSED_KAN, ADDED_KAN)


@dataclass(frozen=True)
class Meld:
    """An exposed (or closed-kan) tile group.

    called_from is the discarder's seat relative to the caller (1 = right,
    2 = across, 3 = left), None for a closed kan. called_tile is the claimed
    discard, or the added tile for an added kan, None for a closed kan.
    """

    meld_type: str
    tiles: tuple[Tile, ...]
    called_from: int | None
    called_tile: Tile | None

    def __post_init__(self):
        if self.meld_type not in MELD_TYPES:
            raise ValueError(f"bad meld type {self.meld_type!r}")
        n = len(self.tiles)
        if self.meld_type in (PON, CHI):
            if n != 3:
                raise ValueError(f"{self.meld_type} needs 3 tiles, got {n}")
        elif n != 4:
            raise ValueError(f"{self.meld_type} needs 4 tiles, got {n}")
        kinds = sorted(t.kind for t in self.tiles)
        if self.meld_type == CHI:
            lo = kinds[0]
            if lo >= 27 or lo % 9 > 6 or kinds != [lo, lo + 1, lo + 2]:
                raise ValueError(f"not a run: {self.tiles}")
        elif len(set(kinds)) != 1:
            raise ValueError(f"not a same-kind group: {self.tiles}")
        if self.meld_type == CLOSED_KAN:
            if self.called_from is not None or self.called_tile is not None:
                raise ValueError("closed kan has no call source")
        elif self.meld_type == ADDED_KAN:
            if self.called_from not in (1, 2, 3):
                raise ValueError("added kan keeps the pon call source")
        else:
            if self.called_from not in (1, 2, 3):
                raise ValueError(f"called_from must be 1-3, got {self.called_from}")
            if self.called_tile is None or self.called_tile not in self.tiles:
                raise ValueError("called tile must be one of the meld tiles")
        if self.meld_type == CHI and self.called_from != 3:
            raise ValueError("chi only claims from the left seat")

    @property
    def kind(self) -> int:
        """Lowest kind in the group (the kind itself for same-kind groups)."""
        return min(t.kind for t in self.tiles)

    def tile_kinds(self) -> tuple[int, ...]:
        return tuple(sorted(t.kind for t in self.tiles))


@dataclass(frozen=True)
class Wall:
    """Live draw pile plus the 14-tile dead wall.

    The dead wall is a fixed layout: slots 0-3 are kan replacement draws,
    4-8 dora indicators, 9-13 uradora (aligned with the indicator slots).
    Replacement draws refill the dead wall from the live tail, so it stays at
    14 tiles while live tiles remain.
    """

    live: tuple[Tile, ...]
    dead: tuple[Tile, ...]
    dora_indicator_count: int = 1

    def __post_init__(self):
        if len(self.dead) > DEAD_WALL_SIZE:
            raise ValueError(f"dead wall over {DEAD_WALL_SIZE}: {len(self.dead)}")
        if not 1 <= self.dora_indicator_count <= MAX_DORA_INDICATORS:
            raise ValueError(f"bad indicator count {self.dora_indicator_count}")

    def indicators(self) -> tuple[Tile, ...]:
        return tuple(
            self.dead[i]
            for i in list(_INDICATOR_SLOTS)[: self.dora_indicator_count]
        )

    def ura_indicators(self) -> tuple[Tile, ...]:
        return tuple(
            self.dead[i] for i in list(_URA_SLOTS)[: self.dora_indicator_count]
        )

    def dora_kinds(self) -> tuple[int, ...]:
        return tuple(dora_from_indicator(t.kind) for t in self.indicators())


def shuffle_and_build_walls(seed: int):
    """Deterministic deal for one subgame.

    Returns (wall, hands, first_draw): four 13-tile hands, the wall with the
    dealer's first draw still at the head of the live pile, and that tile.
    Uses stdlib random.Random (MT19937) seeded with the 64-bit seed.
    """
    rng = random.Random(seed)
    tiles = list(full_tile_set())
    rng.shuffle(tiles)
    hands = tuple(sort_hand(tiles[s * 13:(s + 1) * 13]) for s in range(4))
    dead = tuple(tiles[52:52 + DEAD_WALL_SIZE])
    live = tuple(tiles[52 + DEAD_WALL_SIZE:])
    assert len(live) == LIVE_WALL_SIZE
    return Wall(live=live, dead=dead), hands, live[0]
