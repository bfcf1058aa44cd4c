"""Scripted deal construction for engine tests.

build_subgame lays out explicit hands, a draw order, and controlled dead-wall
slots; the rest of the 136-tile set pads the walls deterministically so every
scripted position is still a legal deal.
"""

from mjlab.rules import start_subgame
from mjlab.tiles import (
    AKA_KINDS,
    NUM_KINDS,
    TILES_PER_KIND,
    Tile,
    Wall,
    kind_from_name,
)


class DeckBuilder:
    """Hands out physical tiles by name, tracking copies so a scripted deal
    stays a permutation of the full tile set."""

    def __init__(self):
        self._used = [set() for _ in range(NUM_KINDS)]

    def take(self, name: str) -> Tile:
        kind = kind_from_name(name)
        if name[0] == "0":
            order = (0,)
        elif kind in AKA_KINDS:
            order = (1, 2, 3, 0)  # plain fives first; red only as last resort
        else:
            order = (0, 1, 2, 3)
        for c in order:
            if c not in self._used[kind]:
                self._used[kind].add(c)
                return Tile(kind, c)
        raise ValueError(f"no copies of {name} left")

    def take_all(self, names: str) -> list[Tile]:
        return [self.take(n) for n in names.split()]

    def rest(self) -> list[Tile]:
        out = []
        for kind in range(NUM_KINDS):
            for c in range(TILES_PER_KIND):
                if c not in self._used[kind]:
                    out.append(Tile(kind, c))
        return out


def build_deal(
    hands,
    draws: str = "",
    indicator: str = "W",
    replacements: str = "",
    ura: str = "",
    live_extra: bool = True,
):
    """The (wall, hands) pair build_subgame deals from, for callers that
    need the pre-deal layout (record headers spell walls out)."""
    deck = DeckBuilder()
    hand_tiles = [deck.take_all(h) for h in hands]
    draw_tiles = deck.take_all(draws) if draws else []
    repl = deck.take_all(replacements) if replacements else []
    ind = [deck.take(indicator)]
    ura_tiles = deck.take_all(ura) if ura else []
    rest = deck.rest()

    def pad(group, n):
        while len(group) < n:
            group.append(rest.pop(0))
        return group

    dead = pad(repl, 4) + pad(ind, 5) + pad(ura_tiles, 5)
    live = tuple(draw_tiles + (rest if live_extra else []))
    return Wall(live=live, dead=tuple(dead)), hand_tiles


def build_subgame(
    hands,
    draws: str = "",
    indicator: str = "W",
    replacements: str = "",
    ura: str = "",
    live_extra: bool = True,
    **kw,
):
    """hands: four 13-tile space-separated strings. draws: the live wall head
    in draw order (the dealer's automatic first draw is draws[0]). With
    live_extra False the live wall is exactly the scripted draws, which forces
    an exhaustive draw right after them."""
    wall, hand_tiles = build_deal(
        hands,
        draws=draws,
        indicator=indicator,
        replacements=replacements,
        ura=ura,
        live_extra=live_extra,
    )
    return start_subgame(wall, hand_tiles, **kw)
