"""Hand analysis on 34-kind count vectors: wins, shanten, waits, decompositions.

The regular-hand routines split the vector into the three suits plus honors and
memoize per-suit partition tables, so repeated queries inside a game are cheap.
Count vectors are plain sequences of 34 ints; melds are counted only by number,
their tiles live outside the vector.
"""

from __future__ import annotations

from functools import lru_cache

from .tiles import NUM_KINDS, ORPHAN_KINDS

_SUIT_SLICES = (slice(0, 9), slice(9, 18), slice(18, 27))


def counts_from_kinds(kinds) -> list[int]:
    counts = [0] * NUM_KINDS
    for k in kinds:
        counts[k] += 1
    return counts


def counts_from_tiles(tiles) -> list[int]:
    return counts_from_kinds(t.kind for t in tiles)


@lru_cache(maxsize=None)
def _suit_exact(counts: tuple) -> frozenset:
    """All (sets, pairs) exactly covering a 9-kind suit segment with runs,
    triplets, and at most one pair. Empty set means no exact cover."""
    i = next((j for j in range(9) if counts[j]), None)
    if i is None:
        return frozenset({(0, 0)})
    out = set()
    c = list(counts)
    if c[i] >= 3:
        c[i] -= 3
        out.update((s + 1, p) for s, p in _suit_exact(tuple(c)))
        c[i] += 3
    if c[i] >= 2:
        c[i] -= 2
        out.update((s, 1) for s, p in _suit_exact(tuple(c)) if p == 0)
        c[i] += 2
    if i <= 6 and c[i + 1] and c[i + 2]:
        c[i] -= 1
        c[i + 1] -= 1
        c[i + 2] -= 1
        out.update((s + 1, p) for s, p in _suit_exact(tuple(c)))
        c[i] += 1
        c[i + 1] += 1
        c[i + 2] += 1
    return frozenset(out)


def _honor_exact(counts: tuple) -> frozenset:
    sets = pairs = 0
    for c in counts:
        if c == 0:
            continue
        if c == 3:
            sets += 1
        elif c == 2:
            pairs += 1
        else:
            return frozenset()
    return frozenset({(sets, pairs)})


def _regular_win(counts, n_melds: int) -> bool:
    need = 4 - n_melds
    combos = {(0, 0)}
    for sl in _SUIT_SLICES:
        opts = _suit_exact(tuple(counts[sl]))
        if not opts:
            return False
        combos = {
            (s + s2, p + p2)
            for s, p in combos
            for s2, p2 in opts
            if p + p2 <= 1
        }
        if not combos:
            return False
    opts = _honor_exact(tuple(counts[27:]))
    if not opts:
        return False
    (hs, hp), = opts
    return any(s + hs == need and p + hp == 1 for s, p in combos)


def is_chiitoi(counts) -> bool:
    return sum(1 for c in counts if c == 2) == 7


def is_kokushi(counts) -> bool:
    if any(counts[k] for k in range(NUM_KINDS) if k not in ORPHAN_KINDS):
        return False
    present = [counts[k] for k in ORPHAN_KINDS]
    return all(c >= 1 for c in present) and sum(present) == 14


def is_winning_counts(counts, n_melds: int = 0) -> bool:
    """14-tile completeness (counts cover 14 - 3*n_melds closed tiles)."""
    if _regular_win(counts, n_melds):
        return True
    if n_melds == 0:
        return is_chiitoi(counts) or is_kokushi(counts)
    return False


def is_winning_hand(closed_tiles, melds, winning_tile) -> bool:
    """closed_tiles includes winning_tile; melds contribute 3 tiles each to the
    notional 14 (kans hold a fourth physical tile)."""
    n_melds = len(melds)
    if len(closed_tiles) != 14 - 3 * n_melds:
        raise ValueError(
            f"closed hand has {len(closed_tiles)} tiles with {n_melds} melds"
        )
    if winning_tile not in closed_tiles:
        raise ValueError("winning tile not in the closed hand")
    return is_winning_counts(counts_from_tiles(closed_tiles), n_melds)


def _pareto(pairs):
    out = []
    for s, p in sorted(pairs, reverse=True):
        if not any(s2 >= s and p2 >= p for s2, p2 in out):
            out.append((s, p))
    return out


@lru_cache(maxsize=None)
def _suit_frontier(counts: tuple) -> tuple:
    """Pareto-optimal (sets, partials) decompositions of a suit segment;
    leftover tiles float. Partials are pairs and two-tile run stubs."""
    i = next((j for j in range(9) if counts[j]), None)
    if i is None:
        return ((0, 0),)
    out = set()
    c = list(counts)
    c[i] -= 1
    out.update(_suit_frontier(tuple(c)))
    c[i] += 1
    if c[i] >= 3:
        c[i] -= 3
        out.update((s + 1, p) for s, p in _suit_frontier(tuple(c)))
        c[i] += 3
    if c[i] >= 2:
        c[i] -= 2
        out.update((s, p + 1) for s, p in _suit_frontier(tuple(c)))
        c[i] += 2
    if i <= 6 and c[i + 1] and c[i + 2]:
        c[i] -= 1
        c[i + 1] -= 1
        c[i + 2] -= 1
        out.update((s + 1, p) for s, p in _suit_frontier(tuple(c)))
        c[i] += 1
        c[i + 1] += 1
        c[i + 2] += 1
    if i <= 7 and c[i + 1]:
        c[i] -= 1
        c[i + 1] -= 1
        out.update((s, p + 1) for s, p in _suit_frontier(tuple(c)))
        c[i] += 1
        c[i + 1] += 1
    if i <= 6 and c[i + 2]:
        c[i] -= 1
        c[i + 2] -= 1
        out.update((s, p + 1) for s, p in _suit_frontier(tuple(c)))
        c[i] += 1
        c[i + 2] += 1
    return tuple(_pareto(out))


def _honor_frontier(counts: tuple) -> tuple:
    sets = sum(1 for c in counts if c >= 3)
    pairs = sum(1 for c in counts if c == 2)
    return ((sets, pairs),)


def _best_block_value(counts, need: int) -> int:
    """max(2*sets + partials) with sets + partials <= need."""
    frontier = {(0, 0)}
    for sl in _SUIT_SLICES:
        opts = _suit_frontier(tuple(counts[sl]))
        frontier = {
            (min(s + s2, need), min(p + p2, need))
            for s, p in frontier
            for s2, p2 in opts
        }
        frontier = set(_pareto(frontier))
    (hs, hp), = _honor_frontier(tuple(counts[27:]))
    best = 0
    for s, p in frontier:
        s2 = min(s + hs, need)
        p2 = min(p + hp, need - s2)
        best = max(best, 2 * s2 + p2)
    return best


def _regular_shanten(counts, n_melds: int) -> int:
    need = 4 - n_melds
    best = 2 * need - _best_block_value(counts, need)
    c = list(counts)
    for k in range(NUM_KINDS):
        if c[k] >= 2:
            c[k] -= 2
            value = 1 + _best_block_value(c, need)
            c[k] += 2
            best = min(best, 2 * need - value)
    return best


def chiitoi_shanten(counts) -> int:
    pairs = sum(1 for c in counts if c >= 2)
    kinds = sum(1 for c in counts if c >= 1)
    return 6 - pairs + max(0, 7 - kinds)


def kokushi_shanten(counts) -> int:
    kinds = sum(1 for k in ORPHAN_KINDS if counts[k] >= 1)
    has_pair = any(counts[k] >= 2 for k in ORPHAN_KINDS)
    return 13 - kinds - (1 if has_pair else 0)


def shanten_counts(counts, n_melds: int = 0) -> int:
    """Minimum of the regular, seven-pairs and orphans formulations.
    -1 means complete, 0 tenpai. Accepts 13- or 14-tile-equivalent vectors."""
    total = sum(counts)
    if total not in (13 - 3 * n_melds, 14 - 3 * n_melds):
        raise ValueError(f"bad closed-hand size {total} with {n_melds} melds")
    best = _regular_shanten(counts, n_melds)
    if n_melds == 0:
        best = min(best, chiitoi_shanten(counts), kokushi_shanten(counts))
    return best


def shanten(tiles, melds=()) -> int:
    return shanten_counts(counts_from_tiles(tiles), len(melds))


def waits_counts(counts, n_melds: int = 0) -> tuple[int, ...]:
    """Kinds completing a 13-tile-equivalent hand. Empty if not tenpai."""
    out = []
    c = list(counts)
    for k in range(NUM_KINDS):
        if c[k] >= 4:
            continue
        c[k] += 1
        if is_winning_counts(c, n_melds):
            out.append(k)
        c[k] -= 1
    return tuple(out)


@lru_cache(maxsize=None)
def _suit_parts(counts: tuple) -> tuple:
    """All exact partitions of a suit segment into named groups.
    Each entry is (groups, pair_rank): groups is a sorted tuple of
    ("run", lo) / ("trip", r) with suit-local ranks."""
    i = next((j for j in range(9) if counts[j]), None)
    if i is None:
        return (((), None),)
    out = set()
    c = list(counts)
    if c[i] >= 3:
        c[i] -= 3
        for groups, pair in _suit_parts(tuple(c)):
            out.add((tuple(sorted(groups + (("trip", i),))), pair))
        c[i] += 3
    if c[i] >= 2:
        c[i] -= 2
        for groups, pair in _suit_parts(tuple(c)):
            if pair is None:
                out.add((groups, i))
        c[i] += 2
    if i <= 6 and c[i + 1] and c[i + 2]:
        c[i] -= 1
        c[i + 1] -= 1
        c[i + 2] -= 1
        for groups, pair in _suit_parts(tuple(c)):
            out.add((tuple(sorted(groups + (("run", i),))), pair))
        c[i] += 1
        c[i + 1] += 1
        c[i + 2] += 1
    return tuple(sorted(out))


def regular_decompositions(counts, n_melds: int = 0):
    """Full partitions of a complete closed hand: list of
    (groups, pair_kind) with groups a tuple of ("run", lo_kind) or
    ("trip", kind) in absolute kind numbering."""
    need = 4 - n_melds
    partials = [[] for _ in range(4)]
    for part, sl in enumerate(_SUIT_SLICES):
        base = sl.start
        for groups, pair in _suit_parts(tuple(counts[sl])):
            partials[part].append((
                tuple((g, lo + base) for g, lo in groups),
                None if pair is None else pair + base,
            ))
    hsets, hp = [], None
    for k in range(27, NUM_KINDS):
        c = counts[k]
        if c == 0:
            continue
        if c == 3:
            hsets.append(("trip", k))
        elif c == 2:
            if hp is not None:
                return []
            hp = k
        else:
            return []
    partials[3].append((tuple(hsets), hp))
    out = []
    for g0, p0 in partials[0]:
        for g1, p1 in partials[1]:
            for g2, p2 in partials[2]:
                for g3, p3 in partials[3]:
                    pairs = [p for p in (p0, p1, p2, p3) if p is not None]
                    groups = g0 + g1 + g2 + g3
                    if len(pairs) == 1 and len(groups) == need:
                        out.append((groups, pairs[0]))
    return out


def clear_caches():
    _suit_exact.cache_clear()
    _suit_frontier.cache_clear()
    _suit_parts.cache_clear()
