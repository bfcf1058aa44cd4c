"""Independent reference implementations used only by the test suite.

Nothing here shares code with mjlab.hands: wins are checked by a direct global
recursion over the 34-kind vector, and shanten is computed as the swap distance
to tenpai.

Swap-distance argument: a hand h (13-tile equivalent) reaches tenpai in d swaps
iff there is a complete closed target W (the (4 - melds) sets + pair of some
winning hand) sharing m = |h| - d tiles with h, because each swap replaces one
non-target tile with one target tile and the last target tile is left to the
winning draw. Hence d = |h| - max_W overlap(h, W). A literal breadth-first
search over swaps computes the same number and is run where it is tractable
(distance <= 2) to cross-validate; the overlap maximum itself is found by a
dynamic program that builds W kind by kind, which stays fast at any distance.
"""

from collections import defaultdict

ORPHANS = (0, 8, 9, 17, 18, 26, 27, 28, 29, 30, 31, 32, 33)


def _cover(counts, melds_left, pair_left):
    """Exact cover of the remaining vector by runs/triplets and pair_left pairs."""
    try:
        k = next(i for i in range(34) if counts[i])
    except StopIteration:
        return melds_left == 0 and pair_left == 0
    if counts[k] >= 2 and pair_left:
        counts[k] -= 2
        if _cover(counts, melds_left, 0):
            counts[k] += 2
            return True
        counts[k] += 2
    if melds_left:
        if counts[k] >= 3:
            counts[k] -= 3
            if _cover(counts, melds_left - 1, pair_left):
                counts[k] += 3
                return True
            counts[k] += 3
        if k < 27 and k % 9 <= 6 and counts[k + 1] and counts[k + 2]:
            counts[k] -= 1
            counts[k + 1] -= 1
            counts[k + 2] -= 1
            if _cover(counts, melds_left - 1, pair_left):
                counts[k] += 1
                counts[k + 1] += 1
                counts[k + 2] += 1
                return True
            counts[k] += 1
            counts[k + 1] += 1
            counts[k + 2] += 1
    return False


def oracle_win(counts, n_melds=0):
    counts = list(counts)
    if _cover(counts, 4 - n_melds, 1):
        return True
    if n_melds:
        return False
    if sum(1 for c in counts if c == 2) == 7:
        return True
    if (
        all(counts[k] >= 1 for k in ORPHANS)
        and sum(counts[k] for k in ORPHANS) == 14
        and sum(counts) == 14
    ):
        return True
    return False


def _max_overlap_regular(counts, n_melds):
    """Max multiset overlap of counts with any (4 - n_melds) sets + pair target.

    DP state while scanning kinds: (sets used, pair used, runs started one kind
    back, runs started two kinds back); runs only start on ranks 1-7, so state
    collapses to (., ., 0, 0) at suit boundaries on its own.
    """
    need = 4 - n_melds
    states = {(0, 0, 0, 0): 0}
    for k in range(34):
        can_run = k < 27 and k % 9 <= 6
        nxt = defaultdict(lambda: -1)
        for (used, pair, x, y), val in states.items():
            for t in (0, 1):
                for pr in (0, 1) if not pair else (0,):
                    for n in range(0, 5):
                        if n and not can_run:
                            break
                        if used + t + n > need:
                            break
                        w = 3 * t + 2 * pr + x + y + n
                        if w > 4:
                            break
                        key = (used + t + n, pair | pr, y, n)
                        gain = val + min(counts[k], w)
                        if gain > nxt[key]:
                            nxt[key] = gain
        states = dict(nxt)
    return max(v for (u, pair, x, y), v in states.items() if pair)


def _max_overlap_chiitoi(counts):
    vals = sorted((min(c, 2) for c in counts), reverse=True)
    return sum(vals[:7])


def _max_overlap_kokushi(counts):
    base = sum(min(counts[k], 1) for k in ORPHANS)
    dup = 1 if any(counts[k] >= 2 for k in ORPHANS) else 0
    return base + dup


def oracle_shanten(counts, n_melds=0):
    """Swap distance to tenpai, -1 when the vector is already complete.

    The closed target has 14 - 3*n_melds tiles; keeping the overlap and
    swapping in the rest, minus the final winning draw, costs
    (13 - 3*n_melds) - overlap swaps. Works for 13- and 14-tile-equivalent
    vectors alike (a 14-tile hand's surplus tile never overlaps the target
    twice, so completeness lands exactly on -1).
    """
    base = 13 - 3 * n_melds
    best = base - _max_overlap_regular(counts, n_melds)
    if n_melds == 0:
        best = min(
            best,
            13 - _max_overlap_chiitoi(counts),
            13 - _max_overlap_kokushi(counts),
        )
    return best


def bfs_shanten(counts, n_melds=0, limit=2):
    """Literal breadth-first search over single-tile swaps until tenpai.
    Returns the distance if <= limit, else None. 13-tile vectors only."""

    def tenpai(vec):
        v = list(vec)
        for k in range(34):
            if v[k] == 4:
                continue
            v[k] += 1
            if oracle_win(v, n_melds):
                v[k] -= 1
                return True
            v[k] -= 1
        return False

    start = tuple(counts)
    if tenpai(start):
        return 0
    seen = {start}
    frontier = [start]
    for depth in range(1, limit + 1):
        nxt = []
        for vec in frontier:
            for rm in range(34):
                if vec[rm] == 0:
                    continue
                for add in range(34):
                    if add == rm or vec[add] == 4:
                        continue
                    child = list(vec)
                    child[rm] -= 1
                    child[add] += 1
                    tchild = tuple(child)
                    if tchild in seen:
                        continue
                    seen.add(tchild)
                    if tenpai(tchild):
                        return depth
                    nxt.append(tchild)
        frontier = nxt
    return None
