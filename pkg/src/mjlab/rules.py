"""Four-player riichi game engine.

GameState is an immutable value; apply() validates the action against
legal_actions() and returns the successor state. Turn flow: after a discard,
claimants are asked one at a time in priority order (ron candidates
counterclockwise from the discarder, then the pon/kan holder, then chi); when
everyone passes, the next seat's draw happens automatically inside apply.

Scoring uses a deliberately compact rule set: flat han values, fu from the
20-base ladder rounded up to 10 (pinfu fixed at 30, seven pairs at 25), the
standard limit ladder above 2000 base points. Furiten and rarer yaku are out
of scope; README lists every simplification.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

from . import hands as hd
from .tiles import (
    CHUN,
    EAST,
    HAKU,
    HATSU,
    NUM_KINDS,
    SOUTH,
    Meld,
    Tile,
    Wall,
    dora_from_indicator,
    is_honor,
    is_orphan,
    shuffle_and_build_walls,
    sort_hand,
)

AWAITING_DRAW = "awaiting_draw"
AWAITING_DISCARD = "awaiting_discard"
AWAITING_CALLS = "awaiting_calls"
SUBGAME_OVER = "subgame_over"
GAME_OVER = "game_over"

STARTING_SCORE = 25000
RIICHI_STICK = 1000
HONBA_RON = 300
HONBA_TSUMO_EACH = 100
NOTEN_POOL = 3000
MAX_SUBGAMES = 40

DRAGON_KINDS = (HAKU, HATSU, CHUN)

YAKUMAN_HAN = 13

_CHI_SHAPES = {"low": (1, 2), "mid": (-1, 1), "high": (-2, -1)}


class IllegalActionError(Exception):
    """Raised by apply() when the action is not in legal_actions()."""


@dataclass(frozen=True)
class Ruleset:
    aka: bool = True
    open_tanyao: bool = True
    last_kyoku: int = 8  # 8 = East+South, 4 = East only


class DiscardEntry(NamedTuple):
    tile: Tile
    riichi: bool
    called: bool


@dataclass(frozen=True)
class Action:
    type: str
    tile: Tile | None = None
    kind: int | None = None
    variant: str | None = None

    @classmethod
    def discard(cls, tile):
        return cls("discard", tile=tile)

    @classmethod
    def riichi(cls, tile):
        return cls("riichi", tile=tile)

    @classmethod
    def pon(cls):
        return cls("pon")

    @classmethod
    def chi(cls, variant):
        return cls("chi", variant=variant)

    @classmethod
    def open_kan(cls):
        return cls("open_kan")

    @classmethod
    def closed_kan(cls, kind):
        return cls("closed_kan", kind=kind)

    @classmethod
    def added_kan(cls, kind):
        return cls("added_kan", kind=kind)

    @classmethod
    def tsumo(cls):
        return cls("tsumo")

    @classmethod
    def ron(cls):
        return cls("ron")

    @classmethod
    def pass_(cls):
        return cls("pass")


class WinResult(NamedTuple):
    yaku: tuple[tuple[str, int], ...]
    dora_han: int
    han: int
    fu: int
    points_delta: tuple[int, int, int, int]


@dataclass(frozen=True)
class TableView:
    """Everything one seat may see. Opponent indices are relative:
    0 = self, 1 = right (shimocha), 2 = across, 3 = left (kamicha)."""

    viewer: int
    hand: tuple[Tile, ...]
    drawn: Tile | None
    melds: tuple[tuple[Meld, ...], ...]
    discards: tuple[tuple[DiscardEntry, ...], ...]
    riichi: tuple[bool, bool, bool, bool]
    dora_indicators: tuple[int, ...]
    round_wind: int
    seat_wind: int
    kyoku: int
    honba: int
    riichi_pot: int
    scores: tuple[int, int, int, int]
    ranks: tuple[int, int, int, int]
    wall_count: int
    history: tuple["TableView", ...] = ()


@dataclass(frozen=True)
class GameState:
    ruleset: Ruleset
    seed: int
    subgame_index: int
    kyoku: int  # 1..last_kyoku, East 1 = 1
    honba: int
    riichi_pot: int
    dealer: int
    scores: tuple[int, int, int, int]
    hands: tuple[tuple[Tile, ...], ...]
    melds: tuple[tuple[Meld, ...], ...]
    discards: tuple[tuple[DiscardEntry, ...], ...]
    wall: Wall
    phase: str
    current_actor: int
    drawn: Tile | None
    riichi_turns: tuple[int | None, int | None, int | None, int | None]
    ippatsu: tuple[bool, bool, bool, bool]
    turn: int
    kan_counts: tuple[int, int, int, int]
    replacements_used: int
    kuikae_kind: int | None
    pending_discard: tuple[int, Tile] | None
    claim_queue: tuple[tuple[int, frozenset], ...]
    events: tuple[dict, ...]
    settle: tuple | None  # (next_dealer, next_kyoku, next_honba) at subgame end

    @property
    def round_wind(self) -> int:
        return EAST if self.kyoku <= 4 else SOUTH

    def seat_wind(self, seat: int) -> int:
        return EAST + (seat - self.dealer) % 4

    def counts(self, seat: int) -> list[int]:
        return hd.counts_from_tiles(self.hands[seat])


def ranks_of(state: GameState) -> tuple[int, int, int, int]:
    """1..4 per seat by score; ties go to the seat closest after the dealer."""
    order = sorted(range(4), key=lambda s: (-state.scores[s], (s - state.dealer) % 4))
    out = [0, 0, 0, 0]
    for pos, s in enumerate(order):
        out[s] = pos + 1
    return tuple(out)


def observe(state: GameState, seat: int, history: tuple = ()) -> TableView:
    rel = [(seat + i) % 4 for i in range(4)]
    ranks = ranks_of(state)
    return TableView(
        viewer=seat,
        hand=state.hands[seat],
        drawn=state.drawn if state.current_actor == seat else None,
        melds=tuple(state.melds[s] for s in rel),
        discards=tuple(state.discards[s] for s in rel),
        riichi=tuple(state.riichi_turns[s] is not None for s in rel),
        dora_indicators=tuple(t.kind for t in state.wall.indicators()),
        round_wind=state.round_wind,
        seat_wind=state.seat_wind(seat),
        kyoku=state.kyoku,
        honba=state.honba,
        riichi_pot=state.riichi_pot,
        scores=tuple(state.scores[s] for s in rel),
        ranks=tuple(ranks[s] for s in rel),
        wall_count=len(state.wall.live),
        history=history,
    )


class HistoryKeeper:
    """Collects each seat's views at its own discard decisions so later views
    can carry them as history (most recent first)."""

    def __init__(self, depth: int = 6):
        self.depth = depth
        self._past: list[list[TableView]] = [[], [], [], []]

    def view(self, state: GameState, seat: int) -> TableView:
        past = self._past[seat]
        return observe(state, seat, history=tuple(reversed(past[-self.depth:])))

    def record(self, state: GameState, seat: int) -> TableView:
        """Call at the seat's own discard decision, before it acts."""
        view = self.view(state, seat)
        self._past[seat].append(observe(state, seat))
        if len(self._past[seat]) > self.depth:
            del self._past[seat][0]
        return view


# ---------------------------------------------------------------- tiles/text


def _name(tile: Tile) -> str:
    return tile.name


def _names(tiles) -> list[str]:
    return [t.name for t in tiles]


def _meld_event(meld: Meld) -> dict:
    return {
        "type": meld.meld_type,
        "tiles": _names(meld.tiles),
        "from": meld.called_from,
        "called": meld.called_tile.name if meld.called_tile else None,
    }


def _pick(hand, kind: int, n: int, prefer_plain: bool = True) -> list[Tile]:
    """Choose n copies of kind from hand, plain copies before red fives."""
    pool = [t for t in hand if t.kind == kind]
    pool.sort(key=lambda t: (t.aka, t.copy) if prefer_plain else (not t.aka, t.copy))
    if len(pool) < n:
        raise IllegalActionError(f"hand lacks {n} copies of kind {kind}")
    return pool[:n]


def _without(hand, tiles) -> tuple[Tile, ...]:
    rest = list(hand)
    for t in tiles:
        rest.remove(t)
    return tuple(rest)


def _discard_rep(hand, kind: int, aka: bool) -> Tile | None:
    for t in sort_hand(hand):
        if t.kind == kind and t.aka == aka:
            return t
    return None


# ---------------------------------------------------------------- legality


def _menzen(state: GameState, seat: int) -> bool:
    return all(m.meld_type == "closed_kan" for m in state.melds[seat])


def _riichi_declared(state: GameState, seat: int) -> bool:
    return state.riichi_turns[seat] is not None


def _closed_kan_keeps_waits(state: GameState, seat: int, kind: int) -> bool:
    counts = state.counts(seat)
    n_melds = len(state.melds[seat])
    before = list(counts)
    before[state.drawn.kind] -= 1
    waits_before = hd.waits_counts(before, n_melds)
    after = list(counts)
    after[kind] -= 4
    waits_after = hd.waits_counts(after, n_melds + 1)
    return waits_before == waits_after


def _kan_capacity(state: GameState) -> bool:
    return sum(state.kan_counts) < 4 and len(state.wall.live) >= 1


def legal_actions(state: GameState, seat: int) -> frozenset:
    if state.phase == AWAITING_DISCARD and seat == state.current_actor:
        return _own_turn_actions(state, seat)
    if (
        state.phase == AWAITING_CALLS
        and state.claim_queue
        and state.claim_queue[0][0] == seat
    ):
        return state.claim_queue[0][1] | {Action.pass_()}
    return frozenset()


def _own_turn_actions(state: GameState, seat: int) -> frozenset:
    acts = set()
    hand = state.hands[seat]
    counts = state.counts(seat)
    n_melds = len(state.melds[seat])
    declared = _riichi_declared(state, seat)

    if declared:
        # hand is locked: discard the draw, or win/kan with it
        acts.add(Action.discard(state.drawn))
    else:
        options = {}
        for t in sort_hand(hand):
            options.setdefault((t.kind, t.aka), t)
        reps = list(options.values())
        if state.kuikae_kind is not None:
            unbanned = [t for t in reps if t.kind != state.kuikae_kind]
            if unbanned:  # the ban lifts if nothing else is discardable
                reps = unbanned
        acts.update(Action.discard(t) for t in reps)

    if state.drawn is not None and hd.is_winning_counts(counts, n_melds):
        if _evaluate_win(state, seat, state.drawn, by_tsumo=True) is not None:
            acts.add(Action.tsumo())

    if state.drawn is not None and _kan_capacity(state):
        for kind in range(NUM_KINDS):
            if counts[kind] == 4:
                if declared:
                    if state.drawn.kind != kind:
                        continue
                    if not _closed_kan_keeps_waits(state, seat, kind):
                        continue
                acts.add(Action.closed_kan(kind))
        if not declared:
            pon_kinds = {m.kind for m in state.melds[seat] if m.meld_type == "pon"}
            for kind in pon_kinds:
                if counts[kind] >= 1:
                    acts.add(Action.added_kan(kind))

    if (
        not declared
        and state.drawn is not None
        and _menzen(state, seat)
        and state.scores[seat] >= RIICHI_STICK
        and len(state.wall.live) >= 4
        and hd.shanten_counts(counts, n_melds) <= 0
    ):
        seen = set()
        for t in hand:
            key = (t.kind, t.aka)
            if key in seen:
                continue
            seen.add(key)
            after = list(counts)
            after[t.kind] -= 1
            if hd.shanten_counts(after, n_melds) == 0:
                acts.add(Action.riichi(_discard_rep(hand, t.kind, t.aka)))
    return frozenset(acts)


def _claim_offers(state: GameState, discarder: int, tile: Tile) -> tuple:
    """Ordered (seat, options) queue for one discard. Ron candidates come
    first in counterclockwise order (head bump), then pon/kan, then chi."""
    queue: list[tuple[int, set]] = []
    by_seat: dict[int, set] = {}

    def offer(seat, action):
        if seat not in by_seat:
            by_seat[seat] = set()
            queue.append((seat, by_seat[seat]))
        by_seat[seat].add(action)

    live = len(state.wall.live)
    for i in (1, 2, 3):
        s = (discarder + i) % 4
        counts = state.counts(s)
        n_melds = len(state.melds[s])
        if hd.shanten_counts(counts, n_melds) == 0:
            if tile.kind in hd.waits_counts(counts, n_melds):
                if _evaluate_win(state, s, tile, by_tsumo=False) is not None:
                    offer(s, Action.ron())
    for i in (1, 2, 3):
        s = (discarder + i) % 4
        if _riichi_declared(state, s) or live < 1 or len(state.melds[s]) >= 4:
            continue
        count = state.counts(s)[tile.kind]
        if count >= 2:
            offer(s, Action.pon())
            if count >= 3 and sum(state.kan_counts) < 4:
                offer(s, Action.open_kan())
    s = (discarder + 1) % 4
    if (
        not is_honor(tile.kind)
        and not _riichi_declared(state, s)
        and live >= 1
        and len(state.melds[s]) < 4
    ):
        counts = state.counts(s)
        rank = tile.kind % 9
        for variant, (a, b) in _CHI_SHAPES.items():
            ra, rb = rank + a, rank + b
            if 0 <= ra <= 8 and 0 <= rb <= 8:
                ka, kb = tile.kind + a, tile.kind + b
                if counts[ka] >= 1 and counts[kb] >= 1:
                    offer(s, Action.chi(variant))
    return tuple((s, frozenset(opts)) for s, opts in queue)


# ---------------------------------------------------------------- scoring


def _flat_yaku(groups, pair, counts, melds, ctx) -> list[tuple[str, int]]:
    """Yaku for one regular decomposition. groups holds closed groups only;
    melds contribute their own."""
    yaku = []
    if ctx["riichi"]:
        yaku.append(("riichi", 1))
        if ctx["ippatsu"]:
            yaku.append(("ippatsu", 1))
    if ctx["tsumo"] and ctx["menzen"]:
        yaku.append(("menzen_tsumo", 1))

    meld_groups = []
    for m in melds:
        if m.meld_type == "chi":
            meld_groups.append(("run", m.kind, m))
        else:
            meld_groups.append(("trip", m.kind, m))
    all_groups = [(g, k, None) for g, k in groups] + meld_groups

    win = ctx["win_kind"]
    if (
        ctx["menzen"]
        and all(g == "run" for g, _, _ in all_groups)
        and len(all_groups) == 4
        and pair not in DRAGON_KINDS
        and pair not in (ctx["round_wind"], ctx["seat_wind"])
    ):
        ryanmen = any(
            g == "run"
            and (
                (win == k and k % 9 <= 5)
                or (win == k + 2 and k % 9 >= 1)
            )
            for g, k, _ in all_groups
        )
        if ryanmen:
            yaku.append(("pinfu", 1))

    kinds_used = [k for k in range(NUM_KINDS) if counts[k]]
    for m in melds:
        kinds_used.extend(m.tile_kinds())
    if all(not is_orphan(k) for k in kinds_used):
        if ctx["menzen"] or ctx["open_tanyao"]:
            yaku.append(("tanyao", 1))

    for g, k, _ in all_groups:
        if g == "trip":
            if k in DRAGON_KINDS:
                yaku.append(("yakuhai", 1))
            if k == ctx["round_wind"]:
                yaku.append(("yakuhai", 1))
            if k == ctx["seat_wind"]:
                yaku.append(("yakuhai", 1))

    if all(g == "trip" for g, _, _ in all_groups):
        yaku.append(("toitoi", 2))

    suits = {k // 9 for k in kinds_used if k < 27}
    has_honor = any(k >= 27 for k in kinds_used)
    if len(suits) == 1:
        yaku.append(("honitsu", 3) if has_honor else ("chinitsu", 6))
    return yaku


def _fu_for(groups, pair, melds, ctx) -> int:
    fu = 20
    win = ctx["win_kind"]
    ron_trip_spent = False
    for g, k in groups:
        if g != "trip":
            continue
        closed_triplet = True
        # a triplet completed by the ron tile counts as open
        if not ctx["tsumo"] and k == win and not ron_trip_spent:
            closed_triplet = False
            ron_trip_spent = True
        base = 8 if is_orphan(k) else 4
        fu += base if closed_triplet else base // 2
    for m in melds:
        if m.meld_type == "chi":
            continue
        base = 4 if is_orphan(m.kind) else 2
        if m.meld_type == "pon":
            fu += base
        elif m.meld_type == "closed_kan":
            fu += base * 8
        else:
            fu += base * 4
    if pair in DRAGON_KINDS or pair in (ctx["round_wind"], ctx["seat_wind"]):
        fu += 2
    if ctx["tsumo"]:
        fu += 2
    elif ctx["menzen"]:
        fu += 10
    return -(-fu // 10) * 10


def _evaluate_win(state: GameState, seat: int, win_tile: Tile, by_tsumo: bool):
    """(yaku, fu) for the best reading of the completed hand, or None when it
    carries no yaku. For ron the tile is notionally added to the hand."""
    counts = state.counts(seat)
    if not by_tsumo:
        counts[win_tile.kind] += 1
    melds = state.melds[seat]
    n_melds = len(melds)
    menzen = _menzen(state, seat)
    ctx = {
        "menzen": menzen,
        "tsumo": by_tsumo,
        "riichi": _riichi_declared(state, seat),
        "ippatsu": state.ippatsu[seat],
        "round_wind": state.round_wind,
        "seat_wind": state.seat_wind(seat),
        "win_kind": win_tile.kind,
        "open_tanyao": state.ruleset.open_tanyao,
    }

    best = None
    if n_melds == 0 and hd.is_kokushi(counts):
        return ([("kokushi", YAKUMAN_HAN)], 30)
    if n_melds == 0 and hd.is_chiitoi(counts):
        yaku = [("chiitoitsu", 2)]
        if ctx["riichi"]:
            yaku.insert(0, ("riichi", 1))
            if ctx["ippatsu"]:
                yaku.insert(1, ("ippatsu", 1))
        if by_tsumo:
            yaku.append(("menzen_tsumo", 1))
        if all(not is_orphan(k) for k in range(NUM_KINDS) if counts[k]):
            yaku.append(("tanyao", 1))
        suits = {k // 9 for k in range(NUM_KINDS) if counts[k] and k < 27}
        has_honor = any(counts[k] for k in range(27, NUM_KINDS))
        if len(suits) == 1:
            yaku.append(("honitsu", 3) if has_honor else ("chinitsu", 6))
        elif len(suits) == 0 and has_honor:
            yaku.append(("honitsu", 3))
        best = (yaku, 25)

    for groups, pair in hd.regular_decompositions(counts, n_melds):
        yaku = _flat_yaku(groups, pair, counts, melds, ctx)
        if not yaku:
            continue
        if any(y == "pinfu" for y, _ in yaku):
            fu = 30
        else:
            fu = _fu_for(groups, pair, melds, ctx)
        if best is None or (
            sum(h for _, h in yaku),
            fu,
        ) > (sum(h for _, h in best[0]), best[1]):
            best = (sorted(yaku), fu)
    if best is None:
        return None
    return (list(best[0]), best[1])


def _dora_han(state: GameState, seat: int, win_tile: Tile, by_tsumo: bool) -> int:
    tiles = list(state.hands[seat])
    if not by_tsumo:
        tiles.append(win_tile)
    for m in state.melds[seat]:
        tiles.extend(m.tiles)
    dora_kinds = list(state.wall.dora_kinds())
    if _riichi_declared(state, seat):
        dora_kinds += [
            dora_from_indicator(t.kind) for t in state.wall.ura_indicators()
        ]
    han = sum(dora_kinds.count(t.kind) for t in tiles)
    if state.ruleset.aka:
        han += sum(1 for t in tiles if t.aka)
    return han


_LIMITS = ((13, 8000), (11, 6000), (8, 4000), (6, 3000))


def _base_points(han: int, fu: int) -> int:
    for threshold, base in _LIMITS:
        if han >= threshold:
            return base
    return min(fu * 2 ** (2 + han), 2000)


def _round100(x: int) -> int:
    return -(-x // 100) * 100


def score_win(state: GameState, winner: int, win_tile: Tile, by_tsumo: bool,
              discarder: int | None = None) -> WinResult:
    evaluated = _evaluate_win(state, winner, win_tile, by_tsumo)
    if evaluated is None:
        raise IllegalActionError("winning hand has no yaku")
    yaku, fu = evaluated
    dora = _dora_han(state, winner, win_tile, by_tsumo)
    han = sum(h for _, h in yaku) + dora
    base = _base_points(han, fu)
    delta = [0, 0, 0, 0]
    dealer_win = winner == state.dealer
    if by_tsumo:
        for s in range(4):
            if s == winner:
                continue
            if dealer_win or s == state.dealer:
                owed = _round100(base * 2)
            else:
                owed = _round100(base)
            owed += HONBA_TSUMO_EACH * state.honba
            delta[s] -= owed
            delta[winner] += owed
    else:
        owed = _round100(base * (6 if dealer_win else 4))
        owed += HONBA_RON * state.honba
        delta[discarder] -= owed
        delta[winner] += owed
    delta[winner] += state.riichi_pot * RIICHI_STICK
    return WinResult(tuple(yaku), dora, han, fu, tuple(delta))


# ---------------------------------------------------------------- transitions


def _mix_seed(seed: int, index: int) -> int:
    return (seed * 6364136223846793005 + index * 0x9E3779B97F4A7C15 + 1) % (1 << 63)


def wall_for_subgame(seed: int, subgame_index: int):
    """The (wall, hands, first_draw) a seeded game deals at this index."""
    return shuffle_and_build_walls(_mix_seed(seed, subgame_index))


def _next_wall_tile(state: GameState):
    return state.wall.live[0] if state.wall.live else None


def new_game(seed: int, ruleset: Ruleset = Ruleset()) -> GameState:
    state = GameState(
        ruleset=ruleset,
        seed=seed,
        subgame_index=0,
        kyoku=1,
        honba=0,
        riichi_pot=0,
        dealer=0,
        scores=(STARTING_SCORE,) * 4,
        hands=((),) * 4,
        melds=((),) * 4,
        discards=((),) * 4,
        wall=Wall(live=(Tile(0, 0),), dead=(), dora_indicator_count=1),
        phase=AWAITING_DRAW,
        current_actor=0,
        drawn=None,
        riichi_turns=(None,) * 4,
        ippatsu=(False,) * 4,
        turn=0,
        kan_counts=(0,) * 4,
        replacements_used=0,
        kuikae_kind=None,
        pending_discard=None,
        claim_queue=(),
        events=(),
        settle=None,
    )
    return _deal(state)


def _deal(state: GameState, wall: Wall | None = None,
          hands: tuple | None = None) -> GameState:
    if wall is None:
        wall, hands, _ = wall_for_subgame(state.seed, state.subgame_index)
    events = [
        {
            "t": "deal",
            "hands": [_names(h) for h in hands],
            "indicator": wall.indicators()[0].name,
        }
    ]
    state = replace(
        state,
        hands=tuple(sort_hand(h) for h in hands),
        melds=((),) * 4,
        discards=((),) * 4,
        wall=wall,
        phase=AWAITING_DRAW,
        current_actor=state.dealer,
        drawn=None,
        riichi_turns=(None,) * 4,
        ippatsu=(False,) * 4,
        turn=0,
        kan_counts=(0,) * 4,
        replacements_used=0,
        kuikae_kind=None,
        pending_discard=None,
        claim_queue=(),
        events=(),
        settle=None,
    )
    return _draw_for(state, state.dealer, events)


def start_subgame(
    wall: Wall,
    hands,
    *,
    ruleset: Ruleset = Ruleset(),
    kyoku: int = 1,
    honba: int = 0,
    riichi_pot: int = 0,
    dealer: int | None = None,
    scores: tuple = (STARTING_SCORE,) * 4,
    seed: int = 0,
    subgame_index: int = 0,
) -> GameState:
    """Deal one subgame from explicit walls (ingested logs, scripted play)."""
    if dealer is None:
        dealer = (kyoku - 1) % 4
    scaffold = GameState(
        ruleset=ruleset,
        seed=seed,
        subgame_index=subgame_index,
        kyoku=kyoku,
        honba=honba,
        riichi_pot=riichi_pot,
        dealer=dealer,
        scores=tuple(scores),
        hands=((),) * 4,
        melds=((),) * 4,
        discards=((),) * 4,
        wall=wall,
        phase=AWAITING_DRAW,
        current_actor=dealer,
        drawn=None,
        riichi_turns=(None,) * 4,
        ippatsu=(False,) * 4,
        turn=0,
        kan_counts=(0,) * 4,
        replacements_used=0,
        kuikae_kind=None,
        pending_discard=None,
        claim_queue=(),
        events=(),
        settle=None,
    )
    return _deal(scaffold, wall=wall, hands=hands)


def _draw_for(state: GameState, seat: int, events: list) -> GameState:
    if not state.wall.live:
        return _exhaustive_draw(state, events)
    tile = state.wall.live[0]
    wall = replace(state.wall, live=state.wall.live[1:])
    hands = list(state.hands)
    hands[seat] = sort_hand(hands[seat] + (tile,))
    events.append({"t": "draw", "seat": seat, "tile": tile.name})
    return replace(
        state,
        wall=wall,
        hands=tuple(hands),
        phase=AWAITING_DISCARD,
        current_actor=seat,
        drawn=tile,
        turn=state.turn + 1,
        kuikae_kind=None,
        pending_discard=None,
        claim_queue=(),
        events=tuple(events),
    )


def _exhaustive_draw(state: GameState, events: list) -> GameState:
    tenpai = tuple(
        hd.shanten_counts(state.counts(s), len(state.melds[s])) == 0
        for s in range(4)
    )
    n = sum(tenpai)
    delta = [0, 0, 0, 0]
    if 0 < n < 4:
        for s in range(4):
            delta[s] = NOTEN_POOL // n if tenpai[s] else -(NOTEN_POOL // (4 - n))
    scores = tuple(a + b for a, b in zip(state.scores, delta))
    events.append({"t": "draw_end", "tenpai": list(tenpai), "delta": delta})
    dealer_keeps = tenpai[state.dealer]
    next_dealer = state.dealer if dealer_keeps else (state.dealer + 1) % 4
    next_kyoku = state.kyoku if dealer_keeps else state.kyoku + 1
    return replace(
        state,
        scores=scores,
        phase=SUBGAME_OVER,
        drawn=None,
        events=tuple(events),
        settle=(next_dealer, next_kyoku, state.honba + 1),
    )


def _abort_four_kans(state: GameState, events: list) -> GameState:
    events.append(
        {"t": "draw_end", "tenpai": None, "delta": [0, 0, 0, 0],
         "reason": "four_kans"}
    )
    return replace(
        state,
        phase=SUBGAME_OVER,
        events=tuple(events),
        settle=(state.dealer, state.kyoku, state.honba + 1),
    )


def apply(state: GameState, seat: int, action: Action) -> GameState:
    legal = legal_actions(state, seat)
    if action not in legal:
        raise IllegalActionError(
            f"seat {seat} may not {action.type} in phase {state.phase}"
        )
    handler = _HANDLERS[action.type]
    return handler(state, seat, action)


def _apply_discard(state: GameState, seat: int, action: Action) -> GameState:
    events = []
    declaring = action.type == "riichi"
    tile = action.tile
    if declaring:
        events.append({"t": "riichi", "seat": seat})
        scores = list(state.scores)
        scores[seat] -= RIICHI_STICK
        riichi_turns = list(state.riichi_turns)
        riichi_turns[seat] = state.turn
        ippatsu = list(state.ippatsu)
        ippatsu[seat] = True
        state = replace(
            state,
            scores=tuple(scores),
            riichi_pot=state.riichi_pot + 1,
            riichi_turns=tuple(riichi_turns),
            ippatsu=tuple(ippatsu),
        )
    elif state.ippatsu[seat]:
        # discarding again after the declaration ends the window
        ippatsu = list(state.ippatsu)
        ippatsu[seat] = False
        state = replace(state, ippatsu=tuple(ippatsu))

    hands = list(state.hands)
    hands[seat] = _without(hands[seat], [tile])
    tsumogiri = state.drawn is not None and tile == state.drawn
    entry = DiscardEntry(tile, declaring, False)
    discards = list(state.discards)
    discards[seat] = discards[seat] + (entry,)
    events.append(
        {
            "t": "discard",
            "seat": seat,
            "tile": tile.name,
            "tsumogiri": tsumogiri,
            "riichi": declaring,
        }
    )
    state = replace(
        state,
        hands=tuple(hands),
        discards=tuple(discards),
        drawn=None,
        kuikae_kind=None,
    )
    offers = _claim_offers(state, seat, tile)
    if offers:
        return replace(
            state,
            phase=AWAITING_CALLS,
            pending_discard=(seat, tile),
            claim_queue=offers,
            current_actor=offers[0][0],
            events=tuple(events),
        )
    return _draw_for(state, (seat + 1) % 4, events)


def _apply_pass(state: GameState, seat: int, action: Action) -> GameState:
    queue = state.claim_queue[1:]
    if queue:
        return replace(
            state,
            claim_queue=queue,
            current_actor=queue[0][0],
            events=(),
        )
    discarder, _ = state.pending_discard
    state = replace(state, claim_queue=(), pending_discard=None)
    return _draw_for(state, (discarder + 1) % 4, [])


def _mark_called(state: GameState, discarder: int) -> GameState:
    discards = list(state.discards)
    entries = list(discards[discarder])
    entries[-1] = entries[-1]._replace(called=True)
    discards[discarder] = tuple(entries)
    return replace(state, discards=tuple(discards))


def _clear_ippatsu(state: GameState) -> GameState:
    return replace(state, ippatsu=(False,) * 4)


def _apply_pon(state: GameState, seat: int, action: Action) -> GameState:
    discarder, tile = state.pending_discard
    own = _pick(state.hands[seat], tile.kind, 2)
    meld = Meld(
        "pon",
        tuple(sorted(own + [tile], key=lambda t: (t.aka, t.copy))),
        called_from=(discarder - seat) % 4,
        called_tile=tile,
    )
    state = _mark_called(state, discarder)
    state = _clear_ippatsu(state)
    hands = list(state.hands)
    hands[seat] = _without(hands[seat], own)
    melds = list(state.melds)
    melds[seat] = melds[seat] + (meld,)
    events = [{"t": "call", "seat": seat, "meld": _meld_event(meld)}]
    return replace(
        state,
        hands=tuple(hands),
        melds=tuple(melds),
        phase=AWAITING_DISCARD,
        current_actor=seat,
        drawn=None,
        kuikae_kind=tile.kind,
        pending_discard=None,
        claim_queue=(),
        events=tuple(events),
    )


def _apply_chi(state: GameState, seat: int, action: Action) -> GameState:
    discarder, tile = state.pending_discard
    a, b = _CHI_SHAPES[action.variant]
    own = [
        _pick(state.hands[seat], tile.kind + a, 1)[0],
        _pick(state.hands[seat], tile.kind + b, 1)[0],
    ]
    meld = Meld(
        "chi",
        tuple(sorted(own + [tile], key=lambda t: t.kind)),
        called_from=3,
        called_tile=tile,
    )
    state = _mark_called(state, discarder)
    state = _clear_ippatsu(state)
    hands = list(state.hands)
    hands[seat] = _without(hands[seat], own)
    melds = list(state.melds)
    melds[seat] = melds[seat] + (meld,)
    events = [{"t": "call", "seat": seat, "meld": _meld_event(meld)}]
    return replace(
        state,
        hands=tuple(hands),
        melds=tuple(melds),
        phase=AWAITING_DISCARD,
        current_actor=seat,
        drawn=None,
        kuikae_kind=tile.kind,
        pending_discard=None,
        claim_queue=(),
        events=tuple(events),
    )


def _reveal_indicator(state: GameState, events: list) -> GameState:
    count = state.wall.dora_indicator_count + 1
    wall = replace(state.wall, dora_indicator_count=count)
    events.append({"t": "new_dora", "indicator": wall.indicators()[-1].name})
    return replace(state, wall=wall)


def _rinshan_draw(state: GameState, seat: int, events: list) -> GameState:
    slot = state.replacements_used
    tile = state.wall.dead[slot]
    dead = list(state.wall.dead)
    live = state.wall.live
    # kans need a live tile left, so the refill that keeps the indicator
    # slots in place is always available
    dead[slot] = live[-1]
    live = live[:-1]
    wall = replace(state.wall, live=live, dead=tuple(dead))
    hands = list(state.hands)
    hands[seat] = sort_hand(hands[seat] + (tile,))
    events.append({"t": "draw", "seat": seat, "tile": tile.name})
    return replace(
        state,
        wall=wall,
        hands=tuple(hands),
        replacements_used=state.replacements_used + 1,
        drawn=tile,
        phase=AWAITING_DISCARD,
        current_actor=seat,
        turn=state.turn + 1,
    )


def _finish_kan(state: GameState, seat: int, events: list) -> GameState:
    kan_counts = list(state.kan_counts)
    kan_counts[seat] += 1
    state = replace(state, kan_counts=tuple(kan_counts))
    state = _clear_ippatsu(state)
    state = _reveal_indicator(state, events)
    state = _rinshan_draw(state, seat, events)
    if sum(state.kan_counts) == 4 and sum(1 for k in state.kan_counts if k) >= 2:
        return _abort_four_kans(state, events)
    return replace(state, events=tuple(events), kuikae_kind=None,
                   pending_discard=None, claim_queue=())


def _apply_closed_kan(state: GameState, seat: int, action: Action) -> GameState:
    own = _pick(state.hands[seat], action.kind, 4)
    meld = Meld("closed_kan", tuple(own), called_from=None, called_tile=None)
    hands = list(state.hands)
    hands[seat] = _without(hands[seat], own)
    melds = list(state.melds)
    melds[seat] = melds[seat] + (meld,)
    events = [{"t": "call", "seat": seat, "meld": _meld_event(meld)}]
    state = replace(state, hands=tuple(hands), melds=tuple(melds), drawn=None)
    return _finish_kan(state, seat, events)


def _apply_added_kan(state: GameState, seat: int, action: Action) -> GameState:
    added = _pick(state.hands[seat], action.kind, 1)[0]
    melds = list(state.melds)
    new_seat_melds = []
    upgraded = None
    for m in melds[seat]:
        if m.meld_type == "pon" and m.kind == action.kind and upgraded is None:
            upgraded = Meld(
                "added_kan",
                tuple(sorted(m.tiles + (added,), key=lambda t: (t.aka, t.copy))),
                called_from=m.called_from,
                called_tile=m.called_tile,
            )
            new_seat_melds.append(upgraded)
        else:
            new_seat_melds.append(m)
    melds[seat] = tuple(new_seat_melds)
    hands = list(state.hands)
    hands[seat] = _without(hands[seat], [added])
    events = [{"t": "call", "seat": seat, "meld": _meld_event(upgraded)}]
    state = replace(state, hands=tuple(hands), melds=tuple(melds), drawn=None)
    return _finish_kan(state, seat, events)


def _apply_open_kan(state: GameState, seat: int, action: Action) -> GameState:
    discarder, tile = state.pending_discard
    own = _pick(state.hands[seat], tile.kind, 3)
    meld = Meld(
        "open_kan",
        tuple(sorted(own + [tile], key=lambda t: (t.aka, t.copy))),
        called_from=(discarder - seat) % 4,
        called_tile=tile,
    )
    state = _mark_called(state, discarder)
    hands = list(state.hands)
    hands[seat] = _without(hands[seat], own)
    melds = list(state.melds)
    melds[seat] = melds[seat] + (meld,)
    events = [{"t": "call", "seat": seat, "meld": _meld_event(meld)}]
    state = replace(state, hands=tuple(hands), melds=tuple(melds), drawn=None)
    return _finish_kan(state, seat, events)


def _settle_win(state: GameState, winner: int, result: WinResult,
                events: list, win_tile: Tile, by_tsumo: bool,
                discarder: int | None) -> GameState:
    scores = tuple(a + b for a, b in zip(state.scores, result.points_delta))
    event = {
        "t": "win",
        "seat": winner,
        "from": discarder,
        "tile": win_tile.name,
        "yaku": [list(y) for y in result.yaku],
        "dora": result.dora_han,
        "han": result.han,
        "fu": result.fu,
        "delta": list(result.points_delta),
    }
    if _riichi_declared(state, winner):
        event["ura"] = _names(state.wall.ura_indicators())
    events.append(event)
    dealer_won = winner == state.dealer
    if dealer_won:
        settle = (state.dealer, state.kyoku, state.honba + 1)
    else:
        settle = ((state.dealer + 1) % 4, state.kyoku + 1, 0)
    return replace(
        state,
        scores=scores,
        riichi_pot=0,
        phase=SUBGAME_OVER,
        events=tuple(events),
        settle=settle,
    )


def _apply_tsumo(state: GameState, seat: int, action: Action) -> GameState:
    result = score_win(state, seat, state.drawn, by_tsumo=True)
    return _settle_win(state, seat, result, [], state.drawn, True, None)


def _apply_ron(state: GameState, seat: int, action: Action) -> GameState:
    discarder, tile = state.pending_discard
    result = score_win(state, seat, tile, by_tsumo=False, discarder=discarder)
    state = _mark_called(state, discarder)
    hands = list(state.hands)
    hands[seat] = sort_hand(hands[seat] + (tile,))
    state = replace(state, hands=tuple(hands), pending_discard=None,
                    claim_queue=())
    return _settle_win(state, seat, result, [], tile, False, discarder)


_HANDLERS = {
    "discard": _apply_discard,
    "riichi": _apply_discard,
    "pass": _apply_pass,
    "pon": _apply_pon,
    "chi": _apply_chi,
    "open_kan": _apply_open_kan,
    "closed_kan": _apply_closed_kan,
    "added_kan": _apply_added_kan,
    "tsumo": _apply_tsumo,
    "ron": _apply_ron,
}


def next_subgame(state: GameState) -> GameState:
    """Advance past a settled subgame: deal the next one or end the game."""
    if state.phase != SUBGAME_OVER:
        raise IllegalActionError("no settled subgame to advance from")
    next_dealer, next_kyoku, next_honba = state.settle
    over = (
        next_kyoku > state.ruleset.last_kyoku
        or any(s < 0 for s in state.scores)
        or state.subgame_index + 1 >= MAX_SUBGAMES
    )
    if over:
        scores = list(state.scores)
        if state.riichi_pot:
            top = ranks_of(state).index(1)
            scores[top] += state.riichi_pot * RIICHI_STICK
        return replace(
            state,
            scores=tuple(scores),
            riichi_pot=0,
            phase=GAME_OVER,
            events=(),
            settle=None,
        )
    state = replace(
        state,
        subgame_index=state.subgame_index + 1,
        dealer=next_dealer,
        kyoku=next_kyoku,
        honba=next_honba,
    )
    return _deal(state)


def subgame_header(state: GameState) -> dict:
    """Context captured at the start of the current subgame for records."""
    return {
        "kyoku": state.kyoku,
        "honba": state.honba,
        "pot": state.riichi_pot,
        "dealer": state.dealer,
        "scores": list(state.scores),
    }


def tile_multiset_ok(state: GameState) -> bool:
    """136-tile conservation across hands, melds, uncalled discards, walls."""
    seen = []
    for s in range(4):
        seen.extend(state.hands[s])
        for m in state.melds[s]:
            seen.extend(m.tiles)
        seen.extend(e.tile for e in state.discards[s] if not e.called)
    seen.extend(state.wall.live)
    seen.extend(state.wall.dead)
    return sorted(seen) == sorted(
        Tile(k, c) for k in range(NUM_KINDS) for c in range(4)
    )


def score_conservation_ok(state: GameState) -> bool:
    return sum(state.scores) + RIICHI_STICK * state.riichi_pot == 4 * STARTING_SCORE
