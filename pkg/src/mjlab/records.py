"""Game records: line-delimited logs, replay validation, corpus assembly.

One record file holds any number of subgame logs. Each log is a header
object (a line with a "v" field) followed by its events (lines with a "t"
field), all compact JSON, one object per line. Headers carry either the
seed that dealt the subgame or the explicit walls and hands, so every log
can be replayed through the rules engine from scratch. Replay is the only
acceptance test a log ever gets: a corpus holds logs that replayed cleanly,
everything else sits in the quarantine list with a reason.
"""

import json
from dataclasses import dataclass, field

from . import rules
from .tiles import (
    AKA_KINDS,
    DEAD_WALL_SIZE,
    LIVE_WALL_SIZE,
    TILES_PER_KIND,
    Tile,
    Wall,
    kind_from_name,
)

CANONICAL_VERSION = 1


class RecordError(Exception):
    """Input that is not a canonical record stream."""


class ReplayError(RecordError):
    """A log whose events do not replay into a legal game."""


@dataclass(frozen=True)
class EventLog:
    """One subgame: start-of-deal header plus the full event sequence."""

    header: dict
    events: tuple


@dataclass(frozen=True)
class Corpus:
    logs: tuple = ()
    # bookkeeping, not content: excluded from equality so round-trips compare
    provenance: dict = field(default_factory=dict, compare=False)
    quarantined: tuple = field(default=(), compare=False)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def emit_canonical(corpus: Corpus) -> bytes:
    lines = []
    for log in corpus.logs:
        lines.append(_dumps(log.header))
        lines.extend(_dumps(e) for e in log.events)
    if not lines:
        return b""
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_canonical(data, *, validate: bool = True,
                    provenance: dict | None = None) -> Corpus:
    if isinstance(data, str):
        data = data.encode("utf-8")
    logs = []
    header = None
    events = []

    def close():
        if header is not None:
            logs.append(EventLog(header, tuple(events)))

    for lineno, raw in enumerate(data.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise RecordError(
                f"line {lineno}: {exc.msg} at column {exc.colno}"
            ) from None
        if not isinstance(obj, dict):
            raise RecordError(f"line {lineno}: expected a JSON object")
        if "v" in obj:
            if obj["v"] != CANONICAL_VERSION:
                raise RecordError(
                    f"line {lineno}: unsupported record version {obj['v']!r}"
                )
            close()
            header, events = obj, []
        elif "t" in obj:
            if header is None:
                raise RecordError(f"line {lineno}: event before any header")
            events.append(obj)
        else:
            raise RecordError(
                f"line {lineno}: neither a header ('v') nor an event ('t')"
            )
    close()
    corpus = Corpus(tuple(logs), provenance=provenance or {})
    if validate:
        for i, log in enumerate(corpus.logs):
            try:
                replay_log(log)
            except ReplayError as exc:
                gid = log.header.get("game")
                raise ReplayError(
                    f"log {i} (game {gid}, subgame "
                    f"{log.header.get('subgame')}): {exc}"
                ) from None
    return corpus


def load_corpus(path, *, validate: bool = True) -> Corpus:
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_canonical(data, validate=validate,
                           provenance={"source": str(path)})


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "wb") as fh:
        fh.write(emit_canonical(corpus))


def ingest_tenhou(data: bytes, *, source: str = "tenhou") -> Corpus:
    """Adapt a Tenhou mlog file; the format lives in its own module."""
    from .tenhou import ingest_tenhou as adapter

    return adapter(data, source=source)


def merge_corpora(corpora, provenance: dict | None = None) -> Corpus:
    """Concatenate corpora, dropping exact duplicate subgames by id."""
    seen = set()
    logs = []
    quarantined = []
    for corpus in corpora:
        for log in corpus.logs:
            key = (log.header.get("game"), log.header.get("subgame"))
            if key in seen:
                continue
            seen.add(key)
            logs.append(log)
        quarantined.extend(corpus.quarantined)
    return Corpus(tuple(logs), provenance or {}, tuple(quarantined))


# ----------------------------------------------------------------- headers


def _ruleset_dict(ruleset: rules.Ruleset) -> dict:
    return {
        "aka": ruleset.aka,
        "open_tanyao": ruleset.open_tanyao,
        "last_kyoku": ruleset.last_kyoku,
    }


def native_header(state, game_id: str) -> dict:
    """Header for the subgame `state` was just dealt into.

    Must be taken before any action so the scores and pot are the
    start-of-deal values the replay will start from.
    """
    header = {
        "v": CANONICAL_VERSION,
        "game": game_id,
        "subgame": state.subgame_index,
        "seed": state.seed,
        "rules": _ruleset_dict(state.ruleset),
    }
    header.update(rules.subgame_header(state))
    return header


def wall_header(wall: Wall, hands, *, game_id: str, subgame: int,
                kyoku: int, honba: int, pot: int, dealer: int, scores,
                ruleset: rules.Ruleset = rules.Ruleset(),
                origin: str | None = None, players=None) -> dict:
    """Header that spells the walls out instead of carrying a seed."""
    header = {
        "v": CANONICAL_VERSION,
        "game": game_id,
        "subgame": subgame,
        "rules": _ruleset_dict(ruleset),
        "kyoku": kyoku,
        "honba": honba,
        "pot": pot,
        "dealer": dealer,
        "scores": list(scores),
        "wall": {
            "hands": [[t.name for t in h] for h in hands],
            "dead": [t.name for t in wall.dead],
            "live": [t.name for t in wall.live],
        },
    }
    if origin is not None:
        header["origin"] = origin
    if players is not None:
        header["players"] = list(players)
    return header


# ------------------------------------------------------------------ replay


class _CopyAssigner:
    """Rebuild physical tiles from names, one copy per appearance.

    Plain fives take copies 1-3 and "0m"/"0p"/"0s" take copy 0, so the
    red-five identity survives the name round-trip; other kinds hand out
    copies in order.
    """

    def __init__(self):
        self._taken = {}

    def take(self, name: str) -> Tile:
        kind = kind_from_name(name)
        used = self._taken.setdefault(kind, set())
        if name[0] == "0":
            order = (0,)
        elif kind in AKA_KINDS:
            order = (1, 2, 3)
        else:
            order = range(TILES_PER_KIND)
        for copy in order:
            if copy not in used:
                used.add(copy)
                return Tile(kind, copy)
        raise ReplayError(f"more than {TILES_PER_KIND} copies of {name}")


def _wall_from_header(spec: dict):
    assign = _CopyAssigner()
    hands = tuple(
        tuple(assign.take(n) for n in hand) for hand in spec["hands"]
    )
    dead = tuple(assign.take(n) for n in spec["dead"])
    live = tuple(assign.take(n) for n in spec["live"])
    if any(len(h) != 13 for h in hands):
        raise ReplayError("dealt hands must hold 13 tiles")
    if len(dead) != DEAD_WALL_SIZE or len(live) != LIVE_WALL_SIZE:
        raise ReplayError(
            f"wall must be {LIVE_WALL_SIZE}+{DEAD_WALL_SIZE} tiles, got "
            f"{len(live)}+{len(dead)}"
        )
    return Wall(live=live, dead=dead, dora_indicator_count=1), hands


def _named_action(state, seat: int, atype: str, name: str):
    for action in rules.legal_actions(state, seat):
        if action.type == atype and action.tile is not None \
                and action.tile.name == name:
            return action
    raise ReplayError(
        f"turn {state.turn}: seat {seat} cannot {atype} {name}"
    )


def _chi_variant(meld: dict) -> str:
    kinds = sorted(kind_from_name(n) for n in meld["tiles"])
    called = kind_from_name(meld["called"])
    return ("low", "mid", "high")[kinds.index(called)]


def _claim_action(state, ev: dict):
    meld = ev["meld"]
    mtype = meld["type"]
    if mtype == "pon":
        return rules.Action.pon()
    if mtype == "open_kan":
        return rules.Action.open_kan()
    if mtype == "chi":
        return rules.Action.chi(_chi_variant(meld))
    raise ReplayError(
        f"turn {state.turn}: {mtype} recorded as a discard claim"
    )


def _action_from_events(state, recorded: list, cursor: int):
    if cursor >= len(recorded):
        raise ReplayError(f"turn {state.turn}: record ends mid-game")
    seat = state.current_actor
    ev = recorded[cursor]
    t = ev["t"]

    if state.phase == rules.AWAITING_CALLS:
        # the queue head acts; a recorded event belonging to anyone else
        # (or any non-claim event) means this seat let the discard go
        if t == "call" and ev["seat"] == seat:
            return _claim_action(state, ev)
        if t == "win" and ev["seat"] == seat and ev.get("from") is not None:
            return rules.Action.ron()
        return rules.Action.pass_()

    if t == "riichi":
        if ev["seat"] != seat:
            raise ReplayError(
                f"turn {state.turn}: riichi by seat {ev['seat']} out of turn"
            )
        after = recorded[cursor + 1] if cursor + 1 < len(recorded) else None
        if not after or after["t"] != "discard" or not after.get("riichi"):
            raise ReplayError(
                f"turn {state.turn}: riichi event without its discard"
            )
        return _named_action(state, seat, "riichi", after["tile"])
    if t == "discard":
        if ev["seat"] != seat:
            raise ReplayError(
                f"turn {state.turn}: discard by seat {ev['seat']} out of turn"
            )
        return _named_action(state, seat, "discard", ev["tile"])
    if t == "call":
        meld = ev["meld"]
        kind = min(kind_from_name(n) for n in meld["tiles"])
        if meld["type"] == "closed_kan":
            return rules.Action.closed_kan(kind)
        if meld["type"] == "added_kan":
            return rules.Action.added_kan(kind)
        raise ReplayError(
            f"turn {state.turn}: {meld['type']} recorded on the turn itself"
        )
    if t == "win":
        if ev.get("from") is None:
            return rules.Action.tsumo()
        raise ReplayError(f"turn {state.turn}: ron recorded on own turn")
    raise ReplayError(f"turn {state.turn}: cannot act out event {t!r}")


def _relaxed_match(rec: dict, ev: dict) -> bool:
    if rec.get("t") != ev["t"]:
        return False
    t = ev["t"]
    if t == "win":
        # foreign records carry their own scoring; seats and tile must agree
        return all(rec.get(k) == ev.get(k) for k in ("seat", "from", "tile"))
    if t == "draw_end":
        return all(
            rec.get(k) == ev.get(k) for k in ("tenpai", "delta", "reason")
        )
    if t == "call":
        rm, em = rec.get("meld", {}), ev["meld"]
        return (
            rm.get("type") == em["type"]
            and rm.get("from") == em["from"]
            and rm.get("called") == em["called"]
            and sorted(rm.get("tiles", [])) == sorted(em["tiles"])
        )
    if t == "discard":
        # the engine folds identical copies into one discard option, so it
        # cannot tell which physical copy a foreign record pitched; the
        # recorded tsumogiri flag stays authoritative
        return all(rec.get(k) == ev.get(k) for k in ("seat", "tile", "riichi"))
    return rec == ev


def _match_events(recorded: list, cursor: int, emitted, relaxed: bool,
                  state) -> int:
    for ev in emitted:
        if cursor < len(recorded):
            rec = recorded[cursor]
            if rec == ev or (relaxed and _relaxed_match(rec, ev)):
                cursor += 1
                continue
        else:
            rec = None
        if relaxed and ev["t"] == "new_dora":
            # engine flips the kan indicator immediately; records that cut
            # off before a deferred flip simply lack the event
            continue
        raise ReplayError(
            f"turn {state.turn}: replay produced {_dumps(ev)}, record has "
            f"{_dumps(rec) if rec is not None else 'nothing'}"
        )
    return cursor


def replay_steps(log: EventLog):
    """Step through a recorded subgame, yielding ``(state, seat, action)``.

    Each yield happens just before the action is applied, so ``state`` is
    the position the actor saw when deciding. Validation is identical to
    replay_log; the finished state becomes the generator's return value.
    """
    header = log.header
    relaxed = header.get("origin") == "tenhou"
    try:
        ruleset = rules.Ruleset(**header["rules"])
        if "wall" in header:
            wall, hands = _wall_from_header(header["wall"])
        elif "seed" in header:
            wall, hands, _ = rules.wall_for_subgame(
                header["seed"], header["subgame"]
            )
        else:
            raise ReplayError("header carries neither a seed nor a wall")
        state = rules.start_subgame(
            wall,
            hands,
            ruleset=ruleset,
            kyoku=header["kyoku"],
            honba=header["honba"],
            riichi_pot=header["pot"],
            dealer=header["dealer"],
            scores=tuple(header["scores"]),
            seed=header.get("seed", 0),
            subgame_index=header.get("subgame", 0),
        )
    except ReplayError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ReplayError(f"bad header: {exc}") from None

    recorded = list(log.events)
    cursor = _match_events(recorded, 0, state.events, relaxed, state)
    for _ in range(4 * len(recorded) + 64):
        if state.phase == rules.SUBGAME_OVER:
            break
        seat = state.current_actor
        action = _action_from_events(state, recorded, cursor)
        yield state, seat, action
        try:
            state = rules.apply(state, seat, action)
        except rules.IllegalActionError as exc:
            raise ReplayError(
                f"turn {state.turn}: seat {seat}: {exc}"
            ) from None
        cursor = _match_events(recorded, cursor, state.events, relaxed, state)
    else:
        raise ReplayError("replay did not terminate")
    if cursor != len(recorded):
        raise ReplayError(
            f"{len(recorded) - cursor} recorded events were never replayed"
        )
    return state


def replay_log(log: EventLog):
    """Drive the rules engine through a recorded subgame.

    Returns the final state. Raises ReplayError the moment the record
    deviates from what the engine allows or produces.
    """
    steps = replay_steps(log)
    while True:
        try:
            next(steps)
        except StopIteration as stop:
            return stop.value
