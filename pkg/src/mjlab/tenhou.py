"""Tenhou mlog ingestion: XML in, replay-validated canonical logs out.

The adapter is deliberately quarantine-happy. Anything it cannot map onto
the engine's rule surface (three-player games, no-aka lobbies, abortive
draws the engine does not model, meld codes it cannot decode, or any
subgame whose replay deviates) lands in Corpus.quarantined with a reason
instead of being silently dropped or half-converted.
"""

import gzip
import hashlib
import urllib.parse
import xml.etree.ElementTree as ET

from . import records, rules
from .records import Corpus
from .tiles import Tile, full_tile_set, sort_hand, Wall

_DRAW_SEATS = {"T": 0, "U": 1, "V": 2, "W": 3}
_DISCARD_SEATS = {"D": 0, "E": 1, "F": 2, "G": 3}

# GO type bits for rule variants the engine does not play
_GO_SANMA = 0x10
_GO_NO_AKA = 0x02
_GO_KUITAN_OFF = 0x04
_GO_HANCHAN = 0x08


class _Quarantine(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _tile(tid: int) -> Tile:
    return Tile(tid // 4, tid % 4)


def _decode_meld(m: int) -> dict:
    """Unpack a Tenhou N-element meld code into a canonical meld dict."""
    offset = m & 3
    if m & 0x4:  # run
        t = (m >> 10) & 0x3F
        called_at = t % 3
        t //= 3
        if t > 20:  # 3 suits x 7 starting ranks
            raise ValueError(f"run index {t} off the tile grid")
        base = (t // 7) * 9 + (t % 7)
        copies = ((m >> 3) & 3, (m >> 5) & 3, (m >> 7) & 3)
        tiles = [Tile(base + i, copies[i]) for i in range(3)]
        if offset != 3:
            raise _Quarantine(f"chi code calls from offset {offset}")
        return _meld_dict("chi", tiles, offset, tiles[called_at])
    if m & 0x8:  # triplet
        t = (m >> 9) & 0x7F
        called_at = t % 3
        kind = t // 3
        spare = (m >> 5) & 3
        tiles = [Tile(kind, c) for c in range(4) if c != spare]
        return _meld_dict("pon", tiles, offset, tiles[called_at])
    if m & 0x10:  # quad grown out of an earlier triplet
        t = (m >> 9) & 0x7F
        called_at = t % 3
        kind = t // 3
        added = (m >> 5) & 3
        pon_copies = [c for c in range(4) if c != added]
        tiles = [Tile(kind, c) for c in range(4)]
        return _meld_dict(
            "added_kan", tiles, offset, Tile(kind, pon_copies[called_at])
        )
    # quad: closed when the offset points at the caller itself
    t = (m >> 8) & 0xFF
    kind = t // 4
    tiles = [Tile(kind, c) for c in range(4)]
    if offset == 0:
        return _meld_dict("closed_kan", tiles, None, None)
    return _meld_dict("open_kan", tiles, offset, Tile(kind, t % 4))


def _meld_dict(mtype, tiles, offset, called) -> dict:
    return {
        "type": mtype,
        "tiles": [t.name for t in tiles],
        "from": offset,
        "called": called.name if called is not None else None,
    }


class _SubgameBuilder:
    """Accumulates one INIT..AGARI/RYUUKYOKU stretch of elements."""

    def __init__(self, init, ruleset):
        parts = [int(x) for x in init.get("seed").split(",")]
        kyoku0, honba, pot, _d0, _d1, dora_id = parts
        self.kyoku = kyoku0 + 1
        if self.kyoku > ruleset.last_kyoku:
            raise _Quarantine(f"kyoku {self.kyoku} beyond the last round")
        self.honba = honba
        self.pot = pot
        self.dealer = int(init.get("oya"))
        self.scores = [int(x) * 100 for x in init.get("ten").split(",")]
        hand_ids = [
            [int(x) for x in init.get(f"hai{s}").split(",")] for s in range(4)
        ]
        if any(len(h) != 13 for h in hand_ids):
            raise _Quarantine("dealt hand is not 13 tiles")
        self.hands = [sort_hand(_tile(i) for i in h) for h in hand_ids]
        self.indicators = [_tile(dora_id)]
        self.ura = []
        self.live_draws = []
        self.replacement_draws = []
        self.events = [
            {
                "t": "deal",
                "hands": [[t.name for t in h] for h in self.hands],
                "indicator": self.indicators[0].name,
            }
        ]
        self.last_drawn = [None] * 4
        self.reach_pending = [False] * 4
        self.rinshan_pending = False
        self.dora_slots = []  # event positions awaiting a kan indicator
        self.done = False

    def feed(self, elem) -> None:
        tag = elem.tag
        if self.done:
            if tag == "AGARI":
                raise _Quarantine("multiple winners on one discard")
            raise _Quarantine(f"{tag!r} after the subgame ended")
        head, rest = tag[:1], tag[1:]
        if head in _DRAW_SEATS and rest.isdigit():
            self._draw(_DRAW_SEATS[head], int(rest))
        elif head in _DISCARD_SEATS and rest.isdigit():
            self._discard(_DISCARD_SEATS[head], int(rest))
        elif tag == "REACH":
            self._reach(elem)
        elif tag == "N":
            self._meld(elem)
        elif tag == "DORA":
            self._dora(elem)
        elif tag == "AGARI":
            self._win(elem)
        elif tag == "RYUUKYOKU":
            self._draw_end(elem)
        elif tag == "BYE":
            raise _Quarantine("player disconnected")
        else:
            raise _Quarantine(f"unknown element {tag!r}")

    def _draw(self, seat, tid):
        tile = _tile(tid)
        if self.rinshan_pending:
            self.replacement_draws.append(tile)
            self.rinshan_pending = False
        else:
            self.live_draws.append(tile)
        self.last_drawn[seat] = tid
        self.events.append({"t": "draw", "seat": seat, "tile": tile.name})

    def _discard(self, seat, tid):
        tile = _tile(tid)
        self.events.append(
            {
                "t": "discard",
                "seat": seat,
                "tile": tile.name,
                "tsumogiri": tid == self.last_drawn[seat],
                "riichi": self.reach_pending[seat],
            }
        )
        self.last_drawn[seat] = None
        self.reach_pending[seat] = False

    def _reach(self, elem):
        if int(elem.get("step", "1")) != 1:
            return  # step 2 just confirms the deposit
        who = int(elem.get("who"))
        self.events.append({"t": "riichi", "seat": who})
        self.reach_pending[who] = True

    def _meld(self, elem):
        who = int(elem.get("who"))
        try:
            meld = _decode_meld(int(elem.get("m")))
        except (ValueError, TypeError) as exc:
            raise _Quarantine(
                f"meld code {elem.get('m')!r}: {exc}"
            ) from None
        self.events.append({"t": "call", "seat": who, "meld": meld})
        # whatever the caller drew earlier is no longer "fresh"; a kan's
        # replacement draw re-arms the flag before the next discard
        self.last_drawn[who] = None
        if meld["type"].endswith("kan"):
            self.rinshan_pending = True
            self.dora_slots.append(len(self.events))

    def _dora(self, elem):
        tile = _tile(int(elem.get("hai")))
        self.indicators.append(tile)
        if not self.dora_slots:
            raise _Quarantine("dora flip without a preceding kan")
        # the engine flips right after the kan call, so the indicator is
        # filed back there no matter when the log chose to reveal it
        at = self.dora_slots.pop(0)
        self.events.insert(at, {"t": "new_dora", "indicator": tile.name})
        self.dora_slots = [s + 1 for s in self.dora_slots]

    def _win(self, elem):
        who = int(elem.get("who"))
        from_who = int(elem.get("fromWho"))
        tile = _tile(int(elem.get("machi")))
        ura = elem.get("doraHaiUra")
        if ura:
            self.ura = [_tile(int(x)) for x in ura.split(",")]
        sc = [int(x) for x in elem.get("sc").split(",")]
        self.events.append(
            {
                "t": "win",
                "seat": who,
                "from": None if from_who == who else from_who,
                "tile": tile.name,
                # the site's own settlement; replay recomputes scores with
                # this engine's simplified yaku, so keep the real numbers
                "delta": [sc[2 * s + 1] * 100 for s in range(4)],
            }
        )
        self.done = True

    def _draw_end(self, elem):
        rtype = elem.get("type")
        if rtype is not None:
            raise _Quarantine(f"abortive draw {rtype!r} unsupported")
        sc = [int(x) for x in elem.get("sc").split(",")]
        self.events.append(
            {
                "t": "draw_end",
                "tenpai": [elem.get(f"hai{s}") is not None for s in range(4)],
                "delta": [sc[2 * s + 1] * 100 for s in range(4)],
            }
        )
        self.done = True

    def build_log(self, game_id, subgame, ruleset, players):
        if not self.done:
            raise _Quarantine("subgame has no outcome")
        wall, hands = self._build_wall()
        header = records.wall_header(
            wall,
            hands,
            game_id=game_id,
            subgame=subgame,
            kyoku=self.kyoku,
            honba=self.honba,
            pot=self.pot,
            dealer=self.dealer,
            scores=self.scores,
            ruleset=ruleset,
            origin="tenhou",
            players=players,
        )
        return records.EventLog(header, tuple(self.events))

    def _build_wall(self):
        seen = set()
        for tile in (
            [t for hand in self.hands for t in hand]
            + self.live_draws
            + self.replacement_draws
            + self.indicators
            + self.ura
        ):
            if tile in seen:
                raise _Quarantine(f"tile {tile!r} appears twice")
            seen.add(tile)
        pool = [t for t in full_tile_set() if t not in seen]

        def pad(tiles, size):
            out = list(tiles)
            while len(out) < size:
                out.append(pool.pop())
            if len(out) > size:
                raise _Quarantine("more wall tiles than slots")
            return out

        dead = (
            pad(self.replacement_draws, 4)
            + pad(self.indicators, 5)
            + pad(self.ura, 5)
        )
        live = self.live_draws + pool
        if len(live) != 70:
            raise _Quarantine(f"live wall came out at {len(live)} tiles")
        return (
            Wall(live=tuple(live), dead=tuple(dead), dora_indicator_count=1),
            tuple(self.hands),
        )


def _ruleset_from_go(root) -> rules.Ruleset:
    go = root.find("GO")
    bits = int(go.get("type", "9")) if go is not None else 9
    if bits & _GO_SANMA:
        raise _Quarantine("unsupported ruleset: three-player")
    if bits & _GO_NO_AKA:
        raise _Quarantine("unsupported ruleset: no red fives")
    return rules.Ruleset(
        aka=True,
        open_tanyao=not bits & _GO_KUITAN_OFF,
        last_kyoku=8 if bits & _GO_HANCHAN else 4,
    )


def _player_names(root):
    un = root.find("UN")
    if un is None:
        return None
    return [urllib.parse.unquote(un.get(f"n{s}") or "") for s in range(4)]


def ingest_tenhou(data: bytes, *, source: str = "tenhou") -> Corpus:
    """Convert one mlog file (plain or gzipped XML) into a Corpus."""
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    game_id = hashlib.sha256(data).hexdigest()[:16]
    provenance = {"source": source, "game": game_id}

    def reject(reason, subgame=None):
        entry = {"game": game_id, "reason": reason}
        if subgame is not None:
            entry["subgame"] = subgame
        return entry

    try:
        root = ET.fromstring(data.decode("utf-8"))
    except (ET.ParseError, UnicodeDecodeError) as exc:
        return Corpus((), provenance, (reject(f"unparsable: {exc}"),))
    try:
        ruleset = _ruleset_from_go(root)
    except _Quarantine as exc:
        return Corpus((), provenance, (reject(exc.reason),))
    players = _player_names(root)

    # split the flat element stream into per-INIT stretches
    stretches = []
    builder = None
    pending_error = None
    for elem in root:
        if elem.tag in ("GO", "UN", "TAIKYOKU", "SHUFFLE"):
            continue
        if elem.tag == "INIT":
            try:
                builder = _SubgameBuilder(elem, ruleset)
            except _Quarantine as exc:
                builder = None
                stretches.append((None, exc.reason))
                continue
            except (ValueError, TypeError, AttributeError) as exc:
                builder = None
                stretches.append((None, f"malformed INIT: {exc}"))
                continue
            stretches.append((builder, None))
            continue
        if builder is None:
            continue  # elements under a rejected INIT
        try:
            builder.feed(elem)
        except _Quarantine as exc:
            stretches[-1] = (None, exc.reason)
            builder = None
        except (ValueError, TypeError, AttributeError) as exc:
            stretches[-1] = (None, f"malformed {elem.tag!r}: {exc}")
            builder = None

    logs = []
    quarantined = []
    for subgame, (sub, error) in enumerate(stretches):
        if sub is None:
            quarantined.append(reject(error, subgame))
            continue
        try:
            log = sub.build_log(game_id, subgame, ruleset, players)
            records.replay_log(log)
        except _Quarantine as exc:
            quarantined.append(reject(exc.reason, subgame))
        except records.ReplayError as exc:
            quarantined.append(reject(f"replay failed: {exc}", subgame))
        else:
            logs.append(log)
    return Corpus(tuple(logs), provenance, tuple(quarantined))
