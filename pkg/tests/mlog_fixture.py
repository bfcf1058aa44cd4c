"""Mirror engine games into Tenhou-style mlog XML for ingestion tests.

The encoder here is the inverse of the adapter's decoder, built from the
live game states, so a generated file exercises the whole ingestion path:
element parsing, meld-code decoding, wall reconstruction, and replay.
"""

import random
import xml.etree.ElementTree as ET

from mjlab import records, rules

_DRAW_TAGS = "TUVW"
_DISCARD_TAGS = "DEFG"


def tid(tile) -> int:
    return tile.kind * 4 + tile.copy


class GameToXml:
    def __init__(self, go_type=169, names=("east", "south", "west", "north")):
        self.root = ET.Element("mjloggm", {"ver": "2.3"})
        self._add("GO", {"type": go_type, "lobby": 0})
        self._add("UN", {f"n{i}": name for i, name in enumerate(names)})
        self._add("TAIKYOKU", {"oya": 0})

    def to_bytes(self) -> bytes:
        return ET.tostring(self.root, encoding="utf-8")

    def _add(self, tag, attrs=None):
        ET.SubElement(
            self.root, tag,
            {k: str(v) for k, v in (attrs or {}).items()},
        )

    def on_step(self, pre, post):
        """Translate the events one engine apply (or deal) produced."""
        for ev in post.events:
            getattr(self, "_ev_" + ev["t"])(ev, pre, post)

    def _ev_deal(self, ev, pre, post):
        wall = post.wall
        seed = (post.kyoku - 1, post.honba, post.riichi_pot, 0, 0,
                tid(wall.indicators()[0]))
        attrs = {
            "seed": ",".join(str(x) for x in seed),
            "ten": ",".join(str(s // 100) for s in post.scores),
            "oya": post.dealer,
        }
        # the dealt state already holds the dealer's first draw
        hands = list(post.hands)
        dealt = list(hands[post.dealer])
        dealt.remove(post.drawn)
        hands[post.dealer] = dealt
        for s in range(4):
            attrs[f"hai{s}"] = ",".join(str(tid(t)) for t in hands[s])
        self._add("INIT", attrs)

    def _ev_draw(self, ev, pre, post):
        self._add(f"{_DRAW_TAGS[ev['seat']]}{tid(post.drawn)}")

    def _ev_discard(self, ev, pre, post):
        entry = post.discards[ev["seat"]][-1]
        self._add(f"{_DISCARD_TAGS[ev['seat']]}{tid(entry.tile)}")
        if ev["riichi"]:
            self._add("REACH", {"who": ev["seat"], "step": 2})

    def _ev_riichi(self, ev, pre, post):
        self._add("REACH", {"who": ev["seat"], "step": 1})

    def _ev_call(self, ev, pre, post):
        self._add("N", {"who": ev["seat"],
                        "m": self._encode_meld(ev, pre, post)})

    def _ev_new_dora(self, ev, pre, post):
        self._add("DORA", {"hai": tid(post.wall.indicators()[-1])})

    def _ev_win(self, ev, pre, post):
        if ev["from"] is None:
            win_tile = pre.drawn
        else:
            win_tile = pre.pending_discard[1]
        sc = []
        for s in range(4):
            sc += [pre.scores[s] // 100, ev["delta"][s] // 100]
        attrs = {
            "who": ev["seat"],
            "fromWho": ev["seat"] if ev["from"] is None else ev["from"],
            "machi": tid(win_tile),
            "ba": f"{pre.honba},{pre.riichi_pot}",
            "sc": ",".join(str(x) for x in sc),
        }
        if "ura" in ev:
            attrs["doraHaiUra"] = ",".join(
                str(tid(t)) for t in post.wall.ura_indicators()
            )
        self._add("AGARI", attrs)

    def _ev_draw_end(self, ev, pre, post):
        sc = []
        for s in range(4):
            sc += [pre.scores[s] // 100, ev["delta"][s] // 100]
        attrs = {"sc": ",".join(str(x) for x in sc)}
        if ev.get("reason") == "four_kans":
            attrs["type"] = "kan4"
        else:
            for s in range(4):
                if ev["tenpai"][s]:
                    attrs[f"hai{s}"] = ",".join(
                        str(tid(t)) for t in post.hands[s]
                    )
        self._add("RYUUKYOKU", attrs)

    def _encode_meld(self, ev, pre, post):
        seat = ev["seat"]
        mtype = ev["meld"]["type"]
        if mtype == "added_kan":
            meld = next(
                m for m in post.melds[seat]
                if m.meld_type == "added_kan" and m not in pre.melds[seat]
            )
            added = next(iter(set(pre.hands[seat]) - set(post.hands[seat])))
            pon_copies = sorted(
                t.copy for t in meld.tiles if t.copy != added.copy
            )
            called_at = pon_copies.index(meld.called_tile.copy)
            code = meld.kind * 3 + called_at
            return (code << 9) | (added.copy << 5) | 0x10 | meld.called_from
        meld = post.melds[seat][-1]
        if mtype == "pon":
            used = sorted(t.copy for t in meld.tiles)
            spare = next(c for c in range(4) if c not in used)
            called_at = used.index(meld.called_tile.copy)
            code = meld.kind * 3 + called_at
            return (code << 9) | (spare << 5) | 0x8 | meld.called_from
        if mtype == "chi":
            tiles = sorted(meld.tiles, key=lambda t: t.kind)
            base = tiles[0].kind
            called_at = meld.called_tile.kind - base
            code = ((base // 9) * 7 + base % 9) * 3 + called_at
            m = (code << 10) | 0x4 | 3
            for i, tile in enumerate(tiles):
                m |= tile.copy << (3 + 2 * i)
            return m
        if mtype == "closed_kan":
            return (meld.kind * 4) << 8
        called = meld.kind * 4 + meld.called_tile.copy
        return (called << 8) | meld.called_from


def action_sort_key(action):
    return (action.type, str(action.tile), str(action.kind),
            str(action.variant))


def play_random_game(seed, *, xml=None, rng_seed=None, max_subgames=None):
    """Random-legal play through a full game.

    Returns (final_state, logs) with one native EventLog per subgame;
    mirrors every step into `xml` when given.
    """
    rng = random.Random(seed if rng_seed is None else rng_seed)
    state = rules.new_game(seed=seed)
    game_id = f"sim-{seed:08x}"
    logs = []
    header = records.native_header(state, game_id)
    events = list(state.events)
    if xml is not None:
        xml.on_step(None, state)
    while state.phase != rules.GAME_OVER:
        if state.phase == rules.SUBGAME_OVER:
            logs.append(records.EventLog(header, tuple(events)))
            if max_subgames is not None and len(logs) >= max_subgames:
                return state, logs
            state = rules.next_subgame(state)
            if state.phase == rules.GAME_OVER:
                break
            header = records.native_header(state, game_id)
            events = list(state.events)
            if xml is not None:
                xml.on_step(None, state)
            continue
        seat = state.current_actor
        action = rng.choice(
            sorted(rules.legal_actions(state, seat), key=action_sort_key)
        )
        pre = state
        state = rules.apply(state, seat, action)
        events.extend(state.events)
        if xml is not None:
            xml.on_step(pre, state)
    return state, logs
