"""Plane encoding: layout, filling styles, history snapshots, packed files."""

import numpy as np
import pytest

from mjlab import features, rules
from mjlab.features import (
    AKA,
    DISCARDS,
    DORA,
    HAND,
    KYOKU,
    MELDS,
    NUM_PLANES,
    PLANE_LAYOUT,
    RANK,
    RIICHI,
    ROUND_WIND,
    SEAT_WIND,
    PlaneStack,
    encode,
    pack_planes,
    read_planes,
    snapshot_history,
    unpack_planes,
    validate,
    write_planes,
)
from mjlab.rules import Action, HistoryKeeper
from mjlab.tiles import EAST, SOUTH, kind_from_name

from scripted import build_subgame

# honor-free 13-tile fillers, no fives so no aka can sneak in
FILLER_1 = "1p 2p 3p 7p 8p 9p 1s 2s 3s 7s 8s 9s 1m"
FILLER_2 = "2m 3m 4m 6m 7m 8m 4p 6p 7p 4s 6s 7s 9m"
FILLER_3 = "1p 2p 3p 7p 8p 9p 1s 2s 3s 7s 8s 9s 2m"
FILLER_4 = "2m 3m 4m 6m 7m 8m 4p 6p 7p 4s 6s 7s 3m"


def row(plane, name):
    return list(plane[kind_from_name(name)])


def tsumogiri(state, seat):
    drawn = state.drawn
    discards = [a for a in rules.legal_actions(state, seat)
                if a.type == "discard"]
    named = [a for a in discards if a.tile.name == drawn.name]
    return rules.apply(state, seat, (named or discards)[0])


def first_decision_events(state, keeper, upto):
    """Drive tsumogiri play, recording views, until `upto` decisions pass."""
    seen = []
    while len(seen) < upto:
        seat = state.current_actor
        if state.phase == rules.AWAITING_CALLS:
            state = rules.apply(state, seat, Action.pass_())
            continue
        seen.append(keeper.record(state, seat))
        state = tsumogiri(state, seat)
    return state, seen


class TestLayout:
    def test_plane_count_and_group_sizes(self):
        assert NUM_PLANES == 86
        assert len(PLANE_LAYOUT) == 86
        # 28 present planes, a 13-plane fresh snapshot, five 9-plane ones
        assert sum(1 + 1 + 4 + 4 + 1 + 3 + 4 + 8 + 1 + 1 for _ in [0]) == 28
        assert 28 + 13 + 5 * 9 == 86
        names = [n for n, _ in PLANE_LAYOUT]
        assert names[HAND] == "hand"
        assert names[AKA] == "aka fives"
        assert names[PLANE_LAYOUT.index(("past-2 hand", "count"))] == \
            "past-2 hand"

    def test_encode_is_pure(self):
        state = build_subgame([FILLER_1, FILLER_2, FILLER_3, FILLER_4])
        a = encode(rules.observe(state, 2))
        b = encode(rules.observe(state, 2))
        assert np.array_equal(a.bits, b.bits)
        assert a.layout == b.layout == "mj86-v1"


class TestFreshDeal:
    def test_non_dealer_view_is_almost_empty(self):
        state = build_subgame([FILLER_1, FILLER_2, FILLER_3, FILLER_4])
        stack = encode(rules.observe(state, 1))
        bits = stack.bits
        assert bits[HAND].sum() == 13
        assert not bits[AKA].any()
        assert not bits[DISCARDS:DORA].any()  # no discards, no melds
        assert bits[DORA].sum() == 1
        assert not bits[RIICHI:RIICHI + 3].any()
        # all tied on 25000: dealer ranks first, so south holds rank 2
        assert bits[RANK + 1].all()
        assert bits[RANK:RANK + 4].sum() == 34 * 4
        assert bits[KYOKU].all()  # East-1
        assert not bits[KYOKU + 1:ROUND_WIND].any()
        assert row(bits[ROUND_WIND], "E") == [1, 1, 1, 1]
        assert row(bits[SEAT_WIND], "S") == [1, 1, 1, 1]
        assert not bits[features.PAST:].any()
        assert validate(stack) == []

    def test_dealer_view_holds_the_first_draw(self):
        state = build_subgame([FILLER_1, FILLER_2, FILLER_3, FILLER_4])
        bits = encode(rules.observe(state, 0)).bits
        assert bits[HAND].sum() == 14
        assert bits[RANK].all()  # tie-break puts the dealer first
        assert row(bits[SEAT_WIND], "E") == [1, 1, 1, 1]

    def test_aka_five_fills_its_whole_row(self):
        # two physical 5m, one of them red: counts say two, aka says row
        hand = "0m 5m 2p 3p 4p 7p 8p 9p 1s 2s 3s 7s 8s"
        state = build_subgame([FILLER_1, hand, FILLER_3, FILLER_4])
        bits = encode(rules.observe(state, 1)).bits
        assert row(bits[HAND], "5m") == [1, 1, 0, 0]
        assert row(bits[AKA], "5m") == [1, 1, 1, 1]
        assert not bits[AKA][:4].any() and not bits[AKA][5:].any()


class TestTableCounts:
    def test_discards_and_riichi_from_each_viewpoint(self):
        state = build_subgame([FILLER_1, FILLER_2, FILLER_3, FILLER_4],
                              draws="E S W N 5p")
        # dealer pitches the drawn E, south riichis... nobody can, so south
        # just discards; viewpoints must agree relative to each viewer
        state = rules.apply(state, 0, Action.discard(state.drawn))
        while state.phase == rules.AWAITING_CALLS:
            state = rules.apply(state, state.current_actor, Action.pass_())
        bits1 = encode(rules.observe(state, 1)).bits
        assert row(bits1[DISCARDS + 3], "E") == [1, 0, 0, 0]  # dealer on left
        bits0 = encode(rules.observe(state, 0)).bits
        assert row(bits0[DISCARDS], "E") == [1, 0, 0, 0]  # own pond
        assert not bits0[DISCARDS + 1:MELDS].any()

    def test_called_tile_leaves_the_pond_for_the_meld_plane(self):
        # south pons the dealer's E: the discard plane forgets the tile,
        # the south meld plane carries all three copies
        hand = "E E 2p 3p 4p 7p 8p 9p 1s 2s 3s 7s 8s"
        state = build_subgame([FILLER_1, hand, FILLER_3, FILLER_4],
                              draws="E 5p 6p")
        state = rules.apply(state, 0, Action.discard(state.drawn))
        state = rules.apply(state, 1, Action.pon())
        bits = encode(rules.observe(state, 0)).bits
        assert row(bits[DISCARDS], "E") == [0, 0, 0, 0]
        assert row(bits[MELDS + 1], "E") == [1, 1, 1, 0]
        assert validate(PlaneStack(bits)) == []

    def test_closed_kan_counts_four(self):
        hand = "W W W W 2p 3p 4p 7p 8p 9p 1s 2s 3s"
        state = build_subgame([hand, FILLER_2, FILLER_3, FILLER_4],
                              draws="6p", indicator="Ht")
        state = rules.apply(state, 0, Action.closed_kan(kind_from_name("W")))
        bits = encode(rules.observe(state, 2)).bits
        assert row(bits[MELDS + 2], "W") == [1, 1, 1, 1]  # kanner sits across
        assert bits[DORA].sum() == 2  # kan flipped a second indicator


class TestHistory:
    def test_first_decision_has_empty_snapshots(self):
        state = build_subgame([FILLER_1, FILLER_2, FILLER_3, FILLER_4])
        keeper = HistoryKeeper()
        view = keeper.record(state, 0)
        bits = encode(view).bits
        assert not bits[features.PAST:].any()
        for k in range(1, 7):
            assert not snapshot_history(view, k).any()

    def test_latest_snapshot_is_the_previous_turn_hand(self):
        state = build_subgame([FILLER_1, FILLER_2, FILLER_3, FILLER_4])
        keeper = HistoryKeeper()
        state, seen = first_decision_events(state, keeper, 4)
        while state.phase == rules.AWAITING_CALLS:
            state = rules.apply(state, state.current_actor, Action.pass_())
        # dealer decides again on turn 5; past-1 must be its turn-1 state
        assert state.current_actor == 0
        view = keeper.record(state, 0)
        bits = encode(view).bits
        past1_hand = bits[features.PAST]
        turn1_hand = encode(seen[0]).bits[HAND]
        assert past1_hand.sum() == 14
        assert np.array_equal(past1_hand, turn1_hand)
        # one decision so far, so past-2 onward stay blank
        assert not bits[features.PAST + 13:].any()

    def test_six_deep_history_rolls_forward(self):
        state = build_subgame([FILLER_1, FILLER_2, FILLER_3, FILLER_4])
        keeper = HistoryKeeper()
        state, _ = first_decision_events(state, keeper, 29)
        view = keeper.view(state, state.current_actor)
        assert len(view.history) == 6
        bits = encode(view).bits
        for k in range(1, 7):
            block = snapshot_history(view, k)
            assert block[0].sum() == 14  # every snapshot carries a full hand
            assert block[0].any()
        # snapshots are ordered: deeper past shows fewer own discards
        own_discards = [snapshot_history(view, k)[1].sum() for k in (1, 6)]
        assert own_discards[0] > own_discards[1]

    def test_riichi_declared_after_the_snapshot_is_not_in_it(self):
        # south reaches tenpai at once: 234m 567p 555s EEE + 9s pair wait
        tanki = "2m 3m 4m 5p 6p 7p 5s 5s 5s E E E 9s"
        state = build_subgame([FILLER_1, tanki, FILLER_3, FILLER_4],
                              draws="1m 9s 5p 6p 2m")
        keeper = HistoryKeeper()
        view0 = keeper.record(state, 0)  # dealer's first decision
        assert not any(view0.riichi)
        state = tsumogiri(state, 0)
        state = rules.apply(state, 1, Action.pass_())
        # south declares riichi with whatever tenpai-keeping discard
        declare = next(a for a in rules.legal_actions(state, 1)
                       if a.type == "riichi")
        state = rules.apply(state, 1, declare)
        while state.phase == rules.AWAITING_CALLS:
            state = rules.apply(state, state.current_actor, Action.pass_())
        for seat in (2, 3):
            keeper.record(state, seat)
            state = tsumogiri(state, seat)
            while state.phase == rules.AWAITING_CALLS:
                state = rules.apply(state, state.current_actor,
                                    Action.pass_())
        assert state.current_actor == 0
        bits = encode(keeper.record(state, 0)).bits
        assert bits[RIICHI].all()  # right-hand player is in riichi now
        past1_riichi = bits[features.PAST + 10:features.PAST + 13]
        assert not past1_riichi.any()  # but was not at the last decision
        assert validate(PlaneStack(bits)) == []


class TestValidateRejects:
    def valid_bits(self):
        state = build_subgame([FILLER_1, FILLER_2, FILLER_3, FILLER_4])
        return encode(rules.observe(state, 1)).bits

    def test_gapped_count_row(self):
        bits = self.valid_bits()
        bits[HAND][kind_from_name("1m")] = (1, 0, 1, 1)
        assert any("not left-aligned" in p
                   for p in validate(PlaneStack(bits)))

    def test_two_black_rank_channels(self):
        bits = self.valid_bits()
        bits[RANK] = 1
        assert any("rank planes not one-hot" in p
                   for p in validate(PlaneStack(bits)))

    def test_half_filled_riichi_plane(self):
        bits = self.valid_bits()
        bits[RIICHI][0, 0] = 1
        assert any("not a 0/1 plane" in p for p in validate(PlaneStack(bits)))

    def test_partial_wind_row(self):
        bits = self.valid_bits()
        bits[ROUND_WIND][EAST] = (1, 1, 0, 0)
        assert any("partially filled row" in p
                   for p in validate(PlaneStack(bits)))

    def test_overfull_kind(self):
        bits = self.valid_bits()
        bits[HAND][5] = 1
        bits[DISCARDS][5] = (1, 1, 0, 0)
        assert any("6 tiles visible" in p for p in validate(PlaneStack(bits)))

    def test_unknown_layout_tag(self):
        stack = PlaneStack(self.valid_bits(), layout="mj99-v0")
        assert validate(stack) == ["unknown layout 'mj99-v0'"]

    def test_wrong_shape(self):
        assert validate(PlaneStack(np.zeros((86, 34, 3), np.uint8))) \
            == ["shape (86, 34, 3) is not (86, 34, 4)"]


class TestEncodedGames:
    def test_every_view_of_random_games_validates(self):
        # full games, all four viewpoints at every step, checked against
        # the hidden state: per-kind visibility can never pass four
        rng_games = [101, 202]
        checked = 0
        for seed in rng_games:
            state = rules.new_game(seed=seed)
            keepers = HistoryKeeper()
            import random
            rng = random.Random(seed)
            while state.phase != rules.GAME_OVER:
                if state.phase == rules.SUBGAME_OVER:
                    state = rules.next_subgame(state)
                    keepers = HistoryKeeper()
                    continue
                seat = state.current_actor
                if state.phase == rules.AWAITING_DISCARD and checked % 7 == 0:
                    stack = encode(keepers.record(state, seat))
                    assert validate(stack) == []
                    for other in range(4):
                        if other != seat:
                            assert validate(
                                encode(keepers.view(state, other))
                            ) == []
                checked += 1
                actions = sorted(
                    rules.legal_actions(state, seat),
                    key=lambda a: (a.type, str(a.tile), str(a.kind),
                                   str(a.variant)),
                )
                state = rules.apply(state, seat, rng.choice(actions))
        assert checked > 200


class TestPackedFiles:
    def stacks(self, n):
        state = build_subgame([FILLER_1, FILLER_2, FILLER_3, FILLER_4])
        out = []
        for seat in range(4):
            for _ in range(n // 4 + 1):
                out.append(encode(rules.observe(state, seat)).bits)
        return np.stack(out[:n])

    def test_round_trip_and_size(self):
        bits = self.stacks(6)
        data = pack_planes(bits)
        assert len(data) == 16 + 6 * 1462
        assert np.array_equal(unpack_planes(data), bits)

    def test_empty_pack(self):
        empty = np.zeros((0, 86, 34, 4), np.uint8)
        assert unpack_planes(pack_planes(empty)).shape == (0, 86, 34, 4)

    def test_file_round_trip(self, tmp_path):
        bits = self.stacks(3)
        path = tmp_path / "samples.mjpl"
        write_planes(path, bits)
        assert np.array_equal(read_planes(path), bits)

    def test_bad_magic(self):
        with pytest.raises(ValueError, match="not a plane pack"):
            unpack_planes(b"NOPE" + bytes(12))

    def test_wrong_version(self):
        data = bytearray(pack_planes(self.stacks(1)))
        data[4] = 9
        with pytest.raises(ValueError, match="version 9"):
            unpack_planes(bytes(data))

    def test_truncated_payload(self):
        data = pack_planes(self.stacks(2))
        with pytest.raises(ValueError, match="payload"):
            unpack_planes(data[:-5])

    def test_wrong_sample_shape(self):
        with pytest.raises(ValueError, match="cannot pack"):
            pack_planes(np.zeros((2, 86, 34, 3), np.uint8))
