"""Sample extraction, split construction, and sample-file round trips."""

import json

import numpy as np
import pytest

import scripted
from mjlab import dataset, features, records, rules
from mjlab.tiles import kind_from_name
from mlog_fixture import play_random_game

# scatter hands three ranks apart in every suit: no pairs, no run pieces,
# so they never open a call window and never reach tenpai
LADDER = "1m 4m 7m 1p 4p 7p 1s 4s 7s E S W N"
LADDER_NO_E = "1m 4m 7m 1p 4p 7p 1s 4s 7s S W N Ht"

FILLER = "1p 2p 3p 7p 8p 9p 1s 2s 3s 7s 8s 9s 1m"  # tenpai, 1m pair wait

TANKI_5S = "2m 3m 4m 6m 7m 8m 2p 3p 4p 6p 7p 8p 5s"

CHI_DEALER = "3p 2m 5m 8m 9m 2s 5s 8s 9s 9p 1m Ht Ch"
PON_DEALER = "E 2m 5m 8m 9m 2s 5s 8s 9s 3p 9p Ht Ch"


def scripted_log(hands, plays=(), *, game_id="scripted", **deal_kw):
    """Drive a scripted deal to its end and wrap it as a replayable log.

    Plays are (seat, action) pairs; an action given as a (type, name)
    tuple is resolved against the legal actions at that moment. After
    the scripted plays everyone discards their draw and passes every
    call until the subgame ends.
    """
    wall, hand_tiles = scripted.build_deal(hands, **deal_kw)
    state = rules.start_subgame(wall, hand_tiles)
    header = records.wall_header(
        wall, hand_tiles, game_id=game_id, subgame=0, kyoku=1,
        honba=0, pot=0, dealer=0, scores=(25000,) * 4,
    )
    events = list(state.events)
    for seat, play in plays:
        if isinstance(play, tuple):
            atype, name = play
            play = next(
                a for a in rules.legal_actions(state, seat)
                if a.type == atype and a.tile and a.tile.name == name
            )
        state = rules.apply(state, seat, play)
        events.extend(state.events)
    while state.phase != rules.SUBGAME_OVER:
        seat = state.current_actor
        if state.phase == rules.AWAITING_CALLS:
            action = rules.Action.pass_()
        else:
            legal = rules.legal_actions(state, seat)
            action = next(
                (a for a in legal
                 if a.type == "discard" and a.tile.name == state.drawn.name),
                next(a for a in legal if a.type == "discard"),
            )
        state = rules.apply(state, seat, action)
        events.extend(state.events)
    return records.EventLog(header, tuple(events))


def riichi_log():
    """Dealer holds a 5s tanki, declines riichi twice, declares on the
    third chance, then sits locked until the wall runs out."""
    return scripted_log(
        [TANKI_5S, LADDER, LADDER, LADDER],
        plays=[
            (0, ("discard", "W")),
            (1, ("discard", "2s")),
            (2, ("discard", "2s")),
            (3, ("discard", "2s")),
            (0, ("discard", "N")),
            (1, ("discard", "8s")),
            (2, ("discard", "8s")),
            (3, ("discard", "8s")),
            (0, ("riichi", "E")),
        ],
        draws="W 2s 2s 2s N 8s 8s 8s E 3s 3s 3s 2s",
        indicator="Ch",
    )


def sim_corpus(seed):
    _, logs = play_random_game(seed)
    return records.Corpus(tuple(logs), {"source": f"sim{seed}"})


def kept(log, seat):
    return dataset.net_change(log, seat) >= dataset.LOSS_CUTOFF


class TestNetChange:
    def test_win_and_deposit(self):
        # the deposit lands at declaration, separate from the settlement
        log = records.EventLog({}, (
            {"t": "riichi", "seat": 2},
            {"t": "discard", "seat": 2, "tile": "1m", "tsumogiri": False,
             "riichi": True},
            {"t": "win", "seat": 0, "from": 2, "tile": "9s",
             "delta": [2000, 0, -1000, 0]},
        ))
        assert dataset.net_change(log, 2) == -2000
        assert dataset.net_change(log, 0) == 2000
        assert dataset.net_change(log, 1) == 0

    def test_exhaustive_payments(self):
        log = records.EventLog({}, (
            {"t": "draw_end", "tenpai": [True, False, False, False],
             "delta": [3000, -1000, -1000, -1000]},
        ))
        assert dataset.net_change(log, 0) == 3000
        assert dataset.net_change(log, 3) == -1000

    def test_quiet_subgame_is_zero(self):
        log = records.EventLog({}, (
            {"t": "draw", "seat": 0, "tile": "1m"},
        ))
        assert dataset.net_change(log, 0) == 0


class TestDiscardSamples:
    def test_stops_at_riichi_inclusive(self):
        # three decisions before the lock: W, N, then the declaration's E;
        # the forced discards afterwards contribute nothing
        samples = dataset.extract_discard(riichi_log(), 0)
        assert [s.label for s in samples] == [
            kind_from_name("W"),
            kind_from_name("N"),
            kind_from_name("E"),
        ]

    def test_riichi_discard_can_be_excluded(self):
        samples = dataset.extract_samples(
            riichi_log(), seats=(0,), tasks=("discard",),
            include_riichi_discard=False,
        )
        assert [s.label for s in samples] == [
            kind_from_name("W"),
            kind_from_name("N"),
        ]

    def test_provenance_names_the_subgame(self):
        samples = dataset.extract_discard(riichi_log(), 0)
        for s in samples:
            game, subgame, seat, index = s.provenance
            assert (game, subgame, seat) == ("scripted", 0, 0)
        indices = [s.provenance[3] for s in samples]
        assert indices == sorted(indices)
        assert len(set(indices)) == len(indices)

    def test_big_loser_is_skipped(self):
        # three frozen tenpai hands leave the scatter seat paying 3000
        # at the draw, past the cutoff: it yields nothing at all
        log = scripted_log([FILLER, FILLER, FILLER, LADDER])
        assert dataset.net_change(log, 3) == -3000
        assert dataset.extract_samples(log, seats=(3,)) == []
        assert dataset.extract_discard(log, 3) == []
        assert dataset.extract_discard(log, 0) != []

    def test_labels_match_hand_plane(self):
        # whatever was pitched must sit in the encoded hand row
        for log in (riichi_log(),):
            for s in dataset.extract_discard(log, 0):
                assert s.stack.bits[features.HAND][s.label].sum() >= 1


class TestPonSamples:
    def test_pass_is_label_zero(self):
        log = scripted_log(
            [PON_DEALER, LADDER_NO_E, "E E 1m 4m 7m 1p 4p 7p 1s 4s 7s S Hk",
             LADDER_NO_E],
            plays=[(0, ("discard", "E"))],
            ura="E",  # the fourth E never surfaces, so one window only
        )
        samples = dataset.extract_pon(log, 2)
        assert [s.label for s in samples] == [0]

    def test_call_is_label_one(self):
        log = scripted_log(
            [PON_DEALER, LADDER_NO_E, "E E 1m 4m 7m 1p 4p 7p 1s 4s 7s S Hk",
             LADDER_NO_E],
            plays=[
                (0, ("discard", "E")),
                (2, rules.Action.pon()),
                (2, ("discard", "Hk")),
            ],
            ura="E",
        )
        samples = dataset.extract_pon(log, 2)
        assert [s.label for s in samples] == [1]

    def test_single_copy_never_sampled(self):
        # ladder seats hold one of everything; no pon window ever opens
        log = scripted_log(
            [PON_DEALER, LADDER_NO_E, "E E 1m 4m 7m 1p 4p 7p 1s 4s 7s S Hk",
             LADDER_NO_E],
            plays=[(0, ("discard", "E"))],
            ura="E",
        )
        assert dataset.extract_pon(log, 1) == []


class TestChiSamples:
    def chi_log(self, hand, answer=None):
        plays = [(0, ("discard", "3p"))]
        if answer is not None:
            plays += [(1, rules.Action.chi(answer)), (1, ("discard", "Hk"))]
        return scripted_log(
            [CHI_DEALER, hand, LADDER, LADDER],
            plays=plays,
            # sink the remaining 3p and 6p so this window stays the only one
            replacements="6p 6p 6p 6p",
            ura="3p 3p 3p",
        )

    def test_called_low_tile(self):
        # 4p5p swallow a 3p: the called tile is the run's low end
        log = self.chi_log("4p 5p 1m 4m 7m 1s 4s 7s E S W N Hk", "low")
        assert [s.label for s in dataset.extract_chi(log, 1)] == [1]

    def test_called_middle_tile(self):
        log = self.chi_log("2p 4p 1m 4m 7m 1s 4s 7s E S W N Hk", "mid")
        assert [s.label for s in dataset.extract_chi(log, 1)] == [2]

    def test_called_high_tile(self):
        log = self.chi_log("1p 2p 1m 4m 7m 1s 4s 7s E S W N Hk", "high")
        assert [s.label for s in dataset.extract_chi(log, 1)] == [3]

    def test_pass_is_label_zero(self):
        log = self.chi_log("4p 5p 1m 4m 7m 1s 4s 7s E S W N Hk")
        assert [s.label for s in dataset.extract_chi(log, 1)] == [0]

    def test_preempted_window_still_sampled(self):
        # seat 3 pons the 3p before seat 1's chi can come up; the chi
        # opportunity is recorded anyway, as an implicit pass
        log = scripted_log(
            [CHI_DEALER,
             "4p 5p 1m 4m 7m 1s 4s 7s E S W N Hk",
             LADDER,
             "3p 3p 2m 5m 8m 2s 5s 8s Ht S E N W"],
            plays=[
                (0, ("discard", "3p")),
                (3, rules.Action.pon()),
                (3, ("discard", "Ht")),
            ],
            replacements="6p 6p 6p 6p",
            ura="3p",
        )
        assert [s.label for s in dataset.extract_pon(log, 3)] == [1]
        assert [s.label for s in dataset.extract_chi(log, 1)] == [0]


class TestRiichiSamples:
    def test_declined_then_declared(self):
        # legal three turns running, taken on the third: labels 0,0,1
        samples = dataset.extract_riichi(riichi_log(), 0)
        assert [s.label for s in samples] == [0, 0, 1]

    def test_scatter_hand_never_legal(self):
        assert dataset.extract_riichi(riichi_log(), 1) == []

    def test_positive_shares_turn_with_discard_sample(self):
        log = riichi_log()
        declared = [s for s in dataset.extract_riichi(log, 0) if s.label]
        discards = dataset.extract_discard(log, 0)
        assert declared[0].provenance == discards[-1].provenance


class TestCorpusExtraction:
    def test_deterministic(self):
        a = dataset.extract_corpus(sim_corpus(4))
        b = dataset.extract_corpus(sim_corpus(4))
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert x.task == y.task
            assert x.label == y.label
            assert x.provenance == y.provenance
            assert np.array_equal(x.stack.bits, y.stack.bits)

    def test_every_view_validates(self):
        bad = []
        for s in dataset.extract_corpus(sim_corpus(9)):
            bad.extend(features.validate(s.stack))
        assert bad == []

    def test_discard_labels_always_in_hand(self):
        # the data-side legality check: 100% of labels name a held kind
        checked = 0
        for seed in (4, 9):
            for s in dataset.extract_corpus(sim_corpus(seed),
                                            tasks=("discard",)):
                assert s.stack.bits[features.HAND][s.label].sum() >= 1
                checked += 1
        assert checked > 300

    def test_riichi_positives_match_events(self):
        # every declaration by a followed seat yields exactly one
        # positive sample, and nothing else does
        for seed in range(12):
            for log in sim_corpus(seed).logs:
                declared = {
                    ev["seat"] for ev in log.events if ev["t"] == "riichi"
                }
                for seat in range(4):
                    if not kept(log, seat):
                        continue
                    positives = [
                        s for s in dataset.extract_riichi(log, seat)
                        if s.label == 1
                    ]
                    assert len(positives) == (1 if seat in declared else 0)

    def test_call_positives_match_events(self):
        for seed in (4, 6):
            for log in sim_corpus(seed).logs:
                for seat in range(4):
                    if not kept(log, seat):
                        continue
                    calls = [
                        ev["meld"] for ev in log.events
                        if ev["t"] == "call" and ev["seat"] == seat
                        and ev["meld"]["type"] in ("pon", "chi")
                    ]
                    pons = sum(1 for m in calls if m["type"] == "pon")
                    chis = [m for m in calls if m["type"] == "chi"]
                    got_pon = [s for s in dataset.extract_pon(log, seat)
                               if s.label == 1]
                    got_chi = [s for s in dataset.extract_chi(log, seat)
                               if s.label > 0]
                    assert len(got_pon) == pons
                    assert len(got_chi) == len(chis)
                    # chi labels mirror where the called tile sits
                    for meld, sample in zip(chis, got_chi):
                        kinds = sorted(
                            kind_from_name(n) for n in meld["tiles"]
                        )
                        called = kind_from_name(meld["called"])
                        assert sample.label == kinds.index(called) + 1

    def test_provenance_unique_per_task(self):
        seen = set()
        for s in dataset.extract_corpus(sim_corpus(4)):
            key = (s.task, s.provenance)
            assert key not in seen
            seen.add(key)

    def test_one_seat_mode_follows_one_seat(self):
        corpus = sim_corpus(4)
        samples = dataset.extract_corpus(corpus, one_seat_per_subgame=True,
                                         seed=7)
        by_subgame = {}
        for s in samples:
            by_subgame.setdefault(s.provenance[:2], set()).add(
                s.provenance[2]
            )
        assert by_subgame
        for seats in by_subgame.values():
            assert len(seats) == 1
        again = dataset.extract_corpus(corpus, one_seat_per_subgame=True,
                                       seed=7)
        assert [s.provenance for s in again] == [
            s.provenance for s in samples
        ]

    def test_unknown_task_rejected(self):
        with pytest.raises(ValueError, match="unknown task"):
            dataset.extract_samples(riichi_log(), tasks=("kan",))


class TestSplits:
    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            dataset.SplitSpec(train_fraction=0.5, val_fraction=0.4)

    def test_ninety_ten_cut(self):
        spec = dataset.SplitSpec(seed=3)
        splits = dataset.build_splits([sim_corpus(4)], spec, task="discard")
        n = len(splits.train) + len(splits.val)
        assert len(splits.train) == round(0.9 * n)
        assert splits.test == []

    def test_same_seed_same_split(self):
        spec = dataset.SplitSpec(seed=5, test_source="sim9")
        corpora = [sim_corpus(4), sim_corpus(9)]
        a = dataset.build_splits(corpora, spec, task="discard")
        b = dataset.build_splits(corpora, spec, task="discard")
        for part_a, part_b in zip(a, b):
            assert [s.provenance for s in part_a] == [
                s.provenance for s in part_b
            ]

    def test_seed_changes_the_shuffle(self):
        corpora = [sim_corpus(4)]
        a = dataset.build_splits(corpora, dataset.SplitSpec(seed=0),
                                 task="discard")
        b = dataset.build_splits(corpora, dataset.SplitSpec(seed=1),
                                 task="discard")
        assert [s.provenance for s in a.train] != [
            s.provenance for s in b.train
        ]

    def test_no_leak_between_train_and_val(self):
        splits = dataset.build_splits([sim_corpus(4)], dataset.SplitSpec(),
                                      task="discard")
        train = {s.provenance for s in splits.train}
        val = {s.provenance for s in splits.val}
        assert train.isdisjoint(val)
        assert len(train) == len(splits.train)
        assert len(val) == len(splits.val)

    def test_test_split_one_sample_per_subgame(self):
        spec = dataset.SplitSpec(test_source="sim9")
        test_corpus = sim_corpus(9)
        splits = dataset.build_splits([sim_corpus(4), test_corpus], spec,
                                      task="discard")
        subgames = [s.provenance[:2] for s in splits.test]
        assert len(subgames) == len(set(subgames))
        assert subgames
        # the test side never feeds train or val
        test_game = test_corpus.logs[0].header["game"]
        for s in splits.train + splits.val:
            assert s.provenance[0] != test_game

    def test_overlapping_sources_rejected(self):
        first = sim_corpus(4)
        relabeled = records.Corpus(first.logs, {"source": "other"})
        with pytest.raises(ValueError, match="sources overlap"):
            dataset.build_splits(
                [first, relabeled],
                dataset.SplitSpec(test_source="other"), task="discard",
            )

    def test_untagged_corpus_rejected(self):
        bare = records.Corpus(sim_corpus(4).logs, {})
        with pytest.raises(ValueError, match="source tag"):
            dataset.build_splits([bare], dataset.SplitSpec(), task="discard")

    def test_missing_test_source_rejected(self):
        with pytest.raises(ValueError, match="no corpus carries"):
            dataset.build_splits(
                [sim_corpus(4)],
                dataset.SplitSpec(test_source="nope"), task="discard",
            )

    def test_unknown_task_rejected(self):
        with pytest.raises(ValueError, match="unknown task"):
            dataset.build_splits([sim_corpus(4)], dataset.SplitSpec(),
                                 task="tsumo")


class TestSampleFiles:
    def test_round_trip(self, tmp_path):
        samples = dataset.extract_samples(riichi_log(), seats=(0,))
        base = tmp_path / "riichi-fixture"
        planes_path, labels_path = dataset.save_samples(samples, base)
        assert planes_path.exists() and labels_path.exists()
        loaded = dataset.load_samples(base)
        assert len(loaded) == len(samples)
        for x, y in zip(samples, loaded):
            assert y.task == x.task
            assert y.label == x.label
            assert y.provenance == x.provenance
            assert np.array_equal(y.stack.bits, x.stack.bits)

    def test_empty_round_trip(self, tmp_path):
        dataset.save_samples([], tmp_path / "none")
        assert dataset.load_samples(tmp_path / "none") == []

    def test_version_is_checked(self, tmp_path):
        base = tmp_path / "twisted"
        dataset.save_samples(dataset.extract_discard(riichi_log(), 0), base)
        labels = base.with_name("twisted.labels")
        lines = labels.read_text().splitlines()
        lines[0] = json.dumps({"v": 9, "count": len(lines) - 1})
        labels.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError, match="version 9"):
            dataset.load_samples(base)

    def test_truncated_sidecar_is_caught(self, tmp_path):
        base = tmp_path / "short"
        dataset.save_samples(dataset.extract_discard(riichi_log(), 0), base)
        labels = base.with_name("short.labels")
        lines = labels.read_text().splitlines()
        labels.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ValueError, match="label file names"):
            dataset.load_samples(base)

    def test_plane_count_mismatch_is_caught(self, tmp_path):
        samples = dataset.extract_discard(riichi_log(), 0)
        dataset.save_samples(samples, tmp_path / "planes")
        dataset.save_samples(samples[:-1], tmp_path / "fewer")
        (tmp_path / "planes.mjpl").write_bytes(
            (tmp_path / "fewer.mjpl").read_bytes()
        )
        with pytest.raises(ValueError, match="plane file"):
            dataset.load_samples(tmp_path / "planes")
