"""Labeled training samples harvested from replayed game records.

Four decision kinds are sampled. Discard samples cover a player's own
tile choices up to and including the riichi declaration; pon and chi
samples cover call windows the player could have answered, whether or
not anyone actually called; riichi samples cover every turn the
declaration was legal. Each sample carries the encoded table view the
decision was made from, so extraction replays the record and keeps a
rolling history per seat.

Subgames where the followed seat ends up more than 1500 points down,
riichi deposits included, are skipped wholesale for that seat.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import features, records, rules

TASKS = ("discard", "pon", "chi", "riichi")
LABEL_CLASSES = {"discard": 34, "pon": 2, "chi": 4, "riichi": 2}
LOSS_CUTOFF = -1500
SIDECAR_VERSION = 1

# a chi label names where the called tile sits in the finished run
CHI_CLASSES = {"low": 1, "mid": 2, "high": 3}


@dataclass(frozen=True, eq=False)
class Sample:
    stack: features.PlaneStack
    label: int
    task: str
    provenance: tuple  # (game id, subgame, seat, decision index)


class Splits(NamedTuple):
    train: list
    val: list
    test: list


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.9
    val_fraction: float = 0.1
    test_source: str | None = None
    seed: int = 0

    def __post_init__(self):
        if abs(self.train_fraction + self.val_fraction - 1.0) > 1e-9:
            raise ValueError("train and validation fractions must sum to 1")


def net_change(log: records.EventLog, seat: int) -> int:
    """Score movement of `seat` across the subgame, deposits included.

    Reads the recorded settlements rather than replaying, so imported
    logs keep the scoring their site computed.
    """
    total = 0
    for ev in log.events:
        if ev["t"] == "riichi" and ev["seat"] == seat:
            total -= 1000
        elif ev["t"] in ("win", "draw_end") and "delta" in ev:
            total += ev["delta"][seat]
    return total


def _walk(log, keeper):
    """Yield every sampling opportunity with the state it arose in.

    Own turns come out as ("turn", state, seat, action, riichi_legal,
    view). Call windows come out once per discard that anyone could
    claim, as ("window", state, queue, winner); the queue is the full
    set of (seat, options) offers and winner is the (seat, action) that
    ended the window, or None when it lapsed. Views for window seats
    are built by the caller while the keeper still holds this moment.
    """
    window = None
    for state, seat, action in records.replay_steps(log):
        if state.phase == rules.AWAITING_CALLS:
            if window is None:
                window = (state, state.claim_queue)
            if action.type != "pass":
                yield ("window", window[0], window[1], (seat, action))
                window = None
            continue
        if window is not None:
            yield ("window", window[0], window[1], None)
            window = None
        riichi_legal = any(
            a.type == "riichi" for a in rules.legal_actions(state, seat)
        )
        if action.type in ("discard", "riichi"):
            view = keeper.record(state, seat)
        else:
            view = keeper.view(state, seat)
        yield ("turn", state, seat, action, riichi_legal, view)
    if window is not None:
        # an all-pass window before an exhaustive draw never sees
        # another turn, so flush it here
        yield ("window", window[0], window[1], None)


def extract_samples(log: records.EventLog, *, seats=(0, 1, 2, 3),
                    tasks=TASKS, include_riichi_discard: bool = True):
    """Replay one subgame and collect samples for the given seats."""
    unknown = set(tasks) - set(TASKS)
    if unknown:
        raise ValueError(f"unknown task {sorted(unknown)[0]!r}")
    take = set(tasks)
    wanted = {s for s in seats if net_change(log, s) >= LOSS_CUTOFF}
    if not wanted:
        return []
    game = log.header.get("game")
    subgame = log.header.get("subgame")
    keeper = rules.HistoryKeeper()
    samples = []
    stopped = set()
    index = 0
    for item in _walk(log, keeper):
        index += 1
        if item[0] == "turn":
            _, state, seat, action, riichi_legal, view = item
            if seat not in wanted:
                continue
            prov = (game, subgame, seat, index)
            if "riichi" in take and riichi_legal:
                samples.append(Sample(
                    features.encode(view),
                    int(action.type == "riichi"), "riichi", prov,
                ))
            if ("discard" in take and seat not in stopped
                    and action.type in ("discard", "riichi")
                    and (include_riichi_discard
                         or action.type != "riichi")):
                samples.append(Sample(
                    features.encode(view), action.tile.kind,
                    "discard", prov,
                ))
            if action.type == "riichi":
                stopped.add(seat)
        else:
            _, state, queue, winner = item
            for s, options in queue:
                if s not in wanted:
                    continue
                offered = {a.type for a in options}
                todo = take & offered & {"pon", "chi"}
                if not todo:
                    continue
                stack = features.encode(keeper.view(state, s))
                prov = (game, subgame, s, index)
                answer = winner[1] if winner and winner[0] == s else None
                if "pon" in todo:
                    label = int(answer is not None
                                and answer.type == "pon")
                    samples.append(Sample(stack, label, "pon", prov))
                if "chi" in todo:
                    if answer is not None and answer.type == "chi":
                        label = CHI_CLASSES[answer.variant]
                    else:
                        label = 0
                    samples.append(Sample(stack, label, "chi", prov))
    return samples


def extract_discard(log, seat):
    return extract_samples(log, seats=(seat,), tasks=("discard",))


def extract_pon(log, seat):
    return extract_samples(log, seats=(seat,), tasks=("pon",))


def extract_chi(log, seat):
    return extract_samples(log, seats=(seat,), tasks=("chi",))


def extract_riichi(log, seat):
    return extract_samples(log, seats=(seat,), tasks=("riichi",))


def extract_corpus(corpus: records.Corpus, *, tasks=TASKS,
                   seats=(0, 1, 2, 3), one_seat_per_subgame: bool = False,
                   seed: int = 0, include_riichi_discard: bool = True):
    """Extract each log in the corpus, in order.

    With one_seat_per_subgame the extractor follows a single seeded
    seat per log instead of all four.
    """
    rng = random.Random(seed)
    out = []
    for log in corpus.logs:
        followed = (rng.choice(seats),) if one_seat_per_subgame else seats
        out.extend(extract_samples(
            log, seats=followed, tasks=tasks,
            include_riichi_discard=include_riichi_discard,
        ))
    return out


def build_splits(corpora, spec: SplitSpec, *, task: str,
                 seats=(0, 1, 2, 3), one_seat_per_subgame: bool = False,
                 include_riichi_discard: bool = True) -> Splits:
    """Cut one task's samples into train/val/test lists.

    Corpora whose source tag equals spec.test_source feed the test
    split; everything else is shuffled and cut train/val by the spec
    fractions. The test split keeps at most one sample per subgame,
    chosen with the spec seed. Any game appearing on both sides is an
    error, as is a corpus without a source tag.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    train_pool, test_pool = [], []
    for corpus in corpora:
        tag = corpus.provenance.get("source")
        if not tag:
            raise ValueError("corpus has no source tag")
        pool = test_pool if tag == spec.test_source else train_pool
        pool.append(corpus)
    if spec.test_source is not None and not test_pool:
        raise ValueError(
            f"no corpus carries source tag {spec.test_source!r}"
        )
    train_games = {log.header.get("game")
                   for c in train_pool for log in c.logs}
    test_games = {log.header.get("game")
                  for c in test_pool for log in c.logs}
    overlap = train_games & test_games
    if overlap:
        raise ValueError(
            f"sources overlap: game {sorted(overlap)[0]!r} feeds both "
            f"train and test"
        )

    def harvest(pool):
        out = []
        for corpus in pool:
            out.extend(extract_corpus(
                corpus, tasks=(task,), seats=seats,
                one_seat_per_subgame=one_seat_per_subgame,
                seed=spec.seed,
                include_riichi_discard=include_riichi_discard,
            ))
        return out

    rng = random.Random(spec.seed)
    pool = harvest(train_pool)
    rng.shuffle(pool)
    n_train = round(spec.train_fraction * len(pool))
    by_subgame = {}
    for sample in harvest(test_pool):
        by_subgame.setdefault(sample.provenance[:2], []).append(sample)
    test = [rng.choice(group) for _, group in sorted(by_subgame.items())]
    return Splits(pool[:n_train], pool[n_train:], test)


# ------------------------------------------------------------ sample files


def save_samples(samples, base) -> tuple[Path, Path]:
    """Write packed planes plus a line-delimited label sidecar.

    `base` grows a `.mjpl` and a `.labels` suffix. The sidecar opens
    with a version/count line so truncated copies are detectable.
    """
    planes_path = Path(f"{base}.mjpl")
    labels_path = Path(f"{base}.labels")
    bits = np.stack([s.stack.bits for s in samples]) if samples else \
        np.zeros((0, features.NUM_PLANES, 34, 4), dtype=np.uint8)
    features.write_planes(planes_path, bits)
    lines = [json.dumps({"v": SIDECAR_VERSION, "count": len(samples)})]
    for s in samples:
        lines.append(json.dumps(
            {"task": s.task, "label": s.label,
             "provenance": list(s.provenance)},
            separators=(",", ":"),
        ))
    labels_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return planes_path, labels_path


def load_samples(base) -> list:
    bits = features.read_planes(f"{base}.mjpl")
    text = Path(f"{base}.labels").read_text(encoding="utf-8")
    lines = text.splitlines()
    header = json.loads(lines[0])
    if header.get("v") != SIDECAR_VERSION:
        raise ValueError(f"label file version {header.get('v')} unsupported")
    if header.get("count") != len(lines) - 1:
        raise ValueError(
            f"label file names {header.get('count')} samples, "
            f"holds {len(lines) - 1}"
        )
    if header["count"] != bits.shape[0]:
        raise ValueError(
            f"label file names {header['count']} samples, plane file "
            f"holds {bits.shape[0]}"
        )
    samples = []
    for i, line in enumerate(lines[1:]):
        rec = json.loads(line)
        samples.append(Sample(
            features.PlaneStack(bits[i]), rec["label"], rec["task"],
            tuple(rec["provenance"]),
        ))
    return samples
