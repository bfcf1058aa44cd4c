"""Self-play matches: full games between pluggable players, duplicate
seating, placement statistics, agreement runs, and replay validation.

A player is anything with act(view, legal) -> Action. Match entries may
also be the built-in names "random" and "greedy-shanten", an
agent.AgentConfig (heads are loaded once and shared), or a factory
callable seed -> player for anything custom.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from mjlab import agent as agents
from mjlab import dataset, policies, records, rules
from mjlab import hands as hd

BUILTIN_PLAYERS = ("random", "greedy-shanten")

TOTAL_POINTS = 100000  # 4 x 25000; the conservation invariant


@dataclass(frozen=True)
class MatchSpec:
    """Four players, a seed schedule, and the table rules."""

    players: tuple
    games: int
    base_seed: int = 0
    seeds: tuple | None = None
    duplicate_seating: bool = False
    ruleset: rules.Ruleset = rules.Ruleset()


@dataclass(frozen=True)
class GameResult:
    seed: int
    rotation: int
    game_id: str
    scores: tuple
    ranks: tuple
    subgames: int
    logs: tuple
    wins: tuple
    deal_ins: tuple
    riichis: tuple
    calls: tuple


@dataclass(frozen=True)
class AgentStats:
    """One player's totals across its completed games."""

    label: str
    games: int
    placements: tuple  # count of 1st..4th finishes
    score_sum: int
    subgames: int
    wins: int
    deal_ins: int
    riichis: int
    calls: int

    @property
    def mean_placement(self) -> float | None:
        if not self.games:
            return None
        ranks = sum(n * (i + 1) for i, n in enumerate(self.placements))
        return ranks / self.games

    @property
    def mean_score(self) -> float | None:
        return self.score_sum / self.games if self.games else None

    def _per_subgame(self, n) -> float | None:
        return n / self.subgames if self.subgames else None

    @property
    def win_rate(self):
        return self._per_subgame(self.wins)

    @property
    def deal_in_rate(self):
        return self._per_subgame(self.deal_ins)

    @property
    def riichi_rate(self):
        return self._per_subgame(self.riichis)

    @property
    def call_rate(self):
        return self._per_subgame(self.calls)


@dataclass(frozen=True)
class MatchReport:
    games: int
    stats: tuple
    transcripts: tuple
    aborted: tuple = ()


class RandomLegalAgent:
    """Uniform choice over whatever the engine allows."""

    def __init__(self, seed=0):
        self.rng = random.Random(seed)

    def act(self, view, legal):
        return self.rng.choice(sorted(legal, key=_action_key))


class GreedyShantenAgent:
    """Takes wins, never calls or declares, and cuts the tile that
    leaves the lowest shanten (ties to the lowest kind)."""

    def act(self, view, legal):
        if rules.Action.tsumo() in legal:
            return rules.Action.tsumo()
        if rules.Action.ron() in legal:
            return rules.Action.ron()
        discards = [a for a in legal if a.type == "discard"]
        if not discards:
            return rules.Action.pass_()
        counts = hd.counts_from_tiles(view.hand)
        n_melds = len(view.melds[0])

        def after(action):
            counts[action.tile.kind] -= 1
            s = hd.shanten_counts(counts, n_melds)
            counts[action.tile.kind] += 1
            return (s, action.tile.kind, action.tile.copy)

        return min(discards, key=after)


def _action_key(action):
    return (action.type, str(action.tile), str(action.kind),
            str(action.variant))


def build_player(entry):
    """Normalize one spec entry into (label, seed -> player)."""
    if isinstance(entry, str):
        if entry == "random":
            return entry, lambda seed: RandomLegalAgent(seed)
        if entry == "greedy-shanten":
            return entry, lambda seed: GreedyShantenAgent()
        raise ValueError(f"unknown built-in player {entry!r}")
    if isinstance(entry, agents.AgentConfig):
        loaded = agents.load_agent(entry)

        def build(seed):
            return agents.NeuralAgent(
                loaded.heads,
                mask_discards=entry.mask_discards,
                deterministic=entry.deterministic,
                thresholds=dict(entry.thresholds),
                seed=seed,
            )

        return "neural", build
    if hasattr(entry, "act"):
        # a ready player instance is shared across its games as-is
        return type(entry).__name__, lambda seed: entry
    if callable(entry):
        return getattr(entry, "__name__", "custom"), entry
    raise ValueError(f"cannot build a player from {entry!r}")


def play_game(players, seed, *, ruleset=rules.Ruleset(), rotation=0,
              game_id=None) -> GameResult:
    """One full game. players[s] acts for seat s; transcripts come out
    as one canonical log per subgame."""
    if game_id is None:
        game_id = f"sim-{seed:08x}-r{rotation}"
    state = rules.new_game(seed=seed, ruleset=ruleset)
    keeper = rules.HistoryKeeper()
    logs = []
    header = records.native_header(state, game_id)
    events = list(state.events)
    wins = [0, 0, 0, 0]
    deal_ins = [0, 0, 0, 0]
    riichis = [0, 0, 0, 0]
    calls = [0, 0, 0, 0]

    def tally(new_events):
        for ev in new_events:
            if ev["t"] == "win":
                wins[ev["seat"]] += 1
                if ev["from"] is not None:
                    deal_ins[ev["from"]] += 1
            elif ev["t"] == "riichi":
                riichis[ev["seat"]] += 1
            elif ev["t"] == "call":
                calls[ev["seat"]] += 1

    while state.phase != rules.GAME_OVER:
        if state.phase == rules.SUBGAME_OVER:
            logs.append(records.EventLog(header, tuple(events)))
            state = rules.next_subgame(state)
            if state.phase == rules.GAME_OVER:
                break
            header = records.native_header(state, game_id)
            events = list(state.events)
            continue
        seat = state.current_actor
        legal = rules.legal_actions(state, seat)
        if state.phase == rules.AWAITING_DISCARD:
            view = keeper.record(state, seat)
        else:
            view = keeper.view(state, seat)
        action = players[seat].act(view, legal)
        if action not in legal:
            raise rules.IllegalActionError(
                f"player at seat {seat} chose an illegal {action.type}"
            )
        state = rules.apply(state, seat, action)
        events.extend(state.events)
        tally(state.events)
        total = sum(state.scores) + rules.RIICHI_STICK * state.riichi_pot
        assert total == TOTAL_POINTS, f"score leak: {total}"
    ranks = rules.ranks_of(state)
    assert sorted(ranks) == [1, 2, 3, 4]
    return GameResult(
        seed=seed,
        rotation=rotation,
        game_id=game_id,
        scores=tuple(state.scores),
        ranks=ranks,
        subgames=len(logs),
        logs=tuple(logs),
        wins=tuple(wins),
        deal_ins=tuple(deal_ins),
        riichis=tuple(riichis),
        calls=tuple(calls),
    )


def run_match(spec: MatchSpec, *, workers: int = 1) -> MatchReport:
    """Play the whole schedule. With duplicate seating every wall seed
    runs four times and player p takes seat (p + rotation) % 4, so each
    player sees every deal from every position. A player exception
    aborts that game only; the abort is recorded and the match goes on.
    """
    if len(spec.players) != 4:
        raise ValueError("a match needs exactly four players")
    if spec.games < 0:
        raise ValueError("game count cannot be negative")
    if spec.seeds is not None and len(spec.seeds) != spec.games:
        raise ValueError(
            f"{spec.games} games but {len(spec.seeds)} seeds"
        )
    seeds = (tuple(spec.seeds) if spec.seeds is not None
             else tuple(spec.base_seed + i for i in range(spec.games)))
    made = [build_player(p) for p in spec.players]
    rotations = (0, 1, 2, 3) if spec.duplicate_seating else (0,)
    jobs = [(seed, r) for seed in seeds for r in rotations]

    def run_one(job):
        seed, rotation = job
        # seat s is played by player (s - rotation) % 4
        table = [None] * 4
        for player in range(4):
            seat = (player + rotation) % 4
            table[seat] = made[player][1]((seed * 4 + rotation) * 4 + seat)
        try:
            return play_game(table, seed, ruleset=spec.ruleset,
                             rotation=rotation)
        except Exception as exc:  # abort this game only, keep the match
            return (seed, rotation, f"{type(exc).__name__}: {exc}")

    if workers > 1 and jobs:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, jobs))
    else:
        results = [run_one(job) for job in jobs]

    totals = [
        {"games": 0, "placements": [0, 0, 0, 0], "score_sum": 0,
         "subgames": 0, "wins": 0, "deal_ins": 0, "riichis": 0,
         "calls": 0}
        for _ in range(4)
    ]
    transcripts = []
    aborted = []
    completed = 0
    for result in results:
        if isinstance(result, tuple):
            aborted.append(result)
            continue
        completed += 1
        transcripts.extend(result.logs)
        for player in range(4):
            seat = (player + result.rotation) % 4
            t = totals[player]
            t["games"] += 1
            t["placements"][result.ranks[seat] - 1] += 1
            t["score_sum"] += result.scores[seat]
            t["subgames"] += result.subgames
            t["wins"] += result.wins[seat]
            t["deal_ins"] += result.deal_ins[seat]
            t["riichis"] += result.riichis[seat]
            t["calls"] += result.calls[seat]
    stats = tuple(
        AgentStats(label=made[p][0], games=t["games"],
                   placements=tuple(t["placements"]),
                   score_sum=t["score_sum"], subgames=t["subgames"],
                   wins=t["wins"], deal_ins=t["deal_ins"],
                   riichis=t["riichis"], calls=t["calls"])
        for p, t in enumerate(totals)
    )
    return MatchReport(games=completed, stats=stats,
                       transcripts=tuple(transcripts),
                       aborted=tuple(aborted))


def transcripts_corpus(report: MatchReport, *, source="sim") -> records.Corpus:
    return records.Corpus(logs=tuple(report.transcripts),
                          provenance={"source": source})


def save_transcripts(report: MatchReport, path, *, source="sim") -> None:
    records.save_corpus(transcripts_corpus(report, source=source), path)


def write_report(report: MatchReport, path) -> None:
    """Line-delimited report: one header line, one line per player."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({
            "v": 1, "games": report.games,
            "aborted": len(report.aborted),
        }) + "\n")
        for i, s in enumerate(report.stats):
            fh.write(json.dumps({
                "player": i, "label": s.label, "games": s.games,
                "placements": list(s.placements),
                "mean_placement": s.mean_placement,
                "mean_score": s.mean_score,
                "subgames": s.subgames,
                "wins": s.wins, "deal_ins": s.deal_ins,
                "riichis": s.riichis, "calls": s.calls,
            }) + "\n")


def _pct(x) -> str:
    return f"{100 * x:7.2f}" if x is not None else "      -"


def format_report(report: MatchReport) -> str:
    lines = [f"games {report.games}   aborted {len(report.aborted)}"]
    lines.append(
        "player              games  mean place  mean score   "
        "win%  deal-in%  riichi%  call%"
    )
    for i, s in enumerate(report.stats):
        place = (f"{s.mean_placement:10.3f}"
                 if s.mean_placement is not None else "         -")
        score = (f"{s.mean_score:10.1f}"
                 if s.mean_score is not None else "         -")
        lines.append(
            f"{i} {s.label:<17} {s.games:5d}  {place}  {score} "
            f"{_pct(s.win_rate)}  {_pct(s.deal_in_rate)} "
            f"{_pct(s.riichi_rate)} {_pct(s.call_rate)}"
        )
    return "\n".join(lines)


def agreement_eval(head, corpus, *, seed=0, seats=(0, 1, 2, 3)):
    """Argmax agreement of one head against a held-out corpus.

    At most one situation per subgame enters the test set (seeded
    choice), mirroring how evaluation corpora are cut. Accepts a
    prepared sample list in place of a corpus.
    """
    if isinstance(corpus, records.Corpus):
        pool = dataset.extract_corpus(corpus, tasks=(head.task,),
                                      seats=seats, seed=seed)
        by_subgame = {}
        for sample in pool:
            by_subgame.setdefault(sample.provenance[:2], []).append(sample)
        rng = random.Random(seed)
        samples = [rng.choice(group)
                   for _, group in sorted(by_subgame.items())]
    else:
        samples = list(corpus)
    report = policies.evaluate(head, samples)
    return report.accuracy, report


def replay_check(log: records.EventLog) -> str | None:
    """None when the log replays cleanly through the rules engine,
    otherwise a message naming the first violated step."""
    steps = records.replay_steps(log)
    index = 0
    try:
        while True:
            try:
                state, seat, action = next(steps)
            except StopIteration:
                return None
            if action not in rules.legal_actions(state, seat):
                return (f"step {index}: seat {seat} plays {action.type} "
                        f"outside the legal set")
            index += 1
    except (records.RecordError, rules.IllegalActionError) as exc:
        return f"step {index}: {exc}"
    except (KeyError, ValueError, TypeError) as exc:
        return f"step {index}: malformed record ({exc})"
