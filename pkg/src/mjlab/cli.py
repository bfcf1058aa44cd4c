"""Command line front end: one subcommand per pipeline stage.

Every subcommand is a thin wrapper over one module operation, so
anything the CLI can do is equally scriptable from Python. Errors come
out as a single `error: ...` line on stderr with exit status 1;
argparse itself exits 2 on usage mistakes. Flags may be preloaded from
a JSON config file (`--config`), with explicit flags winning.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from mjlab import dataset, features, policies, records, rules, sim

TASKS = ("discard", "pon", "chi", "riichi")


# ---------------------------------------------------------------- ingest


def cmd_ingest(args) -> int:
    corpora = []
    for name in args.files:
        data = Path(name).read_bytes()
        if args.format == "tenhou":
            corpus = records.ingest_tenhou(data, source=name)
        else:
            corpus = records.parse_canonical(data)
            corpus = records.Corpus(corpus.logs, {"source": name})
        corpora.append(corpus)
    merged = records.merge_corpora(
        corpora, provenance={"source": args.source or "ingest"}
    )
    records.save_corpus(merged, args.out)
    print(f"logs: {len(merged.logs)}")
    print(f"quarantined: {len(merged.quarantined)}")
    print(f"out: {args.out}")
    return 0


# --------------------------------------------------------------- extract


def _parse_seats(text):
    seats = tuple(int(s) for s in text.split(","))
    if not seats or any(s not in (0, 1, 2, 3) for s in seats):
        raise ValueError(f"seats must be drawn from 0,1,2,3: {text!r}")
    return seats


def cmd_extract(args) -> int:
    corpus = records.load_corpus(args.corpus)
    tasks = TASKS if args.task == "all" else (args.task,)
    seed = args.seed if args.seed is not None else 0
    samples = dataset.extract_corpus(
        corpus,
        tasks=tasks,
        seats=_parse_seats(args.seats),
        one_seat_per_subgame=args.one_seat_per_subgame,
        seed=seed,
    )
    print(f"seed: {seed}")
    for task in tasks:
        chunk = [s for s in samples if s.task == task]
        base = args.out if len(tasks) == 1 else f"{args.out}.{task}"
        planes, labels = dataset.save_samples(chunk, base)
        print(f"{task}: {len(chunk)} samples -> {planes} {labels}")
    return 0


# ----------------------------------------------------------------- train


def cmd_train(args) -> int:
    train = dataset.load_samples(args.train)
    val = dataset.load_samples(args.val) if args.val else train
    kw = {
        "epochs": args.epochs if args.epochs is not None else 10,
        "batch_size": args.batch_size,
        "lr": args.lr if args.lr is not None else 1e-3,
        "seed": args.seed if args.seed is not None else 0,
    }
    if args.preset == "reference":
        # the reference regime: full architecture, batch 256
        kw["batch_size"] = 256
    elif kw["batch_size"] is None:
        kw["batch_size"] = 256
    print(f"seed: {kw['seed']}")
    head, curves = policies.train_head(args.task, train, val, **kw)
    policies.save_head(head, args.out)
    if args.curves:
        policies.write_curves(curves, args.curves)
    last = curves[-1]
    print(f"epochs: {len(curves)}")
    print(f"val agreement: {last['val_agreement']:.4f}")
    print(f"out: {args.out}")
    return 0


# ------------------------------------------------------------------ eval


def cmd_eval(args) -> int:
    head = policies.load_head(args.model)
    samples = dataset.load_samples(args.samples)
    report = policies.evaluate(head, samples)
    print(policies.format_report(report))
    if args.out:
        policies.write_report(report, args.out)
        print(f"out: {args.out}")
    return 0


# -------------------------------------------------------------- simulate


def _player_spec(text):
    """A builtin name, or a JSON file describing a trained agent."""
    if text in sim.BUILTIN_PLAYERS:
        return text
    path = Path(text)
    if path.suffix == ".json" and path.exists():
        from mjlab.agent import AgentConfig

        raw = json.loads(path.read_text(encoding="utf-8"))
        return AgentConfig(
            head_paths=dict(raw["head_paths"]),
            mask_discards=raw.get("mask_discards", True),
            deterministic=raw.get("deterministic", True),
            thresholds=dict(raw.get("thresholds", {})),
            seed=raw.get("seed", 0),
        )
    raise ValueError(
        f"unknown player {text!r}: use a builtin "
        f"({', '.join(sim.BUILTIN_PLAYERS)}) or an agent config JSON"
    )


def cmd_simulate(args) -> int:
    seed = args.seed if args.seed is not None else 0
    spec = sim.MatchSpec(
        players=tuple(_player_spec(p) for p in args.players),
        games=args.games,
        base_seed=seed,
        duplicate_seating=args.duplicate_seating,
    )
    print(f"seeds: {seed}..{seed + args.games - 1}")
    report = sim.run_match(spec, workers=args.workers)
    print(sim.format_report(report))
    for aborted in report.aborted:
        print(f"aborted: seed={aborted[0]} rotation={aborted[1]} "
              f"{aborted[2]}")
    if args.out:
        sim.write_report(report, args.out)
        print(f"out: {args.out}")
    if args.transcripts:
        sim.save_transcripts(report, args.transcripts)
        print(f"transcripts: {args.transcripts}")
    return 0


# ---------------------------------------------------------- replay-check


def cmd_replay_check(args) -> int:
    failures = 0
    for name in args.files:
        # verdicts are per subgame, so bypass the loader's whole-file gate
        corpus = records.load_corpus(name, validate=False)
        for log in corpus.logs:
            game = log.header.get("game", "?")
            subgame = log.header.get("subgame", "?")
            problem = sim.replay_check(log)
            if problem is None:
                print(f"ok {game} {subgame}")
            else:
                failures += 1
                print(f"fail {game} {subgame} {problem}")
    if failures:
        print(f"error: {failures} subgame(s) failed replay",
              file=sys.stderr)
        return 1
    return 0


# ----------------------------------------------------------------- serve


def cmd_serve(args) -> int:
    import uvicorn

    from mjlab import service

    app = service.create_app(
        model_dir=args.model_dir,
        seed=args.seed if args.seed is not None else 0,
    )
    print(f"seed: {args.seed if args.seed is not None else 0}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ----------------------------------------------------------- encode-dump


def cmd_encode_dump(args) -> int:
    corpus = records.load_corpus(args.corpus)
    if not 0 <= args.log < len(corpus.logs):
        raise ValueError(
            f"log {args.log} out of range, corpus holds {len(corpus.logs)}"
        )
    log = corpus.logs[args.log]
    keeper = rules.HistoryKeeper()
    view = None
    for index, (state, seat, action) in enumerate(records.replay_steps(log)):
        if state.phase == rules.AWAITING_DISCARD:
            current = keeper.record(state, seat)
        else:
            current = keeper.view(state, seat)
        if index == args.step:
            target = args.seat if args.seat is not None else seat
            if target == seat:
                view = current
            else:
                view = keeper.view(state, target)
            break
    if view is None:
        raise ValueError(f"step {args.step} out of range for this subgame")
    stack = features.encode(view)
    problems = features.validate(stack)
    print(f"layout: {stack.layout}")
    print(f"shape: {stack.bits.shape}")
    print(f"valid: {'yes' if not problems else '; '.join(problems)}")
    nonzero = [i for i in range(features.NUM_PLANES)
               if stack.bits[i].any()]
    for i in nonzero:
        name = features.PLANE_LAYOUT[i][0]
        print(f"plane {i:3d} {name}: {int(stack.bits[i].sum())} cells")
    if args.out:
        features.write_planes(args.out, stack.bits[np.newaxis])
        print(f"out: {args.out}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mjlab",
        description="riichi data, training, evaluation, and play tools",
    )
    parser.add_argument("--config", metavar="FILE",
                        help="JSON file supplying defaults for unset flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert game records to a corpus")
    p.add_argument("files", nargs="+", metavar="FILE")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("tenhou", "canonical"),
                   default="tenhou")
    p.add_argument("--source", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="pull training samples from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", choices=TASKS + ("all",), default="all")
    p.add_argument("--out", required=True, help="output base path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--seats", default="0,1,2,3")
    p.add_argument("--one-seat-per-subgame", action="store_true")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit one decision head")
    p.add_argument("--task", choices=TASKS, required=True)
    p.add_argument("--train", required=True, help="sample base path")
    p.add_argument("--val", default=None, help="sample base path")
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--preset", choices=("reference",), default=None)
    p.add_argument("--curves", default=None, help="training curve JSONL")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a trained head on samples")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", required=True, help="sample base path")
    p.add_argument("--out", default=None, help="metrics JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="run self-play matches")
    p.add_argument("--players", nargs=4, required=True,
                   metavar=("P0", "P1", "P2", "P3"))
    p.add_argument("--games", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--duplicate-seating", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="report JSONL")
    p.add_argument("--transcripts", default=None, help="corpus file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay-check",
                       help="verify every subgame replays legally")
    p.add_argument("files", nargs="+", metavar="CORPUS")
    p.set_defaults(func=cmd_replay_check)

    p = sub.add_parser("serve", help="run the live play service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8630)
    p.add_argument("--model-dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("encode-dump",
                       help="encode one recorded position and show planes")
    p.add_argument("--corpus", required=True)
    p.add_argument("--log", type=int, default=0)
    p.add_argument("--step", type=int, default=0)
    p.add_argument("--seat", type=int, default=None, choices=(0, 1, 2, 3))
    p.add_argument("--out", default=None, help="plane file")
    p.set_defaults(func=cmd_encode_dump)

    return parser


def _apply_config(args) -> None:
    raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError("config file must hold a JSON object")
    for key, value in raw.items():
        dest = key.replace("-", "_")
        if getattr(args, dest, None) is None:
            setattr(args, dest, value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            _apply_config(args)
        return args.func(args)
    except Exception as exc:  # one parseable line, nonzero exit
        message = str(exc).replace("\n", "; ") or type(exc).__name__
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
