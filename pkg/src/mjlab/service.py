"""Turn-based game sessions for live human-vs-agent play.

GameService is framework-free and holds everything in memory: one lock
and one ordered event feed per session, bots advancing synchronously
until the human must act. create_app wraps it in a small HTTP layer
(JSON requests, a server-sent event stream) for the web client.

Information hiding is enforced at the serialization boundary: every
payload that leaves the service goes through the redaction helpers
here, which only ever emit the human's own tiles. Transcripts carry the
wall seed, so they can only be downloaded once the game is over.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path

from mjlab import features, nncore, policies, records, rules, sim
from mjlab.tiles import KIND_NAMES

LAYOUT = features.LAYOUT


class ServiceError(Exception):
    """Bad request against a live session (maps to HTTP 4xx)."""


class UnknownSession(ServiceError):
    pass


class IllegalSubmit(ServiceError):
    def __init__(self, message, legal):
        super().__init__(message)
        self.legal = legal


# ------------------------------------------------------------ wire format


def action_id(action: rules.Action) -> str:
    """Stable wire name: "discard:5m", "chi:low", "closed_kan:9p", "pass"."""
    if action.tile is not None:
        return f"{action.type}:{action.tile.name}"
    if action.kind is not None:
        return f"{action.type}:{KIND_NAMES[action.kind]}"
    if action.variant is not None:
        return f"{action.type}:{action.variant}"
    return action.type


def legal_payload(legal) -> list:
    out = []
    for action in sorted(legal, key=action_id):
        entry = {"id": action_id(action), "type": action.type}
        if action.tile is not None:
            entry["tile"] = action.tile.name
        if action.kind is not None:
            entry["kind"] = KIND_NAMES[action.kind]
        if action.variant is not None:
            entry["variant"] = action.variant
        out.append(entry)
    return out


def _meld_dict(meld) -> dict:
    return {
        "type": meld.meld_type,
        "tiles": [t.name for t in meld.tiles],
        "from": meld.called_from,
        "called": meld.called_tile.name if meld.called_tile else None,
    }


def view_dict(view: rules.TableView) -> dict:
    """The human's own projection; opponent indices stay relative."""
    return {
        "viewer": view.viewer,
        "hand": [t.name for t in view.hand],
        "drawn": view.drawn.name if view.drawn else None,
        "melds": [[_meld_dict(m) for m in seat] for seat in view.melds],
        "discards": [
            [{"tile": d.tile.name, "riichi": d.riichi, "called": d.called}
             for d in seat]
            for seat in view.discards
        ],
        "riichi": list(view.riichi),
        "dora_indicators": [KIND_NAMES[k] for k in view.dora_indicators],
        "round_wind": KIND_NAMES[view.round_wind],
        "seat_wind": KIND_NAMES[view.seat_wind],
        "kyoku": view.kyoku,
        "honba": view.honba,
        "riichi_pot": view.riichi_pot,
        "scores": list(view.scores),
        "ranks": list(view.ranks),
        "wall_count": view.wall_count,
    }


def redact_event(ev: dict, human: int) -> dict:
    """Strip everything a live opponent could not see at the table."""
    if ev["t"] == "deal":
        return {
            "t": "deal",
            "seat": human,
            "hand": list(ev["hands"][human]),
            "indicator": ev["indicator"],
        }
    if ev["t"] == "draw" and ev["seat"] != human:
        return {"t": "draw", "seat": ev["seat"]}
    return dict(ev)


# ---------------------------------------------------------------- sessions


@dataclass
class Session:
    sid: str
    human: int
    state: rules.GameState
    players: dict
    keeper: rules.HistoryKeeper
    hints: bool
    hint_head: object | None
    seed: int
    logs: list = field(default_factory=list)
    header: dict | None = None
    events: list = field(default_factory=list)
    stream: list = field(default_factory=list)
    pending: dict = field(default_factory=dict)  # action id -> Action
    pending_view: rules.TableView | None = None
    revision: int = 0
    results: dict = field(default_factory=dict)  # idempotency key -> result
    done: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)
    cond: threading.Condition = None

    def __post_init__(self):
        self.cond = threading.Condition(self.lock)


class GameService:
    """In-memory session table. Sessions are independent; each one is a
    single sequential executor guarded by its own lock."""

    def __init__(self, *, model_dir=None, seed=0):
        self.model_dir = Path(model_dir) if model_dir else None
        self.rng = random.Random(seed)
        self.sessions: dict[str, Session] = {}

    # -- lifecycle

    def create_session(self, players, *, human_seat=0, seed=None,
                       hints=False, ruleset=rules.Ruleset()) -> dict:
        if not 0 <= int(human_seat) <= 3:
            raise ServiceError("human_seat must be 0..3")
        if len(players) != 4:
            raise ServiceError("a session needs exactly four player slots")
        if seed is None:
            seed = self.rng.getrandbits(31)
        sid = f"s{self.rng.getrandbits(64):016x}"
        hint_head = self._load_hint_head() if hints else None
        table = {}
        for seat, entry in enumerate(players):
            if seat == int(human_seat):
                continue
            label, build = sim.build_player(_player_entry(entry))
            table[seat] = build(seed * 4 + seat)
        state = rules.new_game(seed=seed, ruleset=ruleset)
        session = Session(
            sid=sid,
            human=int(human_seat),
            state=state,
            players=table,
            keeper=rules.HistoryKeeper(),
            hints=bool(hints),
            hint_head=hint_head,
            seed=seed,
        )
        session.header = records.native_header(state, f"svc-{sid}")
        self.sessions[sid] = session
        with session.lock:
            session.events = list(state.events)
            self._push(session, state.events)
            self._advance(session)
        return {"v": LAYOUT, "session": sid,
                "observation": self._observation(session)}

    def _load_hint_head(self):
        if self.model_dir is None:
            raise ServiceError("hints need a model directory")
        path = self.model_dir / "discard.mjnn"
        if not path.exists():
            raise ServiceError(f"no discard head at {path}")
        return policies.load_head(path)

    def _get(self, sid) -> Session:
        try:
            return self.sessions[sid]
        except KeyError:
            raise UnknownSession(f"unknown session {sid!r}") from None

    # -- queries

    def observation(self, sid) -> dict:
        session = self._get(sid)
        with session.lock:
            return self._observation(session)

    def events_since(self, sid, after=0) -> dict:
        session = self._get(sid)
        after = max(0, int(after))
        with session.lock:
            chunk = session.stream[after:]
            return {"v": LAYOUT, "events": list(chunk),
                    "next": after + len(chunk), "done": session.done}

    def event_stream(self, sid, after=0):
        """Yield stream entries in order, blocking until the game ends."""
        session = self._get(sid)
        cursor = max(0, int(after))
        while True:
            with session.cond:
                while cursor >= len(session.stream) and not session.done:
                    session.cond.wait(timeout=0.25)
                chunk = list(session.stream[cursor:])
                done = session.done
            yield from chunk
            cursor += len(chunk)
            if done and cursor >= len(session.stream):
                return

    def transcript(self, sid) -> bytes:
        session = self._get(sid)
        with session.lock:
            if not session.done:
                raise ServiceError(
                    "transcript is available once the game is over"
                )
            corpus = records.Corpus(
                logs=tuple(session.logs),
                provenance={"source": "service", "session": session.sid},
            )
            return records.emit_canonical(corpus)

    def list_models(self) -> dict:
        entries = []
        if self.model_dir is not None:
            for path in sorted(self.model_dir.glob("*.mjnn")):
                try:
                    model = nncore.load_model(path)
                    meta = model.meta or {}
                    entries.append({
                        "file": path.name,
                        "task": meta.get("task"),
                        "layout": meta.get("layout"),
                    })
                except (OSError, ValueError) as exc:
                    entries.append({"file": path.name, "error": str(exc)})
        return {"v": LAYOUT, "models": entries}

    # -- actions

    def submit(self, sid, action, *, key) -> dict:
        session = self._get(sid)
        with session.lock:
            if not key or not isinstance(key, str):
                raise ServiceError("an idempotency key is required")
            if key in session.results:
                return session.results[key]
            if session.done:
                raise IllegalSubmit("the game is over", [])
            if not isinstance(action, str) or action not in session.pending:
                raise IllegalSubmit(
                    f"{action!r} is not in the current legal set",
                    legal_payload(session.pending.values()),
                )
            chosen = session.pending[action]
            state = rules.apply(session.state, session.human, chosen)
            session.state = state
            self._absorb(session)
            self._advance(session)
            result = {"v": LAYOUT, "applied": action,
                      "revision": session.revision,
                      "status": "over" if session.done else "acting"}
            session.results[key] = result
            return result

    # -- internals (session lock held)

    def _absorb(self, session):
        """Log and stream the events the last apply produced."""
        events = session.state.events
        session.events.extend(events)
        self._push(session, events)
        total = (sum(session.state.scores)
                 + rules.RIICHI_STICK * session.state.riichi_pot)
        assert total == 100000, f"score leak: {total}"

    def _push(self, session, events):
        for ev in events:
            session.stream.append({
                "seq": len(session.stream),
                **redact_event(ev, session.human),
            })
        if events:
            session.revision += 1
            session.cond.notify_all()

    def _advance(self, session):
        """Run bots and subgame boundaries until the human must act."""
        while True:
            state = session.state
            if state.phase == rules.GAME_OVER:
                self._finish(session)
                return
            if state.phase == rules.SUBGAME_OVER:
                session.logs.append(
                    records.EventLog(session.header, tuple(session.events))
                )
                state = rules.next_subgame(state)
                session.state = state
                if state.phase == rules.GAME_OVER:
                    self._finish(session)
                    return
                session.header = records.native_header(
                    state, f"svc-{session.sid}"
                )
                session.events = list(state.events)
                self._push(session, state.events)
                continue
            seat = state.current_actor
            legal = rules.legal_actions(state, seat)
            if seat == session.human:
                if state.phase == rules.AWAITING_DISCARD:
                    view = session.keeper.record(state, seat)
                else:
                    view = session.keeper.view(state, seat)
                session.pending = {action_id(a): a for a in legal}
                session.pending_view = view
                return
            if state.phase == rules.AWAITING_DISCARD:
                view = session.keeper.record(state, seat)
            else:
                view = session.keeper.view(state, seat)
            action = session.players[seat].act(view, legal)
            if action not in legal:
                raise rules.IllegalActionError(
                    f"bot at seat {seat} chose an illegal {action.type}"
                )
            session.state = rules.apply(state, seat, action)
            self._absorb(session)

    def _finish(self, session):
        if session.done:
            return
        session.done = True
        session.pending = {}
        session.pending_view = None
        state = session.state
        session.stream.append({
            "seq": len(session.stream),
            "t": "game_over",
            "scores": list(state.scores),
            "ranks": list(rules.ranks_of(state)),
        })
        session.revision += 1
        session.cond.notify_all()

    def _observation(self, session) -> dict:
        obs = {
            "v": LAYOUT,
            "session": session.sid,
            "revision": session.revision,
            "seat": session.human,
            "status": "over" if session.done else "acting",
            "deadline": None,
            "legal": legal_payload(session.pending.values()),
        }
        if session.done:
            state = session.state
            obs["view"] = None
            obs["scores"] = list(state.scores)
            obs["ranks"] = list(rules.ranks_of(state))
            return obs
        view = session.pending_view
        obs["view"] = view_dict(view)
        obs["hint"] = self._hint(session, view)
        return obs

    def _hint(self, session, view):
        """Discard-head probabilities over the hand, opt-in per session."""
        if session.hint_head is None:
            return None
        if not any(a.type in ("discard", "riichi")
                   for a in session.pending.values()):
            return None
        probs, _ = policies.predict(session.hint_head, view)
        kinds = sorted({t.kind for t in view.hand})
        return [{"tile": KIND_NAMES[k], "p": round(float(probs[k]), 6)}
                for k in kinds]


def _player_entry(entry):
    """JSON-friendly player specs: a dict becomes an AgentConfig."""
    if isinstance(entry, dict):
        from mjlab.agent import AgentConfig

        return AgentConfig(
            head_paths=dict(entry["head_paths"]),
            mask_discards=entry.get("mask_discards", True),
            deterministic=entry.get("deterministic", True),
            thresholds=dict(entry.get("thresholds", {})),
            seed=entry.get("seed", 0),
        )
    return entry


# -------------------------------------------------------------- HTTP layer


def create_app(service: GameService | None = None, **kw):
    """FastAPI wrapper; import stays local so the core has no web deps."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import Response, StreamingResponse

    svc = service if service is not None else GameService(**kw)
    app = FastAPI(title="mjlab")
    app.state.service = svc

    def fail(exc):
        if isinstance(exc, UnknownSession):
            return HTTPException(404, str(exc))
        if isinstance(exc, IllegalSubmit):
            return HTTPException(
                409, {"error": str(exc), "legal": exc.legal}
            )
        return HTTPException(400, str(exc))

    @app.post("/sessions")
    def create(body: dict):
        try:
            ruleset = rules.Ruleset(**body.get("ruleset", {}))
            return svc.create_session(
                body.get("players", ("random",) * 4),
                human_seat=body.get("human_seat", 0),
                seed=body.get("seed"),
                hints=body.get("hints", False),
                ruleset=ruleset,
            )
        except (ServiceError, TypeError, KeyError, ValueError) as exc:
            raise fail(exc if isinstance(exc, ServiceError)
                       else ServiceError(str(exc))) from exc

    @app.get("/sessions/{sid}/observation")
    def observation(sid: str):
        try:
            return svc.observation(sid)
        except ServiceError as exc:
            raise fail(exc) from exc

    @app.post("/sessions/{sid}/actions")
    def actions(sid: str, body: dict):
        try:
            return svc.submit(sid, body.get("action"),
                              key=body.get("key"))
        except ServiceError as exc:
            raise fail(exc) from exc

    @app.get("/sessions/{sid}/events")
    def events(sid: str, after: int = 0):
        try:
            return svc.events_since(sid, after)
        except ServiceError as exc:
            raise fail(exc) from exc

    @app.get("/sessions/{sid}/events/stream")
    def stream(sid: str, after: int = 0):
        try:
            svc._get(sid)
        except ServiceError as exc:
            raise fail(exc) from exc

        def sse():
            for item in svc.event_stream(sid, after):
                yield f"id: {item['seq']}\ndata: {json.dumps(item)}\n\n"

        return StreamingResponse(sse(), media_type="text/event-stream")

    @app.get("/sessions/{sid}/transcript")
    def transcript(sid: str):
        try:
            data = svc.transcript(sid)
        except ServiceError as exc:
            raise fail(exc) from exc
        return Response(content=data, media_type="application/jsonl")

    @app.get("/models")
    def models():
        return svc.list_models()

    return app
