"""The composed player: fixed win/kan rules around the four networks.

Wins are always taken, closed kans follow an isolation rule, and
everything else is delegated to the trained heads with legality
masking. Every decision carries telemetry: which heads were consulted,
whether the raw argmax had to be overridden, and the unmasked argmax
itself, so the legality of the network's own preferences can be
measured while play stays total.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from mjlab import policies, rules
from mjlab.dataset import CHI_CLASSES
from mjlab.tiles import EAST

HEAD_TASKS = ("discard", "pon", "chi", "riichi")


@dataclass(frozen=True)
class AgentConfig:
    """Where the four head files live, plus play style knobs."""

    head_paths: Mapping[str, str]
    mask_discards: bool = True
    deterministic: bool = True
    thresholds: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0


@dataclass(frozen=True, eq=False)
class Decision:
    action: rules.Action
    consulted: dict
    masked: bool
    raw_argmax: int | None


def load_agent(config: AgentConfig) -> "NeuralAgent":
    missing = sorted(set(HEAD_TASKS) - set(config.head_paths))
    if missing:
        raise ValueError(f"missing head files for: {', '.join(missing)}")
    heads = {}
    for task in HEAD_TASKS:
        head = policies.load_head(config.head_paths[task])
        if head.task != task:
            raise ValueError(
                f"{config.head_paths[task]} holds a {head.task} head, "
                f"wanted {task}"
            )
        heads[task] = head
    return NeuralAgent(
        heads,
        mask_discards=config.mask_discards,
        deterministic=config.deterministic,
        thresholds=dict(config.thresholds),
        seed=config.seed,
    )


class NeuralAgent:
    """One player driven by the four heads. Single game at a time; the
    heads themselves are read-only and safe to share across agents."""

    def __init__(self, heads, *, mask_discards=True, deterministic=True,
                 thresholds=None, seed=0):
        missing = sorted(set(HEAD_TASKS) - set(heads))
        if missing:
            raise ValueError(f"missing heads: {', '.join(missing)}")
        layouts = {h.model.meta.get("layout") for h in heads.values()}
        if len(layouts) != 1:
            raise ValueError(
                f"heads disagree on plane layout: {sorted(layouts)}"
            )
        self.heads = dict(heads)
        self.mask_discards = mask_discards
        self.deterministic = deterministic
        self.thresholds = {"pon": 0.5, "riichi": 0.5, **(thresholds or {})}
        self.rng = np.random.default_rng(seed)
        # raw-argmax legality telemetry over discard-head consultations
        self.discard_decisions = 0
        self.raw_in_hand = 0
        self.fallbacks = 0

    def legality_rate(self) -> float | None:
        """Fraction of discard decisions whose unmasked argmax named a
        tile kind actually in hand; None before any such decision."""
        if self.discard_decisions == 0:
            return None
        return self.raw_in_hand / self.discard_decisions

    def act(self, view, legal) -> rules.Action:
        return self.decide(view, legal).action

    def decide(self, view, legal) -> Decision:
        legal = set(legal)
        own_turn = any(a.type in ("discard", "riichi", "tsumo",
                                  "closed_kan", "added_kan")
                       for a in legal)
        if own_turn:
            return self.decide_own_turn(view, legal)
        return self.decide_on_claim(view, legal)

    def decide_own_turn(self, view, legal) -> Decision:
        consulted = {}
        if rules.Action.tsumo() in legal:
            return Decision(rules.Action.tsumo(), consulted, False, None)
        kans = sorted((a for a in legal if a.type == "closed_kan"),
                      key=lambda a: a.kind)
        for action in kans:
            if self._isolated(view, action.kind):
                return Decision(action, consulted, False, None)
        discards = sorted((a for a in legal if a.type == "discard"),
                          key=lambda a: (a.tile.kind, a.tile.copy))
        if view.riichi[0]:
            # locked hand: the engine only offers cutting the draw
            return Decision(discards[0], consulted, False, None)
        riichi_options = sorted(
            (a for a in legal if a.type == "riichi"),
            key=lambda a: (a.tile.kind, a.tile.copy),
        )
        if riichi_options:
            probs = self._consult("riichi", view, consulted)
            if self._positive(probs, self.thresholds["riichi"]):
                return self._pick_discard(view, riichi_options, consulted)
        return self._pick_discard(view, discards, consulted)

    def decide_on_claim(self, view, legal) -> Decision:
        consulted = {}
        if rules.Action.ron() in legal:
            return Decision(rules.Action.ron(), consulted, False, None)
        # open and added kans are never declared; only the claim heads run
        if rules.Action.pon() in legal:
            probs = self._consult("pon", view, consulted)
            if self._positive(probs, self.thresholds["pon"]):
                return Decision(rules.Action.pon(), consulted, False, None)
        chi_options = {CHI_CLASSES[a.variant]: a
                       for a in legal if a.type == "chi"}
        if chi_options:
            probs = self._consult("chi", view, consulted)
            raw = int(probs.argmax())
            allowed = [0] + sorted(chi_options)
            masked = raw not in allowed
            if self.deterministic:
                choice = max(allowed, key=lambda c: probs[c])
            else:
                choice = self._sample(probs, allowed)
            if choice:
                return Decision(chi_options[choice], consulted, masked,
                                None)
            return Decision(rules.Action.pass_(), consulted, masked, None)
        return Decision(rules.Action.pass_(), consulted, False, None)

    def _pick_discard(self, view, options, consulted) -> Decision:
        """Choose among discard or riichi actions with the discard head.
        `options` already carries only legal, tenpai-preserving choices
        when a riichi is being declared."""
        probs = self._consult("discard", view, consulted)
        raw = int(probs.argmax())
        kinds = sorted({a.tile.kind for a in options})
        hand_kinds = {t.kind for t in view.hand}
        if view.drawn is not None:
            hand_kinds.add(view.drawn.kind)
        self.discard_decisions += 1
        if raw in hand_kinds:
            self.raw_in_hand += 1
        masked = raw not in kinds
        if self.deterministic:
            choice = max(kinds, key=lambda k: probs[k])
        elif self.mask_discards:
            choice = self._sample(probs, kinds)
        else:
            # free sampling over all 34 kinds; illegal picks fall back
            choice = self._sample(probs, list(range(len(probs))))
            if choice not in kinds:
                choice = max(kinds, key=lambda k: probs[k])
                masked = True
        if masked:
            self.fallbacks += 1
        for action in options:
            if action.tile.kind == choice and not action.tile.aka:
                return Decision(action, consulted, masked, raw)
        for action in options:
            if action.tile.kind == choice:
                return Decision(action, consulted, masked, raw)
        raise AssertionError("chosen kind vanished from options")

    def _consult(self, task, view, consulted):
        probs, _ = policies.predict(self.heads[task], view)
        consulted[task] = probs
        return probs

    def _positive(self, probs, threshold) -> bool:
        if self.deterministic:
            return probs[1] >= threshold
        return self.rng.random() < probs[1]

    def _sample(self, probs, allowed):
        weights = np.asarray([probs[c] for c in allowed], dtype=np.float64)
        total = weights.sum()
        if total <= 0:
            weights = np.full(len(allowed), 1.0 / len(allowed))
        else:
            weights /= total
        return allowed[int(self.rng.choice(len(allowed), p=weights))]

    @staticmethod
    def _isolated(view, kind) -> bool:
        """A kind is isolated when nothing in hand could extend it into
        a run: honors always, suited kinds only without a same-suit
        neighbor within two steps."""
        if kind >= EAST:
            return True
        tiles = view.hand + ((view.drawn,) if view.drawn else ())
        for tile in tiles:
            if tile.kind == kind:
                continue
            if tile.kind // 9 == kind // 9 and abs(tile.kind - kind) <= 2:
                return False
        return True
