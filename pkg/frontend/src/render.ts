// Pure observation -> screen state. Everything shown on the table is
// computed here from the server payload alone, so tests can cover the
// whole UI without a DOM. The client invents nothing: no inference of
// hidden tiles, no rule logic, only fields the observation carries.

import {
  DiscardData,
  HintEntry,
  LegalAction,
  MeldData,
  Observation,
  LAYOUT,
} from "./protocol.js";
import { SEAT_NAMES, isAka, kindIndex, sortHand, tileLabel } from "./tiles.js";

export interface TileSprite {
  name: string;
  aka: boolean;
  label: string;
}

export interface DiscardSprite extends TileSprite {
  riichi: boolean; // rotated in the lane
  called: boolean; // grayed: the tile went to someone's meld
}

export interface SeatPanel {
  rel: number;
  title: string;
  score: number;
  rank: number;
  riichi: boolean;
  melds: { type: string; tiles: TileSprite[]; from: number }[];
  discards: DiscardSprite[];
}

export interface ActionButton {
  id: string;
  label: string;
  tile: string | null;
}

export interface HintBar {
  tile: string;
  p: number;
  width: number; // 0..100, scaled to the largest entry
}

export interface ScreenState {
  error: string | null;
  status: "acting" | "waiting" | "over";
  revision: number;
  banner: string;
  wallCount: number | null;
  pot: number;
  doraIndicators: TileSprite[];
  seats: SeatPanel[];
  hand: TileSprite[];
  drawn: TileSprite | null;
  hint: HintBar[] | null;
  actions: ActionButton[];
  result: {
    scores: number[];
    ranks: number[];
    total: number;
    conserved: boolean;
  } | null;
}

function sprite(name: string): TileSprite {
  return { name, aka: isAka(name), label: tileLabel(name) };
}

function meldPanel(melds: MeldData[]) {
  return melds.map((m) => ({
    type: m.type,
    tiles: m.tiles.map(sprite),
    from: m.from,
  }));
}

function discardLane(lane: DiscardData[]): DiscardSprite[] {
  return lane.map((d) => ({
    ...sprite(d.tile),
    riichi: d.riichi,
    called: d.called,
  }));
}

function actionLabel(a: LegalAction): string {
  const [type, qualifier] = a.id.split(":");
  if (type === "discard") {
    return `discard ${tileLabel(qualifier)}`;
  }
  if (type === "riichi") {
    return `riichi on ${tileLabel(qualifier)}`;
  }
  if (type === "chi") {
    return `chi (${qualifier})`;
  }
  if (type === "kan") {
    return `kan ${tileLabel(qualifier)}`;
  }
  return type;
}

function hintBars(hint: HintEntry[] | null | undefined): HintBar[] | null {
  if (!hint || hint.length === 0) {
    return hint ? [] : null;
  }
  const top = Math.max(...hint.map((h) => h.p));
  return hint.map((h) => ({
    tile: h.tile,
    p: h.p,
    width: top > 0 ? Math.round((100 * h.p) / top) : 0,
  }));
}

const WIND_LABELS: Record<string, string> = {
  E: "East",
  S: "South",
  W: "West",
  N: "North",
};

export function render(obs: Observation): ScreenState {
  const empty: ScreenState = {
    error: null,
    status: "over",
    revision: obs.revision ?? 0,
    banner: "",
    wallCount: null,
    pot: 0,
    doraIndicators: [],
    seats: [],
    hand: [],
    drawn: null,
    hint: null,
    actions: [],
    result: null,
  };
  if (obs.v !== LAYOUT) {
    // blocking: a client built for one encoder layout must not guess
    // at another's payload shapes
    empty.error = `layout mismatch: server speaks ${obs.v}, ` +
      `this client speaks ${LAYOUT}`;
    return empty;
  }

  if (obs.status === "over" || obs.view === null) {
    const scores = obs.scores ?? [];
    const total = scores.reduce((a, b) => a + b, 0);
    empty.banner = "game over";
    empty.result = {
      scores,
      ranks: obs.ranks ?? [],
      total,
      conserved: total === 100000,
    };
    return empty;
  }

  const view = obs.view;
  const seats: SeatPanel[] = [0, 1, 2, 3].map((rel) => ({
    rel,
    title: SEAT_NAMES[rel],
    score: view.scores[rel],
    rank: view.ranks[rel],
    riichi: view.riichi[rel],
    melds: meldPanel(view.melds[rel]),
    discards: discardLane(view.discards[rel]),
  }));

  const kyokuWind = WIND_LABELS[view.round_wind] ?? view.round_wind;
  const banner =
    `${kyokuWind} ${(view.kyoku % 4) + 1}` +
    (view.honba ? ` / honba ${view.honba}` : "") +
    ` / seat ${WIND_LABELS[view.seat_wind] ?? view.seat_wind}`;

  return {
    error: null,
    status: obs.legal.length > 0 ? "acting" : "waiting",
    revision: obs.revision,
    banner,
    wallCount: view.wall_count,
    pot: view.riichi_pot,
    doraIndicators: view.dora_indicators.map(sprite),
    seats,
    hand: sortHand(view.hand).map(sprite),
    drawn: view.drawn ? sprite(view.drawn) : null,
    hint: hintBars(obs.hint),
    actions: obs.legal.map((a) => ({
      id: a.id,
      label: actionLabel(a),
      tile: a.tile ?? null,
    })),
    result: null,
  };
}

// The probability bar next to each hand tile, in hand order. The
// service sends one entry per distinct kind; tiles of the same kind
// share it.
export function handHints(
  screen: ScreenState,
): { tile: TileSprite; p: number | null }[] {
  const byKind = new Map<number, number>();
  for (const bar of screen.hint ?? []) {
    byKind.set(kindIndex(bar.tile), bar.p);
  }
  const all = screen.drawn ? [...screen.hand, screen.drawn] : screen.hand;
  return all.map((tile) => ({
    tile,
    p: byKind.get(kindIndex(tile.name)) ?? null,
  }));
}
