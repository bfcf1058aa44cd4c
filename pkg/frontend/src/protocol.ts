// Wire types for the play service. Every payload carries the encoder
// layout tag in "v"; a client built for one layout refuses another.

export const LAYOUT = "mj86-v1";

export type ActionId = string; // "discard:7p", "chi:mid", "pon", "ron", ...

export interface LegalAction {
  id: ActionId;
  tile?: string;
  kind?: string;
  variant?: string;
}

export interface MeldData {
  type: string;
  tiles: string[];
  from: number;
  called: string | null;
}

export interface DiscardData {
  tile: string;
  riichi: boolean;
  called: boolean;
}

// The human's own projection. Seat arrays are relative:
// 0 self, 1 right, 2 across, 3 left.
export interface ViewData {
  viewer: number;
  hand: string[];
  drawn: string | null;
  melds: MeldData[][];
  discards: DiscardData[][];
  riichi: boolean[];
  dora_indicators: string[];
  round_wind: string;
  seat_wind: string;
  kyoku: number;
  honba: number;
  riichi_pot: number;
  scores: number[];
  ranks: number[];
  wall_count: number;
}

export interface HintEntry {
  tile: string;
  p: number;
}

export interface Observation {
  v: string;
  session: string;
  revision: number;
  seat: number;
  status: "acting" | "over";
  deadline: number | null;
  legal: LegalAction[];
  view: ViewData | null;
  hint?: HintEntry[] | null;
  scores?: number[];
  ranks?: number[];
}

export interface CreateResponse {
  v: string;
  session: string;
  observation: Observation;
}

export interface SubmitResult {
  v: string;
  applied: ActionId;
  revision: number;
  status: "acting" | "over";
}

// 409 payload: the submission was refused and the current legal set
// rides along so the client can re-render without an extra round trip.
export interface Rejection {
  error: string;
  legal: LegalAction[];
}

export interface StreamEvent {
  seq: number;
  [key: string]: unknown;
}

export interface EventChunk {
  v: string;
  events: StreamEvent[];
  next: number;
  done: boolean;
}

export interface ModelEntry {
  file: string;
  task?: string | null;
  layout?: string | null;
  error?: string;
}

export interface ModelList {
  v: string;
  models: ModelEntry[];
}

export type PlayerEntry =
  | "random"
  | "greedy-shanten"
  | { head_paths: Record<string, string>; seed?: number };

export interface CreateRequest {
  players: PlayerEntry[];
  human_seat?: number;
  seed?: number;
  hints?: boolean;
  ruleset?: Record<string, unknown>;
}
