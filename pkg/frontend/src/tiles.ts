// Display helpers for tile notation: "1m".."9m" (0m = red five),
// same for p/s, honors E S W N Hk Ht Ch. No rule logic lives here;
// the server decides everything. We only need ordering and labels.

const SUITS = "mps";
const HONORS = ["E", "S", "W", "N", "Hk", "Ht", "Ch"];

const HONOR_LABELS: Record<string, string> = {
  E: "East",
  S: "South",
  W: "West",
  N: "North",
  Hk: "Haku",
  Ht: "Hatsu",
  Ch: "Chun",
};

export function isAka(name: string): boolean {
  return name.length === 2 && name[0] === "0";
}

// 0..33 in hand-sort order; aka counts as its suit's five.
export function kindIndex(name: string): number {
  const honor = HONORS.indexOf(name);
  if (honor >= 0) {
    return 27 + honor;
  }
  const suit = SUITS.indexOf(name[1]);
  const rank = Number(name[0]);
  if (suit < 0 || !Number.isInteger(rank)) {
    throw new Error(`bad tile name: ${name}`);
  }
  return suit * 9 + (rank === 0 ? 5 : rank) - 1;
}

// Mirrors the server's hand order: by kind, red fives after plain.
export function sortHand(names: string[]): string[] {
  return [...names].sort((a, b) => {
    const ka = kindIndex(a);
    const kb = kindIndex(b);
    if (ka !== kb) {
      return ka - kb;
    }
    return Number(isAka(a)) - Number(isAka(b));
  });
}

export function tileLabel(name: string): string {
  if (name in HONOR_LABELS) {
    return HONOR_LABELS[name];
  }
  if (isAka(name)) {
    return `red 5${name[1]}`;
  }
  return name;
}

export const SEAT_NAMES = ["you", "right", "across", "left"];
