// DOM glue: one form to open a session, one render loop, click
// handlers that forward ids from the legal set and nothing else.

import { ClientSession } from "./client.js";
import { handHints, render, ScreenState } from "./render.js";
import { PlayerEntry } from "./protocol.js";
import { HttpTransport, RejectedError } from "./transport.js";

const app = document.getElementById("app")!;
let session: ClientSession | null = null;

function el(
  tag: string,
  cls: string,
  text?: string,
  children?: HTMLElement[],
): HTMLElement {
  const node = document.createElement(tag);
  node.className = cls;
  if (text !== undefined) {
    node.textContent = text;
  }
  for (const child of children ?? []) {
    node.appendChild(child);
  }
  return node;
}

function tileNode(name: string, aka: boolean, extra = ""): HTMLElement {
  const node = el("span", `tile${aka ? " aka" : ""}${extra}`, name);
  return node;
}

function seatBlock(screen: ScreenState, rel: number): HTMLElement {
  const seat = screen.seats[rel];
  const head = el(
    "div",
    "seat-head",
    `${seat.title}  ${seat.score}  #${seat.rank}` +
      (seat.riichi ? "  riichi" : ""),
  );
  if (seat.riichi) {
    head.appendChild(el("span", "stick", "▮"));
  }
  const lane = el("div", "lane");
  for (const d of seat.discards) {
    lane.appendChild(
      tileNode(d.name, d.aka, (d.riichi ? " riichi" : "") +
        (d.called ? " called" : "")),
    );
  }
  const melds = el("div", "melds");
  for (const m of seat.melds) {
    const box = el("span", "meld", `${m.type}:`);
    for (const t of m.tiles) {
      box.appendChild(tileNode(t.name, t.aka));
    }
    melds.appendChild(box);
  }
  return el("div", `seat seat-${rel}`, undefined, [head, lane, melds]);
}

function draw(screen: ScreenState): void {
  app.textContent = "";
  if (screen.error) {
    app.appendChild(el("div", "error-banner", screen.error));
    return;
  }
  const top = el(
    "div",
    "banner",
    `${screen.banner}  ·  wall ${screen.wallCount ?? "-"}` +
      `  ·  pot ${screen.pot}`,
  );
  const dora = el("div", "dora", "dora: ");
  for (const t of screen.doraIndicators) {
    dora.appendChild(tileNode(t.name, t.aka));
  }
  app.appendChild(top);
  app.appendChild(dora);

  if (screen.result) {
    const r = screen.result;
    app.appendChild(el("div", "result", `final scores: ${r.scores.join(
      " / ",
    )} (ranks ${r.ranks.join(" ")})`));
    app.appendChild(el(
      "div",
      `conservation ${r.conserved ? "ok" : "broken"}`,
      `points total ${r.total}` +
        (r.conserved ? " = 100000, conserved" : " — NOT 100000"),
    ));
    return;
  }

  for (const rel of [2, 3, 1, 0]) {
    app.appendChild(seatBlock(screen, rel));
  }

  const hints = handHints(screen);
  const hand = el("div", "hand");
  for (const { tile, p } of hints) {
    const wrap = el("span", "slot");
    wrap.appendChild(tileNode(tile.name, tile.aka));
    if (p !== null) {
      const bar = el("span", "hint-bar");
      bar.style.width = `${Math.round(p * 40)}px`;
      bar.title = p.toFixed(3);
      wrap.appendChild(bar);
    }
    hand.appendChild(wrap);
  }
  if (screen.drawn) {
    hand.appendChild(el("span", "drawn-gap", " "));
  }
  app.appendChild(hand);

  const buttons = el("div", "actions");
  for (const action of screen.actions) {
    const btn = document.createElement("button");
    btn.textContent = action.label;
    btn.onclick = () => {
      void act(action.id);
    };
    buttons.appendChild(btn);
  }
  app.appendChild(buttons);
}

async function act(id: string): Promise<void> {
  if (!session) {
    return;
  }
  try {
    await session.act(id);
  } catch (err) {
    if (!(err instanceof RejectedError)) {
      console.error(err);
    }
  }
  draw(render(session.observation));
}

async function start(): Promise<void> {
  const seat = Number(
    (document.getElementById("seat") as HTMLSelectElement).value,
  );
  const hints = (document.getElementById("hints") as HTMLInputElement)
    .checked;
  const bots = (document.getElementById("bots") as HTMLSelectElement)
    .value as PlayerEntry;
  const players: PlayerEntry[] = [bots, bots, bots, bots];
  const transport = new HttpTransport("");
  session = await ClientSession.create(transport, {
    players,
    human_seat: seat,
    hints,
  });
  draw(render(session.observation));
}

document.getElementById("start")!.addEventListener("click", () => {
  void start().catch((err) => {
    app.textContent = "";
    app.appendChild(el("div", "error-banner", String(err)));
  });
});

// catch bot progress if another tab acted, or after reconnects
setInterval(() => {
  if (session && !session.over) {
    void session.refresh().then(() => draw(render(session!.observation)));
  }
}, 2000);
