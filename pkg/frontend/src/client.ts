// Session state machine. One rule above all others: an action goes to
// the server only if its id is in the legal set of the observation we
// are currently showing. There is no client-side game logic to argue
// with the server, so a stale click is simply refused locally or, if
// it races a bot turn, bounced by the server with a fresh legal set.

import {
  CreateRequest,
  LegalAction,
  Observation,
  StreamEvent,
  SubmitResult,
  LAYOUT,
} from "./protocol.js";
import { RejectedError, Transport } from "./transport.js";

export class VersionError extends Error {}

export interface ActOutcome {
  result: SubmitResult | null; // null: refused, observation refreshed
  observation: Observation;
}

function checkVersion(v: string): void {
  if (v !== LAYOUT) {
    throw new VersionError(
      `layout mismatch: server ${v}, client ${LAYOUT}`,
    );
  }
}

export class ClientSession {
  transport: Transport;
  sid: string;
  observation: Observation;
  cursor = 0;
  log: StreamEvent[] = [];
  private inflight: Promise<ActOutcome> | null = null;
  private keyCounter = 0;

  private constructor(transport: Transport, sid: string, obs: Observation) {
    this.transport = transport;
    this.sid = sid;
    this.observation = obs;
  }

  static async create(
    transport: Transport,
    request: CreateRequest,
  ): Promise<ClientSession> {
    const resp = await transport.create(request);
    checkVersion(resp.v);
    const session = new ClientSession(
      transport,
      resp.session,
      resp.observation,
    );
    await session.pump();
    return session;
  }

  get legal(): LegalAction[] {
    return this.observation.legal;
  }

  get over(): boolean {
    return this.observation.status === "over";
  }

  isLegal(id: string): boolean {
    return this.legal.some((a) => a.id === id);
  }

  async refresh(): Promise<Observation> {
    const obs = await this.transport.observation(this.sid);
    checkVersion(obs.v);
    this.observation = obs;
    return obs;
  }

  // Pull every event we have not seen yet into the log.
  async pump(): Promise<StreamEvent[]> {
    const chunk = await this.transport.events(this.sid, this.cursor);
    checkVersion(chunk.v);
    this.log.push(...chunk.events);
    this.cursor = chunk.next;
    return chunk.events;
  }

  // Submit a choice from the current legal set. While one submission
  // is in flight the session is locked: a double click joins the same
  // promise instead of posting twice. Network failures retry with the
  // same idempotency key, so the server applies the action once no
  // matter how many attempts it takes.
  act(id: string): Promise<ActOutcome> {
    if (this.inflight) {
      return this.inflight;
    }
    if (!this.isLegal(id)) {
      return Promise.reject(
        new Error(`${id} is not in the current legal set`),
      );
    }
    const key = `${this.sid}-${this.observation.revision}-${this
      .keyCounter++}`;
    this.inflight = this.submitWithRetry(id, key).finally(() => {
      this.inflight = null;
    });
    return this.inflight;
  }

  private async submitWithRetry(
    id: string,
    key: string,
    attempts = 3,
  ): Promise<ActOutcome> {
    for (let attempt = 1; ; attempt++) {
      try {
        const result = await this.transport.submit(this.sid, id, key);
        checkVersion(result.v);
        await this.refresh();
        await this.pump();
        return { result, observation: this.observation };
      } catch (err) {
        if (err instanceof RejectedError) {
          // lost a race or clicked stale UI: adopt the legal set the
          // server sent back and let the caller re-render
          this.observation = {
            ...this.observation,
            legal: err.rejection.legal,
          };
          await this.refresh();
          await this.pump();
          return { result: null, observation: this.observation };
        }
        if (err instanceof VersionError || attempt >= attempts) {
          throw err;
        }
        await new Promise((tick) => setTimeout(tick, 50 * attempt));
      }
    }
  }

  async transcript(): Promise<string> {
    return this.transport.transcript(this.sid);
  }
}
