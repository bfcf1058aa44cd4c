// The client's only door to the outside. Everything is typed JSON
// over fetch; tests swap in a recorded transport with this interface.

import {
  CreateRequest,
  CreateResponse,
  EventChunk,
  ModelList,
  Observation,
  Rejection,
  SubmitResult,
} from "./protocol.js";

export interface Transport {
  create(body: CreateRequest): Promise<CreateResponse>;
  observation(sid: string): Promise<Observation>;
  submit(sid: string, action: string, key: string): Promise<SubmitResult>;
  events(sid: string, after: number): Promise<EventChunk>;
  transcript(sid: string): Promise<string>;
  models(): Promise<ModelList>;
}

// A refused submission: the server re-sent the legal set.
export class RejectedError extends Error {
  rejection: Rejection;

  constructor(rejection: Rejection) {
    super(rejection.error);
    this.rejection = rejection;
  }
}

export class HttpError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(`${status}: ${message}`);
    this.status = status;
  }
}

// the server wraps error payloads in {"detail": ...}
async function unwrap<T>(resp: Response): Promise<T> {
  if (resp.ok) {
    return (await resp.json()) as T;
  }
  let detail: unknown = await resp.text();
  try {
    detail = (JSON.parse(detail as string) as { detail: unknown }).detail;
  } catch {
    // not JSON: keep the raw text
  }
  if (resp.status === 409 && typeof detail === "object" && detail !== null) {
    throw new RejectedError(detail as Rejection);
  }
  throw new HttpError(resp.status, String(detail));
}

export class HttpTransport implements Transport {
  base: string;

  constructor(base: string) {
    this.base = base.replace(/\/$/, "");
  }

  private async get<T>(path: string): Promise<T> {
    return unwrap<T>(await fetch(this.base + path));
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    return unwrap<T>(
      await fetch(this.base + path, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  create(body: CreateRequest): Promise<CreateResponse> {
    return this.post("/sessions", body);
  }

  observation(sid: string): Promise<Observation> {
    return this.get(`/sessions/${sid}/observation`);
  }

  submit(sid: string, action: string, key: string): Promise<SubmitResult> {
    return this.post(`/sessions/${sid}/actions`, { action, key });
  }

  events(sid: string, after: number): Promise<EventChunk> {
    return this.get(`/sessions/${sid}/events?after=${after}`);
  }

  async transcript(sid: string): Promise<string> {
    const resp = await fetch(`${this.base}/sessions/${sid}/transcript`);
    if (!resp.ok) {
      await unwrap(resp); // throws
    }
    return resp.text();
  }

  models(): Promise<ModelList> {
    return this.get("/models");
  }
}
