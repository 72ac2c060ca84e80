/** Thin client over the gateway's public HTTP endpoints.
 *
 * The console never assembles invocation payloads; every mutation is a
 * session endpoint call, and the authoritative session is refetched
 * afterwards rather than patched locally.
 */

import type { SessionView } from "./model.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GatewayError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export interface MutationResult {
  session: SessionView;
  error: string | null;
}

export class GatewayClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(base: string, fetchImpl?: FetchLike) {
    this.base = base.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    return this.fetchImpl(this.base + path, init);
  }

  private async json(resp: Response): Promise<unknown> {
    try {
      return await resp.json();
    } catch {
      return null;
    }
  }

  private static detail(payload: unknown, fallback: string): string {
    if (typeof payload === "object" && payload !== null) {
      const d = (payload as Record<string, unknown>)["detail"];
      if (typeof d === "string") return d;
    }
    return fallback;
  }

  async listActions(): Promise<Record<string, unknown>[]> {
    const resp = await this.request("/actions");
    if (!resp.ok) throw new GatewayError(`actions answered ${resp.status}`, resp.status);
    const payload = await this.json(resp);
    if (!Array.isArray(payload)) throw new GatewayError("entry document is not a list", 0);
    return payload as Record<string, unknown>[];
  }

  async createSession(actionId: string): Promise<SessionView> {
    const resp = await this.request("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ actionId }),
    });
    const payload = await this.json(resp);
    if (resp.status !== 201) {
      throw new GatewayError(GatewayClient.detail(payload, `create answered ${resp.status}`), resp.status);
    }
    return payload as SessionView;
  }

  async getSession(id: string): Promise<SessionView> {
    const resp = await this.request(`/sessions/${id}`);
    const payload = await this.json(resp);
    if (!resp.ok) {
      throw new GatewayError(GatewayClient.detail(payload, `session answered ${resp.status}`), resp.status);
    }
    return payload as SessionView;
  }

  /** POST one mutation, then refetch the authoritative session state. */
  private async mutate(id: string, path: string, body?: unknown): Promise<MutationResult> {
    const resp = await this.request(`/sessions/${id}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? "{}" : JSON.stringify(body),
    });
    let error: string | null = null;
    if (!resp.ok) {
      error = GatewayClient.detail(await this.json(resp), `gateway answered ${resp.status}`);
    } else {
      await this.json(resp);
    }
    return { session: await this.getSession(id), error };
  }

  fillSlot(id: string, path: string, value: string): Promise<MutationResult> {
    return this.mutate(id, "/slots", { path, value });
  }

  invoke(id: string): Promise<MutationResult> {
    return this.mutate(id, "/invoke");
  }

  choose(id: string, index: number): Promise<MutationResult> {
    return this.mutate(id, "/choose", { index });
  }
}
