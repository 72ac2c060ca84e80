/** Controller: one active session, server-authoritative state, no optimism. */

import { GatewayClient } from "./api.js";
import { SessionView } from "./model.js";
import { Handlers, renderActionList, renderSession } from "./render.js";

export class ConsoleApp {
  private session: SessionView | null = null;
  private annotations: Record<string, unknown>[] = [];
  private pages = 1;
  private notice: string | null = null;
  private queue: Promise<void> = Promise.resolve();

  constructor(
    private readonly root: Element,
    private readonly client: GatewayClient,
  ) {}

  /** Every UI event is serialized here; `idle()` awaits the backlog. */
  private enqueue(step: () => Promise<void>): void {
    this.queue = this.queue.then(step).catch((err) => {
      this.notice = err instanceof Error ? err.message : String(err);
      this.render();
    });
  }

  idle(): Promise<void> {
    return this.queue;
  }

  private readonly handlers: Handlers = {
    onSelect: (actionId) => this.enqueue(() => this.select(actionId)),
    onFill: (path, value) => this.enqueue(() => this.fill(path, value)),
    onInvoke: () => this.enqueue(() => this.invoke()),
    onChoose: (index) => this.enqueue(() => this.choose(index)),
    onMore: () => {
      this.pages += 1;
      this.render();
    },
    onRestart: () => this.enqueue(() => this.restart()),
  };

  start(): Promise<void> {
    this.enqueue(async () => {
      this.annotations = await this.client.listActions();
      this.render();
    });
    return this.idle();
  }

  private async select(actionId: string): Promise<void> {
    const created = await this.client.createSession(actionId);
    this.session = await this.client.getSession(created.id);
    this.pages = 1;
    this.notice = null;
    this.render();
  }

  private async fill(path: string, value: string): Promise<void> {
    if (!this.session) return;
    const result = await this.client.fillSlot(this.session.id, path, value);
    this.session = result.session;
    this.notice = result.error;
    this.render();
  }

  private async invoke(): Promise<void> {
    if (!this.session) return;
    const result = await this.client.invoke(this.session.id);
    this.session = result.session;
    this.pages = 1;
    this.notice = result.error;
    this.render();
  }

  private async choose(index: number): Promise<void> {
    if (!this.session) return;
    const result = await this.client.choose(this.session.id, index);
    this.session = result.session;
    this.notice = result.error;
    this.render();
  }

  private async restart(): Promise<void> {
    this.session = null;
    this.pages = 1;
    this.notice = null;
    this.annotations = await this.client.listActions();
    this.render();
  }

  private render(): void {
    if (this.session) {
      renderSession(this.root, this.session, this.pages, this.notice, this.handlers);
    } else {
      renderActionList(this.root, this.annotations, this.handlers);
      if (this.notice) {
        const p = this.root.ownerDocument.createElement("p");
        p.className = "notice";
        p.textContent = this.notice;
        this.root.appendChild(p);
      }
    }
  }
}
