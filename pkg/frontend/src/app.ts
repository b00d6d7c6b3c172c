import { ApiClient, ApiError } from "./api.js";
import { pollJobUntilDone } from "./poller.js";
import { renderComparison, renderSpecReview, renderTimeline } from "./views.js";
import type { SessionDoc } from "./types.js";

export interface AppOptions {
  /** Session poll cadence; also used for job polling. */
  intervalMs?: number;
}

export interface EditVerification {
  targetId: string;
  clientDiff: string;
  engineDiff: string;
  matches: boolean;
}

/**
 * Console controller. All session state lives in the engine; this class
 * holds only the last document it fetched and re-renders from polls, so a
 * mutation becomes visible the same way whether this tab or another one
 * made it.
 */
export class App {
  readonly client: ApiClient;
  sessionId: string | null = null;
  lastDoc: SessionDoc | null = null;
  lastEditVerification: EditVerification | null = null;
  jobRunning = false;

  private readonly intervalMs: number;
  private timer: ReturnType<typeof setInterval> | null = null;
  private renderedEvents = -1;
  private renderedStatus = "";

  private banner!: HTMLElement;
  private statusLine!: HTMLElement;
  private problemInput!: HTMLInputElement;
  private iterateButton!: HTMLButtonElement;
  private view!: HTMLElement;
  private timeline!: HTMLElement;

  constructor(client: ApiClient, root: HTMLElement, options: AppOptions = {}) {
    this.client = client;
    this.intervalMs = options.intervalMs ?? 1000;
    root.innerHTML = `
      <header class="topbar">
        <h1>coforge console</h1>
        <div id="status-line"></div>
        <div id="banner" hidden></div>
      </header>
      <section class="controls">
        <input id="problem-input" placeholder="problem statement" />
        <button id="create-session">new session</button>
        <button id="iterate" disabled>run iteration</button>
      </section>
      <div id="view"></div>
      <div id="timeline"></div>
    `;
    this.banner = root.querySelector<HTMLElement>("#banner")!;
    this.statusLine = root.querySelector<HTMLElement>("#status-line")!;
    this.problemInput = root.querySelector<HTMLInputElement>("#problem-input")!;
    this.iterateButton = root.querySelector<HTMLButtonElement>("#iterate")!;
    this.view = root.querySelector<HTMLElement>("#view")!;
    this.timeline = root.querySelector<HTMLElement>("#timeline")!;

    root.querySelector<HTMLButtonElement>("#create-session")!.addEventListener("click", () => {
      void this.create(this.problemInput.value);
    });
    this.iterateButton.addEventListener("click", () => {
      void this.iterate();
    });
  }

  setBanner(message: string): void {
    this.banner.textContent = message;
    this.banner.hidden = message === "";
  }

  async create(problemStatement: string): Promise<void> {
    if (!problemStatement.trim()) {
      this.setBanner("problem statement must be nonempty");
      return;
    }
    await this.guard(async () => {
      const doc = await this.client.createSession(problemStatement);
      this.adopt(doc);
    });
  }

  async open(sessionId: string): Promise<void> {
    await this.guard(async () => {
      const doc = await this.client.getSession(sessionId);
      this.adopt(doc);
    });
  }

  private adopt(doc: SessionDoc): void {
    this.sessionId = doc.session.session_id;
    this.lastDoc = doc;
    this.renderedEvents = -1;
    this.render(doc);
    this.startPolling();
  }

  startPolling(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      void this.poll();
    }, this.intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async poll(): Promise<void> {
    if (!this.sessionId) return;
    try {
      const doc = await this.client.getSession(this.sessionId);
      this.lastDoc = doc;
      this.render(doc);
    } catch {
      // transient fetch failures just wait for the next tick
    }
  }

  /** Event-log length the engine must still be at for a mutation to apply. */
  private expectedEvents(): number | undefined {
    return this.lastDoc ? this.lastDoc.events.length : undefined;
  }

  private async guard(action: () => Promise<void>): Promise<void> {
    try {
      await action();
    } catch (err) {
      if (err instanceof ApiError && err.stale) {
        this.setBanner("view was stale; refreshed to the latest state");
        await this.poll();
        return;
      }
      if (err instanceof ApiError) {
        this.setBanner(`${err.code}: ${err.message}`);
        return;
      }
      this.setBanner(String(err));
    }
  }

  async iterate(): Promise<void> {
    if (!this.sessionId) return;
    await this.guard(async () => {
      const started = await this.client.startIteration(this.sessionId!, this.expectedEvents());
      this.jobRunning = true;
      this.iterateButton.disabled = true;
      this.statusLine.textContent = `session ${this.sessionId}: iteration running...`;
      try {
        const job = await pollJobUntilDone(this.client, this.sessionId!, started.job_id, {
          intervalMs: this.intervalMs,
        });
        if (job.state === "failed") {
          const message = job.error ? job.error.message : "iteration failed";
          this.setBanner(message);
        }
      } finally {
        this.jobRunning = false;
      }
    });
  }

  private handlersFor(doc: SessionDoc) {
    return {
      onChoose: (chosenId: string) => {
        void this.guard(async () => {
          const updated = await this.client.sendFeedback(
            doc.session.session_id,
            "binary-choice",
            { chosen_id: chosenId },
            this.expectedEvents()
          );
          this.lastDoc = updated;
        });
      },
      onCritique: (text: string) => {
        void this.guard(async () => {
          const updated = await this.client.sendFeedback(
            doc.session.session_id,
            "nl-critique",
            { text },
            this.expectedEvents()
          );
          this.lastDoc = updated;
        });
      },
      onEdit: (targetId: string, content: string, clientDiff: string) => {
        void this.guard(async () => {
          const updated = await this.client.sendFeedback(
            doc.session.session_id,
            "direct-edit",
            { target_id: targetId, content },
            this.expectedEvents()
          );
          this.lastDoc = updated;
          this.verifyEdit(updated, targetId, clientDiff);
        });
      },
    };
  }

  /** Compare the diff shown in the editor with the one the engine stored. */
  private verifyEdit(doc: SessionDoc, targetId: string, clientDiff: string): void {
    const event = [...doc.events]
      .reverse()
      .find((e) => e.kind === "direct-edit" && e.payload.target_id === targetId);
    const engineDiff = event ? String(event.payload.diff ?? "") : "";
    const matches = engineDiff === clientDiff;
    this.lastEditVerification = { targetId, clientDiff, engineDiff, matches };
    this.setBanner(
      matches
        ? "edit saved; diff verified against engine"
        : "edit saved but the local diff disagrees with the engine's"
    );
  }

  private specHandlers(doc: SessionDoc) {
    return {
      onSubmit: (content: string) => {
        void this.guard(async () => {
          const updated = await this.client.editSpec(
            doc.session.session_id,
            content,
            this.expectedEvents()
          );
          this.lastDoc = updated;
        });
      },
      onApprove: () => {
        void this.guard(async () => {
          const updated = await this.client.approveSpec(
            doc.session.session_id,
            this.expectedEvents()
          );
          this.lastDoc = updated;
        });
      },
    };
  }

  render(doc: SessionDoc): void {
    // skip when nothing moved, so open editors survive poll ticks
    if (doc.events.length === this.renderedEvents && doc.session.status === this.renderedStatus) {
      return;
    }
    this.renderedEvents = doc.events.length;
    this.renderedStatus = doc.session.status;

    const s = doc.session;
    if (!this.jobRunning) {
      this.statusLine.textContent = `session ${s.session_id}: ${s.status}, ${doc.events.length} events`;
    }
    this.iterateButton.disabled = s.status !== "generating" || this.jobRunning;

    if (s.status === "awaiting-spec-review") {
      renderSpecReview(this.view, doc, this.specHandlers(doc));
    } else if (s.status === "awaiting-human-feedback") {
      renderComparison(this.view, doc, this.handlersFor(doc));
    } else if (s.status === "accepted" || s.status === "aborted") {
      this.view.innerHTML = `<p class="hint">Session ${esc(s.status)}.</p>`;
    } else {
      this.view.innerHTML = `<p class="hint">Waiting for the engine (${esc(s.status)}).</p>`;
    }
    renderTimeline(this.timeline, doc);
  }
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
