import type {
  ArtifactWithLineage,
  ErrorEnvelope,
  FeedbackKind,
  JobDoc,
  SessionDoc,
  SessionSummary,
  UtilityTable,
} from "./types.js";

/** Engine error envelope surfaced as a throwable, keeping the code. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: ErrorEnvelope["code"];
  readonly detail: unknown;

  constructor(status: number, envelope: ErrorEnvelope) {
    super(envelope.message);
    this.name = "ApiError";
    this.status = status;
    this.code = envelope.code;
    this.detail = envelope.detail;
  }

  /** The caller's view of the event log was behind the engine's. */
  get stale(): boolean {
    return this.status === 412;
  }
}

export interface StartedIteration {
  job_id: string;
  poll: string;
}

export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await fetch(this.baseUrl + path, init);
    const text = await response.text();
    const data = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError(response.status, data as ErrorEnvelope);
    }
    return data as T;
  }

  health(): Promise<{ status: string; sessions: number }> {
    return this.request("GET", "/healthz");
  }

  listSessions(): Promise<{ sessions: SessionSummary[] }> {
    return this.request("GET", "/sessions");
  }

  createSession(
    problemStatement: string,
    options: { policy?: Record<string, unknown>; seed?: number } = {}
  ): Promise<SessionDoc> {
    return this.request("POST", "/sessions", {
      problem_statement: problemStatement,
      ...(options.policy ? { policy: options.policy } : {}),
      ...(options.seed !== undefined ? { seed: options.seed } : {}),
    });
  }

  getSession(sessionId: string): Promise<SessionDoc> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  editSpec(sessionId: string, content: string, expectedEvents?: number): Promise<SessionDoc> {
    return this.request("POST", `/sessions/${sessionId}/spec`, {
      content,
      ...(expectedEvents !== undefined ? { expected_events: expectedEvents } : {}),
    });
  }

  approveSpec(sessionId: string, expectedEvents?: number): Promise<SessionDoc> {
    return this.request("POST", `/sessions/${sessionId}/spec`, {
      approve: true,
      ...(expectedEvents !== undefined ? { expected_events: expectedEvents } : {}),
    });
  }

  startIteration(sessionId: string, expectedEvents?: number): Promise<StartedIteration> {
    return this.request("POST", `/sessions/${sessionId}/iterations`, {
      ...(expectedEvents !== undefined ? { expected_events: expectedEvents } : {}),
    });
  }

  getJob(sessionId: string, jobId: string): Promise<JobDoc> {
    return this.request("GET", `/sessions/${sessionId}/jobs/${jobId}`);
  }

  sendFeedback(
    sessionId: string,
    kind: FeedbackKind,
    payload: Record<string, unknown>,
    expectedEvents?: number
  ): Promise<SessionDoc> {
    return this.request("POST", `/sessions/${sessionId}/feedback`, {
      kind,
      payload,
      ...(expectedEvents !== undefined ? { expected_events: expectedEvents } : {}),
    });
  }

  getArtifact(sessionId: string, artifactId: string): Promise<ArtifactWithLineage> {
    return this.request("GET", `/sessions/${sessionId}/artifacts/${artifactId}`);
  }

  getUtilities(sessionId: string): Promise<UtilityTable> {
    return this.request("GET", `/sessions/${sessionId}/utilities`);
  }
}
