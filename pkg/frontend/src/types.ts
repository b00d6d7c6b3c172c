// Mirrors of the engine's session document. Field names match the JSON
// the service returns (which is also the on-disk session file layout).

export type SessionStatus =
  | "awaiting-spec-review"
  | "generating"
  | "awaiting-human-feedback"
  | "accepted"
  | "aborted";

export type Provenance = "generated" | "human-edited" | "seed";

export interface ArtifactDoc {
  id: string;
  level: number;
  content: string;
  parent_id: string | null;
  provenance: Provenance;
  created_at: number;
  metadata: Record<string, unknown>;
}

export interface LevelDoc {
  index: number;
  name: string;
  content_kind: string;
}

export interface GraphDoc {
  levels: LevelDoc[];
  artifacts: ArtifactDoc[];
  next_id: number;
}

export interface EventDoc {
  index: number;
  kind: string;
  source: "human" | "system";
  payload: Record<string, unknown>;
}

export interface PreferenceRecordDoc {
  winner_id: string;
  loser_id: string;
  source: "human" | "judge";
  justification: string | null;
  event_index: number;
}

export interface UtilitySnapshotDoc {
  scores: Record<string, number>;
  regularization: number;
  iterations_used: number;
  converged: boolean;
  log_likelihood: number;
}

export interface MatchDoc {
  round: number;
  match: [string, string];
  winner: string;
  justification: string;
  judge_name: string;
}

export interface TournamentOutcomeDoc {
  finalists: [string, string];
  match_log: MatchDoc[];
  summary: string;
  seed: number;
  bracket: Record<string, unknown>;
}

export interface IterationDoc {
  index: number;
  candidate_ids: string[];
  tournament_outcome: TournamentOutcomeDoc | null;
  finalist_program_ids: [string, string] | null;
  human_feedback_indices: number[];
  context_summary: string;
  generation_context: string;
  error: string | null;
}

export interface SessionDoc {
  schema_version: number;
  session: {
    session_id: string;
    problem_statement: string;
    preference_log: PreferenceRecordDoc[];
    current_finalists: [string, string] | null;
    utility_snapshot: UtilitySnapshotDoc | null;
    policy: Record<string, unknown>;
    seed: number;
    status: SessionStatus;
  };
  graph: GraphDoc;
  events: EventDoc[];
  iterations: IterationDoc[];
}

export interface SessionSummary {
  session_id: string;
  status: SessionStatus;
  problem_statement: string;
  events: number;
  iterations: number;
}

export interface JobDoc {
  job_id: string;
  kind: string;
  state: "pending" | "running" | "done" | "failed";
  error: ErrorEnvelope | null;
  result: {
    iteration?: number;
    finalists?: string[];
    status?: SessionStatus;
    error?: string;
  } | null;
}

export interface ErrorEnvelope {
  code: "validation" | "unknown-id" | "wrong-status" | "backend-failure";
  message: string;
  detail: unknown;
}

export interface ArtifactWithLineage {
  artifact: ArtifactDoc;
  lineage: ArtifactDoc[];
}

export interface UtilityRow {
  artifact_id: string;
  score: number;
}

export interface UtilityTable {
  utilities: UtilityRow[];
  record_count: number;
  converged?: boolean;
}

export type FeedbackKind =
  | "binary-choice"
  | "nl-critique"
  | "direct-edit"
  | "execution-report"
  | "accept"
  | "abort";

// The mock generator hides a quality score in a trailer the engine strips
// before display; the console strips it the same way.
const UTILITY_TAG = /\n?\n?\[\[utility:-?\d+\.\d{6}\]\]\s*$/;

export function displayContent(artifact: ArtifactDoc): string {
  return artifact.content.replace(UTILITY_TAG, "");
}

export function artifactById(doc: SessionDoc, id: string): ArtifactDoc | undefined {
  return doc.graph.artifacts.find((a) => a.id === id);
}

export function lineageOf(doc: SessionDoc, id: string): ArtifactDoc[] {
  const chain: ArtifactDoc[] = [];
  let cursor = artifactById(doc, id);
  while (cursor) {
    chain.unshift(cursor);
    cursor = cursor.parent_id ? artifactById(doc, cursor.parent_id) : undefined;
  }
  return chain;
}
