import type { ArtifactDoc, EventDoc, SessionDoc } from "./types.js";
import { displayContent, lineageOf } from "./types.js";
import { unifiedDiff } from "./diff.js";

// Render-only views. Every render starts from a fresh session document and
// replaces the container wholesale; nothing here is authoritative state.

export interface SpecHandlers {
  onSubmit(content: string): void;
  onApprove(): void;
}

export interface ComparisonHandlers {
  onChoose(chosenId: string): void;
  onCritique(text: string): void;
  onEdit(targetId: string, content: string, clientDiff: string): void;
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function currentSpec(doc: SessionDoc): ArtifactDoc | undefined {
  const specs = doc.graph.artifacts.filter((a) => a.level === 0);
  return specs[specs.length - 1];
}

export function renderSpecReview(root: HTMLElement, doc: SessionDoc, handlers: SpecHandlers): void {
  const spec = currentSpec(doc);
  const original = spec ? displayContent(spec) : "";
  root.innerHTML = `
    <section class="spec-review">
      <h2>Specification review</h2>
      <p class="hint">Edit the generated specification, or continue without edits.</p>
      <textarea id="spec-editor" rows="14" spellcheck="false"></textarea>
      <div class="row">
        <button id="spec-submit" disabled>Submit edit</button>
        <button id="spec-approve">Continue without edits</button>
      </div>
    </section>
  `;
  const editor = root.querySelector<HTMLTextAreaElement>("#spec-editor")!;
  const submit = root.querySelector<HTMLButtonElement>("#spec-submit")!;
  const approve = root.querySelector<HTMLButtonElement>("#spec-approve")!;
  editor.value = original;
  editor.addEventListener("input", () => {
    submit.disabled = editor.value === original;
  });
  submit.addEventListener("click", () => handlers.onSubmit(editor.value));
  approve.addEventListener("click", () => handlers.onApprove());
}

function paneError(pane: HTMLElement, message: string): void {
  const slot = pane.querySelector<HTMLElement>(".inline-error")!;
  slot.textContent = message;
  slot.hidden = message === "";
}

function buildPane(
  doc: SessionDoc,
  artifactId: string,
  side: "left" | "right",
  handlers: ComparisonHandlers
): HTMLElement {
  const chain = lineageOf(doc, artifactId);
  const artifact = chain[chain.length - 1];
  const outline = chain.find((a) => a.level === 1);
  const program = displayContent(artifact);

  const pane = document.createElement("article");
  pane.className = "pane";
  pane.dataset.artifactId = artifactId;
  pane.dataset.side = side;
  pane.innerHTML = `
    <header>
      <span class="artifact-id">${esc(artifactId)}</span>
      <span class="badge badge-${esc(artifact.provenance)}">${esc(artifact.provenance)}</span>
      <button class="toggle-view" ${outline ? "" : "disabled"}>show outline</button>
      <button class="edit-toggle">edit</button>
    </header>
    <pre class="artifact-content"></pre>
    <div class="editor" hidden>
      <textarea rows="12" spellcheck="false"></textarea>
      <pre class="diff-view"></pre>
      <div class="row">
        <button class="edit-save">Save edit</button>
        <button class="edit-cancel">Cancel</button>
      </div>
    </div>
    <p class="inline-error" hidden></p>
    <button class="choose" id="choose-${side}">choose ${side}</button>
  `;

  const content = pane.querySelector<HTMLPreElement>(".artifact-content")!;
  content.textContent = program;

  const toggle = pane.querySelector<HTMLButtonElement>(".toggle-view")!;
  let showingOutline = false;
  toggle.addEventListener("click", () => {
    if (!outline) return;
    showingOutline = !showingOutline;
    content.textContent = showingOutline ? displayContent(outline) : program;
    toggle.textContent = showingOutline ? "show program" : "show outline";
  });

  const editor = pane.querySelector<HTMLElement>(".editor")!;
  const textarea = pane.querySelector<HTMLTextAreaElement>(".editor textarea")!;
  const diffView = pane.querySelector<HTMLPreElement>(".diff-view")!;
  const editToggle = pane.querySelector<HTMLButtonElement>(".edit-toggle")!;

  const refreshDiff = () => {
    const diff = unifiedDiff(program, textarea.value, `artifact-${artifactId}`);
    diffView.textContent = diff === "" ? "(no changes)" : diff;
  };

  editToggle.addEventListener("click", () => {
    editor.hidden = !editor.hidden;
    editToggle.textContent = editor.hidden ? "edit" : "close editor";
    paneError(pane, "");
    if (!editor.hidden) {
      textarea.value = program;
      refreshDiff();
    }
  });
  textarea.addEventListener("input", refreshDiff);

  pane.querySelector<HTMLButtonElement>(".edit-cancel")!.addEventListener("click", () => {
    editor.hidden = true;
    editToggle.textContent = "edit";
    paneError(pane, "");
  });

  pane.querySelector<HTMLButtonElement>(".edit-save")!.addEventListener("click", () => {
    // identical content would be rejected by the engine anyway; catch it
    // here so no request is made at all
    if (textarea.value === program) {
      paneError(pane, "no changes to save");
      return;
    }
    if (!textarea.value.trim()) {
      paneError(pane, "replacement content is empty");
      return;
    }
    paneError(pane, "");
    const diff = unifiedDiff(program, textarea.value, `artifact-${artifactId}`);
    handlers.onEdit(artifactId, textarea.value, diff);
  });

  pane.querySelector<HTMLButtonElement>(".choose")!.addEventListener("click", () => {
    handlers.onChoose(artifactId);
  });

  return pane;
}

export function renderComparison(
  root: HTMLElement,
  doc: SessionDoc,
  handlers: ComparisonHandlers
): void {
  root.innerHTML = "";
  const finalists = doc.session.current_finalists;
  if (!finalists) {
    root.innerHTML = `<p class="hint">No finalist pair yet. Run an iteration.</p>`;
    return;
  }
  const section = document.createElement("section");
  section.className = "comparison";
  section.innerHTML = `<h2>Finalist comparison</h2>`;
  const panes = document.createElement("div");
  panes.className = "panes";
  panes.appendChild(buildPane(doc, finalists[0], "left", handlers));
  panes.appendChild(buildPane(doc, finalists[1], "right", handlers));
  section.appendChild(panes);

  const critique = document.createElement("div");
  critique.className = "critique";
  critique.innerHTML = `
    <h3>Critique instead</h3>
    <textarea id="critique-text" rows="3" spellcheck="false"
      placeholder="What should the next round do differently?"></textarea>
    <p class="inline-error" hidden></p>
    <button id="critique-submit">Send critique</button>
  `;
  const text = critique.querySelector<HTMLTextAreaElement>("#critique-text")!;
  const error = critique.querySelector<HTMLElement>(".inline-error")!;
  critique.querySelector<HTMLButtonElement>("#critique-submit")!.addEventListener("click", () => {
    if (!text.value.trim()) {
      error.textContent = "critique text must be nonempty";
      error.hidden = false;
      return;
    }
    error.hidden = true;
    handlers.onCritique(text.value);
  });
  section.appendChild(critique);
  root.appendChild(section);
}

function eventSummary(event: EventDoc): string {
  const p = event.payload;
  switch (event.kind) {
    case "session-created":
      return String(p.problem_statement ?? "").slice(0, 80);
    case "spec-generated":
      return `specification ${p.artifact_id}`;
    case "spec-edit":
      return `${p.artifact_id} replaces ${p.replaces}`;
    case "spec-approved":
      return `approved ${p.artifact_id}`;
    case "iteration-started":
      return `iteration ${p.index} from ${p.specification_id}`;
    case "candidates-generated":
      return `${(p.ids as string[]).length} candidates under ${p.parent_id}`;
    case "match-judged":
      return `round ${p.round}: ${(p.match as string[]).join(" vs ")}, winner ${p.winner}`;
    case "tournament-completed":
      return `finalists ${(p.finalists as string[]).join(", ")} after ${p.match_count} matches`;
    case "programs-generated":
      return `programs ${(p.ids as string[]).join(", ")}`;
    case "iteration-completed":
      return `iteration ${p.index} done`;
    case "iteration-failed":
      return `iteration ${p.index} failed: ${p.error}`;
    case "binary-choice":
      return `chose ${p.chosen_id}`;
    case "nl-critique":
      return String(p.text ?? "").slice(0, 80);
    case "direct-edit":
      return `edited ${p.target_id} (implicit preference recorded)`;
    case "execution-report":
      return `${p.target_id} ${p.ran ? "ran cleanly" : "failed to run"}`;
    case "utilities-refit":
      return `${p.record_count} records, converged=${p.converged}`;
    case "accept":
      return `accepted ${p.artifact_id}`;
    case "abort":
      return String(p.reason ?? "");
    default:
      return "";
  }
}

export function renderTimeline(root: HTMLElement, doc: SessionDoc): void {
  const rows = doc.events
    .map((event) => {
      const summary = eventSummary(event);
      return `
        <li class="event" data-kind="${esc(event.kind)}" data-index="${event.index}">
          <span class="event-index">#${event.index}</span>
          <span class="badge badge-${esc(event.kind)}">${esc(event.kind)}</span>
          <span class="event-source">${esc(event.source)}</span>
          <span class="event-summary">${esc(summary)}</span>
        </li>`;
    })
    .join("");

  const iterations = doc.iterations
    .map((it) => {
      const matches = it.tournament_outcome ? it.tournament_outcome.match_log.length : 0;
      const note = it.error ? ` (${esc(it.error)})` : "";
      return `<li>iteration ${it.index}: ${matches} matches played${note}</li>`;
    })
    .join("");

  const snapshot = doc.session.utility_snapshot;
  let leaderboard = `<p class="hint">No utility estimate yet.</p>`;
  if (snapshot) {
    const sorted = Object.entries(snapshot.scores).sort(
      (x, y) => y[1] - x[1] || (x[0] < y[0] ? -1 : 1)
    );
    leaderboard = `
      <table class="leaderboard">
        <thead><tr><th>artifact</th><th>score</th></tr></thead>
        <tbody>
          ${sorted
            .map(
              ([aid, score]) =>
                `<tr><td>${esc(aid)}</td><td>${score.toFixed(4)}</td></tr>`
            )
            .join("")}
        </tbody>
      </table>`;
  }

  root.innerHTML = `
    <section class="timeline">
      <h2>Timeline</h2>
      <ol class="events">${rows}</ol>
      <h3>Iterations</h3>
      <ul class="iteration-counts">${iterations || "<li>none yet</li>"}</ul>
      <h3>Utility leaderboard</h3>
      ${leaderboard}
    </section>
  `;
}
