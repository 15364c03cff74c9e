// Three-panel layout: (1) parameters, (2) candidate review and curation,
// (3) analysis with distribution chart, gaps, assessments, and downloads.
// The whole view re-renders from (server session, view state) on every
// store change; form inputs are read at submit time.

import type { App } from "./app.js";
import { renderDistributionChart } from "./chart.js";
import { esc } from "./html.js";
import type { Store, UiState } from "./store.js";
import {
  BLOOM_LEVELS,
  GRADE_LEVELS,
  allCandidates,
  latestReport,
  type ObjectiveView,
  type SessionView,
  type SpecView,
} from "./types.js";

const CRITERIA = ["structural", "taxonomic", "measurable", "clarity", "technical"] as const;

export function mountView(root: HTMLElement, store: Store, app: App): void {
  root.innerHTML = `
    <header class="topbar">
      <h1>arched</h1>
      <nav class="steps"></nav>
      <span class="session-label"></span>
    </header>
    <div class="banner" hidden></div>
    <main class="panels"></main>
  `;
  const rerender = (state: UiState) => render(root, state, app);
  store.subscribe(rerender);
  render(root, store.state, app);
}

function render(root: HTMLElement, state: UiState, app: App): void {
  const banner = root.querySelector<HTMLElement>(".banner")!;
  if (state.conflict) {
    banner.hidden = false;
    banner.className = "banner conflict";
    banner.innerHTML =
      `<span>This session changed elsewhere. Reload to continue.</span>` +
      `<button data-action="reload-session">Reload session</button>`;
  } else if (state.error) {
    banner.hidden = false;
    banner.className = "banner error";
    banner.textContent = state.error;
  } else {
    banner.hidden = true;
    banner.textContent = "";
  }

  const label = root.querySelector<HTMLElement>(".session-label")!;
  const session = state.session;
  label.textContent = session
    ? `${session.title} — ${session.state} (v${session.version})`
    : "no session";

  const nav = root.querySelector<HTMLElement>(".steps")!;
  nav.innerHTML = ([1, 2, 3] as const)
    .map(
      (panel) =>
        `<button class="step${state.activePanel === panel ? " active" : ""}" data-panel="${panel}">` +
        `${panel}. ${["Parameters", "Candidates", "Analysis"][panel - 1]}</button>`,
    )
    .join("");

  const main = root.querySelector<HTMLElement>(".panels")!;
  if (state.activePanel === 1) {
    main.innerHTML = renderParametersPanel(session, state.busy);
  } else if (state.activePanel === 2) {
    main.innerHTML = renderCandidatesPanel(session, state.busy);
  } else {
    main.innerHTML = renderAnalysisPanel(session, state.busy);
  }

  bind(root, app);
}

function renderParametersPanel(session: SessionView | null, busy: boolean): string {
  const spec = session?.spec;
  const checked = (level: string) =>
    !spec || spec.target_levels.includes(level as never) ? "checked" : "";
  const gradeOptions = GRADE_LEVELS.map(
    (grade) =>
      `<option value="${grade}" ${spec?.grade_level === grade ? "selected" : ""}>${grade}</option>`,
  ).join("");
  const levelBoxes = BLOOM_LEVELS.map(
    (level) =>
      `<label class="level-box"><input type="checkbox" name="level" value="${level}" ${checked(level)}> ${level}</label>`,
  ).join("");
  return `
    <section class="panel panel-parameters">
      <h2>Generation parameters</h2>
      <form id="spec-form">
        <label>Session title <input name="title" required value="${esc(session?.title ?? "")}"></label>
        <label>Grade level <select name="grade_level">${gradeOptions}</select></label>
        <label>Subject <input name="subject" required value="${esc(spec?.subject ?? "")}"></label>
        <label>Topic <input name="topic" required value="${esc(spec?.topic ?? "")}"></label>
        <fieldset><legend>Target levels</legend>${levelBoxes}</fieldset>
        <label>Objectives per level <input name="count_per_level" type="number" min="1" max="8" value="${spec?.count_per_level ?? 2}"></label>
        <label>Extra context <textarea name="extra_context">${esc(spec?.extra_context ?? "")}</textarea></label>
        <button type="submit" data-action="submit-spec" ${busy ? "disabled" : ""}>
          ${session ? "Update parameters and generate" : "Create session and generate"}
        </button>
      </form>
    </section>`;
}

function curationBadge(objective: ObjectiveView): string {
  return `<span class="badge ${objective.curation}">${objective.curation}</span>`;
}

function renderCandidatesPanel(session: SessionView | null, busy: boolean): string {
  if (!session) {
    return `<section class="panel"><p class="empty">Create a session in panel 1 first.</p></section>`;
  }
  const candidates = allCandidates(session);
  if (candidates.length === 0) {
    return `
      <section class="panel panel-candidates">
        <h2>Candidate objectives</h2>
        <p class="empty">No candidates yet.</p>
        <button data-action="generate" ${busy ? "disabled" : ""}>Generate objectives</button>
      </section>`;
  }
  const immutable = session.state === "Finalized";
  const cards = candidates
    .map((objective) => {
      const pinned = objective.curation === "selected" ? `<span class="pin" title="kept on regeneration">📌</span>` : "";
      const assessed = objective.bloom_assessed
        ? `<span class="chip assessed">assessed: ${objective.bloom_assessed}</span>`
        : "";
      return `
      <article class="candidate ${objective.curation}" data-objective="${esc(objective.id)}">
        <div class="candidate-head">
          ${pinned}
          <span class="chip">${esc(objective.bloom_declared ?? "unspecified")}</span>
          ${assessed}
          ${curationBadge(objective)}
        </div>
        <p class="candidate-text">${esc(objective.text)}</p>
        ${
          objective.rationale
            ? `<details><summary>Why this objective</summary><p>${esc(objective.rationale)}</p></details>`
            : ""
        }
        <div class="candidate-actions">
          <button data-action="select" data-id="${esc(objective.id)}"
                  ${busy || immutable || objective.curation === "selected" ? "disabled" : ""}>Select</button>
          <button data-action="reject" data-id="${esc(objective.id)}"
                  ${busy || immutable || objective.curation === "rejected" ? "disabled" : ""}>Reject</button>
        </div>
      </article>`;
    })
    .join("");
  const selectedCount = candidates.filter((o) => o.curation === "selected").length;
  return `
    <section class="panel panel-candidates">
      <h2>Candidate objectives <small>${selectedCount} selected of ${candidates.length}</small></h2>
      <div class="candidate-list">${cards}</div>
      <div class="regen">
        <label>Feedback for regeneration
          <textarea id="feedback" placeholder="What should change?"></textarea>
        </label>
        <button data-action="regenerate" ${busy || immutable ? "disabled" : ""}>
          Regenerate (keeps selected)
        </button>
        <button data-action="analyze" ${busy || immutable || selectedCount === 0 ? "disabled" : ""}>
          Analyze selected
        </button>
      </div>
    </section>`;
}

function renderAnalysisPanel(session: SessionView | null, busy: boolean): string {
  const report = session ? latestReport(session) : null;
  if (!session || !report) {
    return `<section class="panel"><p class="empty">Run the analysis from panel 2 to see results.</p></section>`;
  }
  const gapLine =
    report.gaps.length > 0
      ? `<p class="gaps callout">Coverage gaps: ${report.gaps.map(esc).join(", ")}</p>`
      : `<p class="gaps ok">All six levels covered.</p>`;
  const byId = new Map(allCandidates(session).map((o) => [o.id, o]));
  const blocks = report.analyses
    .map((analysis) => {
      const objective = byId.get(analysis.objective_id);
      const rows = CRITERIA.map(
        (criterion) => `<tr><td>${criterion}</td><td>${analysis.rubric[criterion]}</td></tr>`,
      ).join("");
      const suggestions = analysis.improvement_suggestions.length
        ? `<ul class="suggestions">${analysis.improvement_suggestions.map((s) => `<li>${esc(s)}</li>`).join("")}</ul>`
        : "";
      return `
      <article class="analysis" data-objective="${esc(analysis.objective_id)}">
        <p class="candidate-text">${esc(objective?.text ?? analysis.objective_id)}</p>
        <p><span class="chip">${analysis.assessed_level}</span>
           <small>via ${analysis.assessed_via}${analysis.low_confidence ? ", low confidence" : ""}</small></p>
        <table class="rubric"><tbody>${rows}</tbody></table>
        <details><summary>Reasoning</summary><p>${esc(analysis.reasoning)}</p></details>
        ${suggestions}
      </article>`;
    })
    .join("");
  const summaryRows = CRITERIA.map((criterion) => {
    const [mean, sd] = report.summary[criterion] ?? [0, 0];
    return `<tr><td>${criterion}</td><td>${mean.toFixed(1)}±${sd.toFixed(1)}</td></tr>`;
  }).join("");
  const assessments = session.assessments.length
    ? `<h3>Assessment drafts</h3><ul class="assessments">${session.assessments
        .map(
          (item) =>
            `<li><span class="chip">${item.item_type}</span> <span class="chip">${item.bloom_target}</span> ${esc(item.stem)}</li>`,
        )
        .join("")}</ul>`
    : "";
  const finalized = session.state === "Finalized";
  return `
    <section class="panel panel-analysis">
      <h2>Analysis</h2>
      <div class="chart-area">${renderDistributionChart(report.distribution, report.gaps)}</div>
      ${gapLine}
      <table class="summary"><thead><tr><th>Criterion</th><th>Score (mean±SD)</th></tr></thead>
        <tbody>${summaryRows}</tbody></table>
      <div class="analysis-actions">
        <button data-action="draft-assessments" ${busy || session.state !== "Analyzed" ? "disabled" : ""}>
          Draft assessments
        </button>
        <button data-action="finalize" ${busy || session.state !== "AssessmentDraft" ? "disabled" : ""}>
          Finalize session
        </button>
        <button data-action="download-json" ${busy ? "disabled" : ""}>Download report (JSON)</button>
        <button data-action="download-markdown" ${busy ? "disabled" : ""}>Download report (Markdown)</button>
        ${finalized ? `<span class="badge selected">finalized</span>` : ""}
      </div>
      ${assessments}
      <div class="analysis-list">${blocks}</div>
    </section>`;
}

function readSpec(form: HTMLFormElement): { title: string; spec: SpecView } {
  const data = new FormData(form);
  const levels = [...form.querySelectorAll<HTMLInputElement>('input[name="level"]:checked')].map(
    (box) => box.value,
  );
  return {
    title: String(data.get("title") ?? "").trim(),
    spec: {
      grade_level: String(data.get("grade_level") ?? ""),
      subject: String(data.get("subject") ?? "").trim(),
      topic: String(data.get("topic") ?? "").trim(),
      target_levels: levels as SpecView["target_levels"],
      count_per_level: Number(data.get("count_per_level") ?? 1),
      extra_context: String(data.get("extra_context") ?? "").trim() || null,
    },
  };
}

function bind(root: HTMLElement, app: App): void {
  for (const button of root.querySelectorAll<HTMLElement>("[data-panel]")) {
    button.onclick = () => app.setPanel(Number(button.dataset.panel) as 1 | 2 | 3);
  }
  const form = root.querySelector<HTMLFormElement>("#spec-form");
  if (form) {
    form.onsubmit = (event) => {
      event.preventDefault();
      const { title, spec } = readSpec(form);
      const existing = app.store.state.session;
      if (existing) {
        void app.api
          .updateSpec(existing.id, spec)
          .then((session) => {
            app.store.set({ session });
            return app.generate();
          })
          .catch((error) => app.store.set({ error: String(error) }));
      } else {
        void app.createSession(title, spec).then(() => app.generate());
      }
    };
  }
  for (const button of root.querySelectorAll<HTMLButtonElement>("[data-action]")) {
    const action = button.dataset.action!;
    const objectiveId = button.dataset.id ?? "";
    if (action === "submit-spec") continue; // handled by the form
    button.onclick = () => {
      switch (action) {
        case "generate":
          return void app.generate();
        case "select":
          return void app.decide(objectiveId, "selected");
        case "reject":
          return void app.decide(objectiveId, "rejected");
        case "regenerate": {
          const feedback = root.querySelector<HTMLTextAreaElement>("#feedback")?.value ?? "";
          return void app.regenerate(feedback);
        }
        case "analyze":
          return void app.analyze();
        case "draft-assessments":
          return void app.draftAssessments(1);
        case "finalize":
          return void app.finalize();
        case "download-json":
          return void app.downloadReport("json");
        case "download-markdown":
          return void app.downloadReport("markdown");
        case "reload-session": {
          const id = app.store.state.session?.id;
          if (id) void app.loadSession(id);
          return;
        }
      }
    };
  }
}
