// Mirrors of the API session body plus the closed vocabularies it uses.

export const BLOOM_LEVELS = [
  "Remember",
  "Understand",
  "Apply",
  "Analyze",
  "Evaluate",
  "Create",
] as const;

export type BloomLabel = (typeof BLOOM_LEVELS)[number];

export const GRADE_LEVELS = [
  "primary",
  "middle",
  "secondary",
  "undergraduate-intro",
  "undergraduate-advanced",
  "graduate",
  "professional",
] as const;

export type GradeLevel = (typeof GRADE_LEVELS)[number];

export type Curation = "pending" | "selected" | "rejected";

export type SessionState =
  | "Draft"
  | "Generating"
  | "Review"
  | "Analyzed"
  | "AssessmentDraft"
  | "Finalized";

export interface SpecView {
  grade_level: string;
  subject: string;
  topic: string;
  target_levels: BloomLabel[];
  count_per_level: number;
  extra_context: string | null;
}

export interface ObjectiveView {
  id: string;
  text: string;
  provenance: "generated" | "imported" | "human-authored";
  curation: Curation;
  bloom_declared: BloomLabel | null;
  bloom_assessed: BloomLabel | null;
  rationale: string | null;
  subject: string | null;
  grade_level: string | null;
}

export interface BatchView {
  spec: SpecView;
  objectives: ObjectiveView[];
  prompt_fingerprint: string;
  created_at: string;
  audit_notes: string[];
}

export interface ObjectiveSetView {
  id: string;
  title: string;
  objectives: ObjectiveView[];
  created_at: string;
  source: string;
}

export interface RubricView {
  structural: number;
  taxonomic: number;
  measurable: number;
  clarity: number;
  technical: number;
  notes: Record<string, string>;
}

export interface AnalysisView {
  objective_id: string;
  assessed_level: BloomLabel;
  assessed_via: "llm" | "rule-fallback";
  level_agrees_with_declared: boolean | null;
  rubric: RubricView;
  reasoning: string;
  improvement_suggestions: string[];
  low_confidence: boolean;
}

export interface ReportView {
  set_id: string;
  analyses: AnalysisView[];
  distribution: Record<BloomLabel, number>;
  gaps: BloomLabel[];
  summary: Record<string, [number, number]>;
  created_at: string;
}

export interface AssessmentItemView {
  id: string;
  objective_id: string;
  item_type: string;
  stem: string;
  answer_guide: string;
  bloom_target: BloomLabel;
}

export interface AuditEventView {
  timestamp: string;
  actor: string;
  action: string;
  payload_digest: string;
  note: string;
}

export interface SessionView {
  schema_version: number;
  id: string;
  title: string;
  spec: SpecView;
  state: SessionState;
  batches: BatchView[];
  imports: ObjectiveSetView[];
  working_set: ObjectiveSetView | null;
  reports: ReportView[];
  assessments: AssessmentItemView[];
  audit: AuditEventView[];
  created_at: string;
  updated_at: string;
  version: number;
}

/** Candidates across batches and imports; later copies of an id supersede earlier ones. */
export function allCandidates(session: SessionView): ObjectiveView[] {
  const latest = new Map<string, ObjectiveView>();
  for (const batch of session.batches) {
    for (const objective of batch.objectives) latest.set(objective.id, objective);
  }
  for (const imported of session.imports) {
    for (const objective of imported.objectives) latest.set(objective.id, objective);
  }
  return [...latest.values()];
}

export function latestReport(session: SessionView): ReportView | null {
  return session.reports.length > 0 ? session.reports[session.reports.length - 1]! : null;
}
