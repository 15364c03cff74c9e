"""Objective analysis engine.

Classifies each objective's cognitive level (model chain-of-thought with a
deterministic rule fallback), scores the five-criterion rubric with rule
evidence attached, aggregates level distribution and gap analysis over a
set, and renders downloadable reports. Analysis never generates or rewrites
objectives; outputs are values only.
"""

from __future__ import annotations

import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from typing import Any

from .bloom import LEVELS, BloomLevel, VerbLexicon, bundled_lexicon, classify_by_verb
from .canonical import canonical_json_bytes, iso, parse_iso, utc_now
from .errors import GatewayError, InvalidInputError
from .gateway import ChatMessage, ChatRequest, LlmGateway
from .generation import LEVEL_DEFINITIONS
from .objectives import (
    LearningObjective,
    ObjectiveSet,
    SmartChecklist,
    StructuralFailure,
    check_smart,
    decompose_abcd,
)
from .prompts import load_prompt

ANALYSIS_TEMPERATURE = 0.2  # evaluation wants stability, not diversity

CRITERIA = ("structural", "taxonomic", "measurable", "clarity", "technical")

CLASSIFY_SCHEMA = {
    "type": "object",
    "required": ["level", "reasoning"],
    "properties": {
        "level": {"type": "string", "enum": [lv.label for lv in LEVELS]},
        "reasoning": {"type": "string", "minLength": 1},
    },
}

RUBRIC_SCHEMA = {
    "type": "object",
    "required": list(CRITERIA),
    "properties": {
        **{criterion: {"type": "integer"} for criterion in CRITERIA},
        "notes": {"type": "object"},
        "improvement_suggestions": {"type": "array", "items": {"type": "string"}},
    },
}


@dataclass(frozen=True)
class RubricScores:
    structural: int
    taxonomic: int
    measurable: int
    clarity: int
    technical: int
    notes: dict[str, str]

    def __post_init__(self):
        for criterion in CRITERIA:
            value = getattr(self, criterion)
            if not isinstance(value, int) or not 1 <= value <= 5:
                raise InvalidInputError(f"{criterion} score must be an integer in 1..5")

    def as_dict(self) -> dict[str, int]:
        return {criterion: getattr(self, criterion) for criterion in CRITERIA}


@dataclass(frozen=True)
class ObjectiveAnalysis:
    objective_id: str
    assessed_level: BloomLevel
    assessed_via: str  # "llm" | "rule-fallback"
    level_agrees_with_declared: bool | None
    rubric: RubricScores
    reasoning: str
    improvement_suggestions: tuple[str, ...]
    low_confidence: bool = False

    def __post_init__(self):
        if self.assessed_via == "llm" and not self.reasoning.strip():
            raise InvalidInputError("llm analyses must retain their reasoning")


@dataclass(frozen=True)
class AnalysisReport:
    set_id: str
    analyses: tuple[ObjectiveAnalysis, ...]
    distribution: dict[str, int]  # level label -> count, all six keys
    gaps: tuple[str, ...]  # level labels with zero coverage
    summary: dict[str, tuple[float, float]]  # criterion -> (mean, sample SD)
    created_at: datetime

    def __post_init__(self):
        if sum(self.distribution.values()) != len(self.analyses):
            raise InvalidInputError("distribution counts must sum to the number of analyses")


def format_mean_sd(mean: float, sd: float) -> str:
    """One-decimal ``mean±SD`` as used in the rubric summary tables."""
    return f"{mean:.1f}±{sd:.1f}"


def rule_classify_level(
    text: str, lexicon: VerbLexicon | None = None
) -> tuple[BloomLevel, str, bool]:
    """Deterministic fallback classifier: (level, reasoning, low_confidence).

    Verb-lexicon verdict when available; otherwise Understand, flagged
    low-confidence (a mid-low default keeps expected ordinal error small).
    """
    lex = lexicon or bundled_lexicon()
    verdict = classify_by_verb(text, lex)
    if verdict is None:
        return (
            BloomLevel.UNDERSTAND,
            "Rule classifier: no lexicon verb found; defaulting to Understand.",
            True,
        )
    lemma = next(lem for tok in _tokens(text) if (lem := lex.lemmatize(tok)) is not None)
    return (
        verdict,
        f"Rule classifier: first lexicon verb '{lemma}' maps to {verdict.label}.",
        False,
    )


def _tokens(text: str):
    from .bloom import tokenize

    return tokenize(text)


class ObjectiveAnalyzer:
    """Scores and classifies objectives through the gateway, with rule fallback."""

    def __init__(
        self,
        gateway: LlmGateway,
        lexicon: VerbLexicon | None = None,
        model: str | None = None,
        temperature: float = ANALYSIS_TEMPERATURE,
    ):
        self.gateway = gateway
        self.lexicon = lexicon or bundled_lexicon()
        self.model = model or gateway.default_model
        self.temperature = temperature

    def _request(self, prompt_name: str, params: dict) -> ChatRequest:
        template = load_prompt(prompt_name)
        taxonomy_lines = "\n".join(
            f"{int(lv) + 1}. {lv.label}: {LEVEL_DEFINITIONS[lv]}" for lv in LEVELS
        )
        mapping = {
            "taxonomy_lines": taxonomy_lines,
            "params_json": json.dumps(params, sort_keys=True, ensure_ascii=False, indent=2),
        }
        system = template["system"].safe_substitute(mapping)
        user = template["user"].safe_substitute(mapping)
        return ChatRequest(
            model=self.model,
            messages=(ChatMessage("system", system), ChatMessage("user", user)),
            temperature=self.temperature,
        )

    def classify_level(self, obj: LearningObjective) -> tuple[BloomLevel, str, str]:
        """(level, reasoning, via); model failures fall back to the rule classifier."""
        level, reasoning, via, _low = self._classify(obj)
        return level, reasoning, via

    def _classify(self, obj: LearningObjective) -> tuple[BloomLevel, str, str, bool]:
        if not obj.text.strip():
            raise InvalidInputError("objective text must be non-empty")
        params = {"task": "classify-level", "objective_text": obj.text}
        try:
            value = self.gateway.complete_structured(
                self._request("oae_classify_v1", params), CLASSIFY_SCHEMA
            )
        except GatewayError:
            level, reasoning, low = rule_classify_level(obj.text, self.lexicon)
            return level, reasoning, "rule-fallback", low
        return BloomLevel.parse(value["level"]), value["reasoning"], "llm", False

    def _evidence(self, obj: LearningObjective) -> tuple[dict, Any, SmartChecklist]:
        parts = decompose_abcd(obj.text, self.lexicon)
        smart = check_smart(obj, self.lexicon)
        verb_level = classify_by_verb(obj.text, self.lexicon)
        failed = isinstance(parts, StructuralFailure)
        present = []
        if not failed:
            present = [
                name
                for name in ("audience", "behavior", "condition", "degree")
                if getattr(parts, name) is not None
            ]
        evidence = {
            "behavior_present": not failed,
            "abcd_present": present,
            "failure_reason": parts.reason if failed else None,
            "smart": {
                "specific": smart.specific,
                "measurable": smart.measurable,
                "achievable": smart.achievable,
                "relevant": smart.relevant,
                "time_bound": smart.time_bound,
                "delegated": list(smart.delegated),
            },
            "verb_level": verb_level.label if verb_level is not None else None,
            "declared_level": obj.bloom_declared.label if obj.bloom_declared is not None else None,
        }
        return evidence, parts, smart

    def score_rubric(self, obj: LearningObjective) -> RubricScores:
        """Five integer criterion scores in 1..5, with per-criterion notes."""
        scores, _suggestions = self._score_with_suggestions(obj)
        return scores

    def _score_with_suggestions(
        self, obj: LearningObjective
    ) -> tuple[RubricScores, tuple[str, ...]]:
        if not obj.text.strip():
            raise InvalidInputError("objective text must be non-empty")
        evidence, parts, smart = self._evidence(obj)
        params = {"task": "score-rubric", "objective_text": obj.text, "evidence": evidence}
        try:
            value = self.gateway.complete_structured(
                self._request("oae_rubric_v1", params), RUBRIC_SCHEMA
            )
        except GatewayError:
            return self._fallback_scores(obj, evidence)
        clamped = {c: min(5, max(1, int(value[c]))) for c in CRITERIA}
        if not evidence["behavior_present"]:
            # rule floor: no observable behavior caps the structural score
            clamped["structural"] = min(clamped["structural"], 2)
        raw_notes = value.get("notes") or {}
        notes = {c: str(raw_notes.get(c, "")) for c in CRITERIA}
        suggestions = tuple(str(s) for s in value.get("improvement_suggestions", []))
        return RubricScores(notes=notes, **clamped), suggestions

    def _fallback_scores(
        self, obj: LearningObjective, evidence: dict
    ) -> tuple[RubricScores, tuple[str, ...]]:
        present = evidence["abcd_present"]
        declared = evidence["declared_level"]
        verb_level = evidence["verb_level"]
        scores = {
            "structural": min(5, 1 + len(present)),
            "measurable": 5 if evidence["smart"]["measurable"] else 2,
            "taxonomic": 5 if declared and verb_level and declared == verb_level else 3,
            "clarity": 3,
            "technical": 3,
        }
        notes = {c: "rule-fallback" for c in CRITERIA}
        suggestions = []
        if not evidence["behavior_present"]:
            suggestions.append("Replace the non-observable verb with an observable action verb.")
        for part, hint in (
            ("condition", "State the condition students work under."),
            ("degree", "Add a success criterion (threshold, count, or accuracy)."),
            ("audience", "Name the audience explicitly."),
        ):
            if part not in present:
                suggestions.append(hint)
        return RubricScores(notes=notes, **scores), tuple(suggestions)

    def _analyze_one(self, obj: LearningObjective) -> ObjectiveAnalysis:
        level, reasoning, via, low = self._classify(obj)
        rubric, suggestions = self._score_with_suggestions(obj)
        agrees = None if obj.bloom_declared is None else (level == obj.bloom_declared)
        return ObjectiveAnalysis(
            objective_id=obj.id,
            assessed_level=level,
            assessed_via=via,
            level_agrees_with_declared=agrees,
            rubric=rubric,
            reasoning=reasoning,
            improvement_suggestions=suggestions,
            low_confidence=low,
        )

    def analyze_set(self, objset: ObjectiveSet) -> AnalysisReport:
        """Per-objective classification + rubric, then distribution and summary.

        Objectives may be evaluated concurrently up to the gateway's in-flight
        budget; assembly preserves input order, so output is deterministic.
        """
        if not objset.objectives:
            raise InvalidInputError("cannot analyze an empty objective set")
        objs = objset.objectives
        workers = min(self.gateway.config.max_in_flight, len(objs))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                analyses = tuple(pool.map(self._analyze_one, objs))
        else:
            analyses = tuple(self._analyze_one(o) for o in objs)

        distribution = {lv.label: 0 for lv in LEVELS}
        for a in analyses:
            distribution[a.assessed_level.label] += 1
        gaps = tuple(lv.label for lv in LEVELS if distribution[lv.label] == 0)
        summary: dict[str, tuple[float, float]] = {}
        for criterion in CRITERIA:
            values = [getattr(a.rubric, criterion) for a in analyses]
            mean = statistics.fmean(values)
            sd = statistics.stdev(values) if len(values) >= 2 else 0.0
            summary[criterion] = (mean, sd)
        return AnalysisReport(
            set_id=objset.id,
            analyses=analyses,
            distribution=distribution,
            gaps=gaps,
            summary=summary,
            created_at=utc_now(),
        )


# --- report rendering ----------------------------------------------------------

def analysis_to_dict(a: ObjectiveAnalysis) -> dict:
    return {
        "objective_id": a.objective_id,
        "assessed_level": a.assessed_level.label,
        "assessed_via": a.assessed_via,
        "level_agrees_with_declared": a.level_agrees_with_declared,
        "rubric": {**a.rubric.as_dict(), "notes": dict(a.rubric.notes)},
        "reasoning": a.reasoning,
        "improvement_suggestions": list(a.improvement_suggestions),
        "low_confidence": a.low_confidence,
    }


def analysis_from_dict(d: dict) -> ObjectiveAnalysis:
    rubric = dict(d["rubric"])
    notes = {k: str(v) for k, v in (rubric.pop("notes", {}) or {}).items()}
    return ObjectiveAnalysis(
        objective_id=d["objective_id"],
        assessed_level=BloomLevel.parse(d["assessed_level"]),
        assessed_via=d["assessed_via"],
        level_agrees_with_declared=d.get("level_agrees_with_declared"),
        rubric=RubricScores(notes=notes, **{c: int(rubric[c]) for c in CRITERIA}),
        reasoning=d["reasoning"],
        improvement_suggestions=tuple(d.get("improvement_suggestions", [])),
        low_confidence=bool(d.get("low_confidence", False)),
    )


def report_to_dict(report: AnalysisReport) -> dict:
    return {
        "set_id": report.set_id,
        "analyses": [analysis_to_dict(a) for a in report.analyses],
        "distribution": dict(report.distribution),
        "gaps": list(report.gaps),
        "summary": {c: [m, s] for c, (m, s) in report.summary.items()},
        "created_at": iso(report.created_at),
    }


def report_from_dict(d: dict) -> AnalysisReport:
    return AnalysisReport(
        set_id=d["set_id"],
        analyses=tuple(analysis_from_dict(a) for a in d["analyses"]),
        distribution={k: int(v) for k, v in d["distribution"].items()},
        gaps=tuple(d["gaps"]),
        summary={c: (float(v[0]), float(v[1])) for c, v in d["summary"].items()},
        created_at=parse_iso(d["created_at"]),
    )


def render_report(report: AnalysisReport, format: str) -> bytes:
    """Canonical JSON or fixed-section markdown for download."""
    if format == "json":
        return canonical_json_bytes(report_to_dict(report))
    if format != "markdown":
        raise InvalidInputError(f"unsupported render format: {format!r}")

    lines = [
        "# Objective analysis report",
        "",
        f"- Objective set: {report.set_id}",
        f"- Created: {iso(report.created_at)}",
        f"- Objectives analyzed: {len(report.analyses)}",
        "",
        "## Level distribution",
        "",
        "| Level | Count |",
        "|---|---|",
    ]
    for lv in LEVELS:
        lines.append(f"| {lv.label} | {report.distribution[lv.label]} |")
    lines.append("")
    if report.gaps:
        lines.append(f"Coverage gaps: {', '.join(report.gaps)}")
    else:
        lines.append("Coverage gaps: none")
    lines += ["", "## Objectives", ""]
    for index, a in enumerate(report.analyses, start=1):
        lines += [
            f"### {index}. {a.objective_id}",
            "",
            f"- Assessed level: {a.assessed_level.label} (via {a.assessed_via})"
            + (" — low confidence" if a.low_confidence else ""),
        ]
        if a.level_agrees_with_declared is not None:
            verdict = "agrees" if a.level_agrees_with_declared else "disagrees"
            lines.append(f"- Declared level {verdict} with the assessment")
        lines += ["", "| Criterion | Score |", "|---|---|"]
        for criterion in CRITERIA:
            lines.append(f"| {criterion.capitalize()} | {getattr(a.rubric, criterion)} |")
        lines += ["", f"Reasoning: {a.reasoning}", ""]
        if a.improvement_suggestions:
            lines.append("Suggestions:")
            lines += [f"- {s}" for s in a.improvement_suggestions]
            lines.append("")
    lines += ["## Rubric summary", "", "| Criterion | Score (mean±SD) |", "|---|---|"]
    for criterion in CRITERIA:
        mean, sd = report.summary[criterion]
        lines.append(f"| {criterion.capitalize()} | {format_mean_sd(mean, sd)} |")
    lines.append("")
    return "\n".join(lines).encode("utf-8")
