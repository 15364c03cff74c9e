"""Objective generation engine.

Builds generation prompts from educator parameters, invokes the gateway's
structured-output contract, filters candidates into objective records with
rationales, and supports feedback-driven regeneration that pins kept
objectives.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, replace
from datetime import datetime

from .bloom import LEVELS, BloomLevel, VerbLexicon, bundled_lexicon
from .canonical import iso, parse_iso, utc_now
from .errors import GenerationEmptyError, InvalidInputError, UnknownObjectiveError
from .gateway import ChatMessage, ChatRequest, LlmGateway
from .objectives import (
    CurationStatus,
    GenerationSpec,
    LearningObjective,
    Provenance,
    objective_from_dict,
    objective_to_dict,
    spec_from_dict,
    spec_to_dict,
)
from .prompts import load_prompt

GENERATION_TEMPERATURE = 0.8  # diversity for drafting; analysis runs colder
PROMPT_CHAR_BUDGET = 20_000
_SNIPPET_LIMIT = 200
_FREEFORM_LIMIT = 2_000
_TRUNCATION_MARK = " …[truncated]"

LEVEL_DEFINITIONS = {
    BloomLevel.REMEMBER: "retrieve relevant facts and basic concepts",
    BloomLevel.UNDERSTAND: "explain ideas and make sense of material",
    BloomLevel.APPLY: "use information and procedures in new situations",
    BloomLevel.ANALYZE: "draw connections and break material into parts",
    BloomLevel.EVALUATE: "justify a decision or judge against criteria",
    BloomLevel.CREATE: "produce new or original work",
}

OBJECTIVES_SCHEMA = {
    "type": "object",
    "required": ["objectives"],
    "properties": {
        "objectives": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["text", "level", "rationale"],
                "properties": {
                    "text": {"type": "string"},
                    "level": {"type": "string"},
                    "rationale": {"type": "string"},
                },
            },
        }
    },
}


@dataclass(frozen=True)
class GenerationBatch:
    spec: GenerationSpec
    objectives: tuple[LearningObjective, ...]
    prompt_fingerprint: str
    created_at: datetime
    audit_notes: tuple[str, ...] = ()

    def __post_init__(self):
        for o in self.objectives:
            if o.bloom_declared not in self.spec.target_levels:
                raise InvalidInputError(
                    f"objective {o.id} declares a level outside the requested set"
                )
            if not (o.rationale or "").strip():
                raise InvalidInputError(f"objective {o.id} is missing a rationale")

    def objective_ids(self) -> set[str]:
        return {o.id for o in self.objectives}


def _truncate(text: str, limit: int) -> str:
    if len(text) <= limit:
        return text
    return text[:limit] + _TRUNCATION_MARK


def prompt_fingerprint(req: ChatRequest) -> str:
    payload = json.dumps(
        [[m.role, m.content] for m in req.messages], sort_keys=True, ensure_ascii=False
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ObjectiveGenerator:
    """Drafts candidate objectives through the gateway."""

    def __init__(
        self,
        gateway: LlmGateway,
        lexicon: VerbLexicon | None = None,
        model: str | None = None,
        temperature: float = GENERATION_TEMPERATURE,
    ):
        self.gateway = gateway
        self.lexicon = lexicon or bundled_lexicon()
        self.model = model or gateway.default_model
        self.temperature = temperature

    def build_generation_prompt(
        self,
        spec: GenerationSpec,
        avoid_texts: tuple[str, ...] = (),
        feedback: str | None = None,
    ) -> ChatRequest:
        """Deterministic prompt for a spec: same inputs, identical bytes."""
        template = load_prompt("logs_v1")
        taxonomy_lines = "\n".join(
            f"{int(lv) + 1}. {lv.label}: {LEVEL_DEFINITIONS[lv]}" for lv in LEVELS
        )
        verb_lines = "\n".join(
            f"- {lv.label}: {', '.join(self.lexicon.verbs_for_level(lv))}" for lv in LEVELS
        )
        params = {
            "grade_level": spec.grade_level,
            "subject": spec.subject,
            "topic": spec.topic,
            "target_levels": [lv.label for lv in spec.levels_ordered()],
            "count_per_level": spec.count_per_level,
            "avoid_texts": [_truncate(t, _SNIPPET_LIMIT) for t in avoid_texts],
        }
        keep_block = ""
        if avoid_texts:
            listing = "\n".join(f"- {_truncate(t, _SNIPPET_LIMIT)}" for t in avoid_texts)
            keep_block = (
                "\nThe educator is keeping these objectives; do not duplicate them:\n"
                f"{listing}\n"
            )
        feedback_block = ""
        if feedback:
            feedback_block = (
                "\nEducator feedback to address:\n" f"{_truncate(feedback, _FREEFORM_LIMIT)}\n"
            )
        context_block = ""
        if spec.extra_context:
            context_block = (
                "\nAdditional context:\n" f"{_truncate(spec.extra_context, _FREEFORM_LIMIT)}\n"
            )
        system = template["system"].substitute(
            taxonomy_lines=taxonomy_lines, verb_lines=verb_lines
        )
        user = template["user"].substitute(
            total=spec.count_per_level * len(spec.target_levels),
            per_level=spec.count_per_level,
            params_json=json.dumps(params, sort_keys=True, ensure_ascii=False, indent=2),
            keep_block=keep_block,
            feedback_block=feedback_block,
            context_block=context_block,
        )
        overshoot = len(system) + len(user) - PROMPT_CHAR_BUDGET
        if overshoot > 0:  # belt and braces; the per-field truncation should prevent this
            user = user[: len(user) - overshoot - len(_TRUNCATION_MARK)] + _TRUNCATION_MARK
        return ChatRequest(
            model=self.model,
            messages=(ChatMessage("system", system), ChatMessage("user", user)),
            temperature=self.temperature,
        )

    def _parse_items(
        self, raw_items: list[dict], spec: GenerationSpec, notes: list[str]
    ) -> list[LearningObjective]:
        parsed = []
        for item in raw_items:
            text = (item.get("text") or "").strip()
            rationale = (item.get("rationale") or "").strip()
            raw_level = (item.get("level") or "").strip()
            try:
                level = BloomLevel.parse(raw_level)
            except InvalidInputError:
                notes.append(f"dropped candidate with unknown level {raw_level!r}")
                continue
            if level not in spec.target_levels:
                notes.append(f"dropped candidate at unrequested level {level.label}")
                continue
            if not text or "\n" in text:
                notes.append("dropped candidate with empty or multi-line text")
                continue
            if not rationale:
                notes.append("dropped candidate with empty rationale")
                continue
            parsed.append(
                LearningObjective(
                    id=f"obj-{uuid.uuid4().hex[:12]}",
                    text=text,
                    provenance=Provenance.GENERATED,
                    curation=CurationStatus.PENDING,
                    bloom_declared=level,
                    rationale=rationale,
                    subject=spec.subject,
                    grade_level=spec.grade_level,
                )
            )
        return parsed

    def _run(
        self,
        spec: GenerationSpec,
        avoid_texts: tuple[str, ...],
        feedback: str | None,
        notes: list[str],
    ) -> tuple[list[LearningObjective], str]:
        req = self.build_generation_prompt(spec, avoid_texts=avoid_texts, feedback=feedback)
        data = self.gateway.complete_structured(req, OBJECTIVES_SCHEMA)
        return self._parse_items(data["objectives"], spec, notes), prompt_fingerprint(req)

    def generate(
        self,
        spec: GenerationSpec,
        avoid_texts: tuple[str, ...] = (),
        feedback: str | None = None,
    ) -> GenerationBatch:
        """One generation run; shortfalls get at most one automatic top-up call."""
        notes: list[str] = []
        objectives, fingerprint = self._run(spec, avoid_texts, feedback, notes)

        shortfall = {
            level: spec.count_per_level - sum(1 for o in objectives if o.bloom_declared == level)
            for level in spec.levels_ordered()
        }
        missing = {lv: k for lv, k in shortfall.items() if k > 0}
        if missing:
            notes.append(
                "top-up call for shortfall: "
                + ", ".join(f"{lv.label} x{k}" for lv, k in missing.items())
            )
            topup_spec = replace(
                spec,
                target_levels=frozenset(missing),
                count_per_level=max(missing.values()),
            )
            extra_avoid = avoid_texts + tuple(o.text for o in objectives)
            extras, _ = self._run(topup_spec, extra_avoid, feedback, notes)
            for level, needed in missing.items():
                for obj in [e for e in extras if e.bloom_declared == level][:needed]:
                    objectives.append(obj)

        if not objectives:
            raise GenerationEmptyError(
                "no valid objectives were generated; retry or adjust the parameters"
            )
        return GenerationBatch(
            spec=spec,
            objectives=tuple(objectives),
            prompt_fingerprint=fingerprint,
            created_at=utc_now(),
            audit_notes=tuple(notes),
        )

    def regenerate(
        self, batch: GenerationBatch, feedback: str, keep: set[str]
    ) -> GenerationBatch:
        """Fresh batch honoring educator feedback; kept objectives carry over unchanged."""
        known = batch.objective_ids()
        unknown = set(keep) - known
        if unknown:
            raise UnknownObjectiveError(f"unknown objective ids: {', '.join(sorted(unknown))}")
        kept = [replace(o) for o in batch.objectives if o.id in keep]
        kept_texts = tuple(o.text for o in kept)

        notes: list[str] = []
        req = self.build_generation_prompt(batch.spec, avoid_texts=kept_texts, feedback=feedback)
        data = self.gateway.complete_structured(req, OBJECTIVES_SCHEMA)
        fingerprint = prompt_fingerprint(req)
        fresh = self._parse_items(data["objectives"], batch.spec, notes)
        deduped = []
        for o in fresh:
            if o.text in kept_texts:
                notes.append("dropped regenerated duplicate of a kept objective")
                continue
            deduped.append(o)

        merged = kept + deduped
        if not merged:
            raise GenerationEmptyError(
                "regeneration produced no valid objectives; retry or adjust the feedback"
            )
        return GenerationBatch(
            spec=batch.spec,
            objectives=tuple(merged),
            prompt_fingerprint=fingerprint,
            created_at=utc_now(),
            audit_notes=tuple(notes),
        )


def batch_to_dict(batch: GenerationBatch) -> dict:
    return {
        "spec": spec_to_dict(batch.spec),
        "objectives": [objective_to_dict(o) for o in batch.objectives],
        "prompt_fingerprint": batch.prompt_fingerprint,
        "created_at": iso(batch.created_at),
        "audit_notes": list(batch.audit_notes),
    }


def batch_from_dict(d: dict) -> GenerationBatch:
    return GenerationBatch(
        spec=spec_from_dict(d["spec"]),
        objectives=tuple(objective_from_dict(o) for o in d["objectives"]),
        prompt_fingerprint=d["prompt_fingerprint"],
        created_at=parse_iso(d["created_at"]),
        audit_notes=tuple(d.get("audit_notes", [])),
    )
