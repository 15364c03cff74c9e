"""Assessment-item drafting for finalized objectives.

A thin gateway client: for each selected objective it requests items whose
target level matches the objective's assessed (or declared) level; items
that miss the level contract are dropped and reported.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass

from .bloom import BloomLevel
from .errors import InvalidInputError
from .gateway import ChatMessage, ChatRequest, LlmGateway
from .objectives import LearningObjective
from .prompts import load_prompt

ITEM_TYPES = ("multiple-choice", "short-answer", "project-task", "discussion-prompt")

ASSESS_SCHEMA = {
    "type": "object",
    "required": ["items"],
    "properties": {
        "items": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["objective_id", "item_type", "stem", "answer_guide", "bloom_target"],
                "properties": {
                    "objective_id": {"type": "string"},
                    "item_type": {"type": "string"},
                    "stem": {"type": "string", "minLength": 1},
                    "answer_guide": {"type": "string"},
                    "bloom_target": {"type": "string"},
                },
            },
        }
    },
}


@dataclass(frozen=True)
class AssessmentItem:
    id: str
    objective_id: str
    item_type: str
    stem: str
    answer_guide: str
    bloom_target: BloomLevel

    def __post_init__(self):
        if self.item_type not in ITEM_TYPES:
            raise InvalidInputError(f"unknown assessment item type: {self.item_type!r}")


def item_to_dict(item: AssessmentItem) -> dict:
    return {
        "id": item.id,
        "objective_id": item.objective_id,
        "item_type": item.item_type,
        "stem": item.stem,
        "answer_guide": item.answer_guide,
        "bloom_target": item.bloom_target.label,
    }


def item_from_dict(d: dict) -> AssessmentItem:
    return AssessmentItem(
        id=d["id"],
        objective_id=d["objective_id"],
        item_type=d["item_type"],
        stem=d["stem"],
        answer_guide=d["answer_guide"],
        bloom_target=BloomLevel.parse(d["bloom_target"]),
    )


class AssessmentDrafter:
    def __init__(self, gateway: LlmGateway, model: str | None = None, temperature: float = 0.4):
        self.gateway = gateway
        self.model = model or gateway.default_model
        self.temperature = temperature

    def draft(
        self, objectives: list[LearningObjective], per_objective: int = 1
    ) -> tuple[list[AssessmentItem], list[str]]:
        """Draft items for the given objectives; returns (items, audit notes)."""
        if per_objective < 1:
            raise InvalidInputError("per_objective must be >= 1")
        if not objectives:
            raise InvalidInputError("no objectives to draft assessments for")

        targets: dict[str, set[BloomLevel]] = {}
        payload_objs = []
        notes: list[str] = []
        for obj in objectives:
            allowed = {lv for lv in (obj.bloom_assessed, obj.bloom_declared) if lv is not None}
            if not allowed:
                notes.append(f"skipped objective {obj.id}: no assessed or declared level")
                continue
            targets[obj.id] = allowed
            primary = obj.bloom_assessed if obj.bloom_assessed is not None else obj.bloom_declared
            payload_objs.append({"id": obj.id, "text": obj.text, "level": primary.label})
        if not payload_objs:
            raise InvalidInputError("no objectives carry a target level")

        template = load_prompt("assess_v1")
        params = {
            "task": "draft-assessments",
            "per_objective": per_objective,
            "objectives": payload_objs,
        }
        mapping = {
            "per_objective": str(per_objective),
            "params_json": json.dumps(params, sort_keys=True, ensure_ascii=False, indent=2),
        }
        req = ChatRequest(
            model=self.model,
            messages=(
                ChatMessage("system", template["system"].safe_substitute(mapping)),
                ChatMessage("user", template["user"].safe_substitute(mapping)),
            ),
            temperature=self.temperature,
        )
        data = self.gateway.complete_structured(req, ASSESS_SCHEMA)

        items: list[AssessmentItem] = []
        for raw in data["items"]:
            oid = raw["objective_id"]
            if oid not in targets:
                notes.append(f"dropped item for unknown objective {oid!r}")
                continue
            if raw["item_type"] not in ITEM_TYPES:
                notes.append(f"dropped item with unknown type {raw['item_type']!r}")
                continue
            try:
                target = BloomLevel.parse(raw["bloom_target"])
            except InvalidInputError:
                notes.append(f"dropped item with unknown level {raw['bloom_target']!r}")
                continue
            if target not in targets[oid]:
                notes.append(
                    f"dropped item for {oid}: level {target.label} does not match the objective"
                )
                continue
            items.append(
                AssessmentItem(
                    id=f"item-{uuid.uuid4().hex[:10]}",
                    objective_id=oid,
                    item_type=raw["item_type"],
                    stem=raw["stem"],
                    answer_guide=raw["answer_guide"],
                    bloom_target=target,
                )
            )
        return items, notes
