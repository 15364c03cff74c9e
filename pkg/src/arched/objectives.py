"""Learning-objective domain model.

Objective records with provenance and curation state, the ABCD + SMART
structural quality rules, and canonical CSV/JSON import/export of objective
sets.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Any

from .bloom import BloomLevel, VerbLexicon, bundled_lexicon, tokenize
from .canonical import canonical_json_bytes, iso, parse_iso, utc_now
from .errors import InvalidInputError, InvalidTransitionError

GRADE_LEVELS = (
    "primary",
    "middle",
    "secondary",
    "undergraduate-intro",
    "undergraduate-advanced",
    "graduate",
    "professional",
)

MAX_REQUESTED_OBJECTIVES = 50

# Verbs that describe internal states rather than observable behavior; they
# never count as measurable and never anchor an ABCD behavior span.
NON_OBSERVABLE_VERBS = frozenset({"understand", "know", "appreciate", "learn"})
# "be aware" is a two-token non-observable phrase, checked as a bigram.
_NON_OBSERVABLE_BIGRAM = ("be", "aware")


class Provenance(str, Enum):
    GENERATED = "generated"
    IMPORTED = "imported"
    HUMAN = "human-authored"


class CurationStatus(str, Enum):
    PENDING = "pending"
    SELECTED = "selected"
    REJECTED = "rejected"


@dataclass(frozen=True)
class AbcdParts:
    """Structural decomposition of an objective; spans are substrings of the text."""

    behavior: str
    audience: str | None = None
    condition: str | None = None
    degree: str | None = None


@dataclass(frozen=True)
class StructuralFailure:
    """Returned instead of AbcdParts when no observable behavior is found."""

    reason: str


@dataclass
class LearningObjective:
    id: str
    text: str
    provenance: Provenance
    curation: CurationStatus = CurationStatus.PENDING
    bloom_declared: BloomLevel | None = None
    bloom_assessed: BloomLevel | None = None
    abcd: AbcdParts | None = None
    rationale: str | None = None
    subject: str | None = None
    grade_level: str | None = None

    def __post_init__(self):
        # normalize to the canonical single-statement form used by the exports
        self.text = (self.text or "").strip()
        self.subject = (self.subject or "").strip() or None
        self.grade_level = (self.grade_level or "").strip() or None
        if not self.text:
            raise InvalidInputError("objective text must be non-empty")
        if any(ord(c) < 32 and c != "\t" for c in self.text):
            raise InvalidInputError("objective text must be a single statement without control characters")
        if self.grade_level is not None and self.grade_level not in GRADE_LEVELS:
            raise InvalidInputError(f"grade_level {self.grade_level!r} not in vocabulary")


def set_curation(obj: LearningObjective, status: CurationStatus) -> None:
    """Apply a curation decision, enforcing the legal transitions.

    pending -> selected|rejected and selected <-> rejected are allowed;
    nothing ever returns to pending.
    """
    status = CurationStatus(status)
    if status is CurationStatus.PENDING and obj.curation is not CurationStatus.PENDING:
        raise InvalidTransitionError(f"objective {obj.id}: cannot return to pending")
    obj.curation = status


@dataclass(frozen=True)
class GenerationSpec:
    """Educator parameters driving a generation run."""

    grade_level: str
    subject: str
    topic: str
    target_levels: frozenset[BloomLevel]
    count_per_level: int
    extra_context: str | None = None

    def __post_init__(self):
        if self.grade_level not in GRADE_LEVELS:
            raise InvalidInputError(
                f"grade_level must be one of {', '.join(GRADE_LEVELS)}; got {self.grade_level!r}"
            )
        if not self.subject.strip() or not self.topic.strip():
            raise InvalidInputError("subject and topic must be non-empty")
        if not self.target_levels:
            raise InvalidInputError("target_levels must be non-empty")
        object.__setattr__(self, "target_levels", frozenset(self.target_levels))
        if self.count_per_level < 1:
            raise InvalidInputError("count_per_level must be >= 1")
        if self.count_per_level * len(self.target_levels) > MAX_REQUESTED_OBJECTIVES:
            raise InvalidInputError(
                f"request cap exceeded: count_per_level x levels must be <= {MAX_REQUESTED_OBJECTIVES}"
            )

    def levels_ordered(self) -> list[BloomLevel]:
        return sorted(self.target_levels)


@dataclass
class ObjectiveSet:
    id: str
    title: str
    objectives: list[LearningObjective]
    created_at: datetime
    source: str

    def __post_init__(self):
        ids = [o.id for o in self.objectives]
        if len(ids) != len(set(ids)):
            raise InvalidInputError("objective ids must be unique within a set")


# --- ABCD decomposition -----------------------------------------------------

_AUDIENCE_RE = re.compile(
    r"\b(?:the\s+)?(?:students?|learners?|participants?|pupils?|trainees?)\b",
    re.IGNORECASE,
)
_CONDITION_RE = re.compile(r"\b(?:given|using|when|with access to)\b[^,.;]*", re.IGNORECASE)
_DEGREE_PATTERNS = (
    re.compile(r"\bwith at least\b[^,.;]*", re.IGNORECASE),
    re.compile(r"\bwith(?:in)? \d+[^,.;]*", re.IGNORECASE),
    re.compile(r"\b\d+\s?%[^,.;]*", re.IGNORECASE),
    re.compile(r"\bcorrectly\s+\w+\s+\d+\s+(?:out\s+of|of)\s+\d+\b", re.IGNORECASE),
    re.compile(r"\bwithout (?:error|references|notes)s?\b", re.IGNORECASE),
)
_TIME_BOUND_RE = re.compile(
    r"\b(?:by the end of|by week|within|during|semester|term|unit|session|lesson|"
    r"minutes?|hours?|days?|weeks?|months?)\b",
    re.IGNORECASE,
)
_WORD_RE = re.compile(r"[A-Za-z]+")


def _first_degree_match(text: str) -> re.Match | None:
    best: re.Match | None = None
    for pattern in _DEGREE_PATTERNS:
        m = pattern.search(text)
        if m and (best is None or m.start() < best.start()):
            best = m
    return best


def _find_behavior(
    text: str, lexicon: VerbLexicon, excluded: list[tuple[int, int]]
) -> tuple[int, str] | None:
    """Locate the operative verb: the first observable lexicon verb outside
    the condition/degree clauses.

    Returns ``(start, lemma)``; ``None`` when the leading verb is
    non-observable or no lexicon verb occurs at all.
    """
    words = list(_WORD_RE.finditer(text))
    for i, w in enumerate(words):
        if any(lo <= w.start() < hi for lo, hi in excluded):
            continue
        token = w.group(0).lower()
        nxt = words[i + 1].group(0).lower() if i + 1 < len(words) else ""
        if (token, nxt) == _NON_OBSERVABLE_BIGRAM or token in NON_OBSERVABLE_VERBS:
            return None  # objective leads with a non-observable verb
        lemma = lexicon.lemmatize(token)
        if lemma is not None and lemma not in NON_OBSERVABLE_VERBS:
            return w.start(), lemma
    return None


def decompose_abcd(
    text: str, lexicon: VerbLexicon | None = None
) -> AbcdParts | StructuralFailure:
    """Rule-based ABCD detector.

    Audience, condition, and degree come from configurable pattern lists; the
    behavior is the phrase from the first observable lexicon verb up to the
    next detected clause. Absent parts are reported absent, never guessed.
    """
    if not text or not text.strip():
        raise InvalidInputError("objective text must be non-empty")
    lex = lexicon or bundled_lexicon()

    audience_m = _AUDIENCE_RE.search(text)
    condition_m = _CONDITION_RE.search(text)
    degree_m = _first_degree_match(text)
    # "with access to ..." must not be double-counted as a degree clause.
    if degree_m and condition_m and degree_m.start() == condition_m.start():
        degree_m = None

    excluded = [m.span() for m in (condition_m, degree_m) if m is not None]
    hit = _find_behavior(text, lex, excluded)
    if hit is None:
        return StructuralFailure(reason="no observable behavior")

    start, _lemma = hit
    end = len(text)
    for m in (condition_m, degree_m):
        if m is not None and m.start() > start:
            end = min(end, m.start())
    behavior = text[start:end].strip().rstrip(".,;:").rstrip()

    return AbcdParts(
        behavior=behavior,
        audience=audience_m.group(0) if audience_m else None,
        condition=condition_m.group(0).strip().rstrip(".,;:") if condition_m else None,
        degree=degree_m.group(0).strip().rstrip(".,;:") if degree_m else None,
    )


# --- SMART checklist ---------------------------------------------------------

@dataclass(frozen=True)
class SmartChecklist:
    """Five-facet quality checklist; achievable/relevant are rule-undecidable
    and delegated to the model rubric (defaulting to true, flagged)."""

    specific: bool
    measurable: bool
    achievable: bool
    relevant: bool
    time_bound: bool
    delegated: tuple[str, ...] = ("achievable", "relevant")

    @property
    def score(self) -> int:
        return sum(
            (self.specific, self.measurable, self.achievable, self.relevant, self.time_bound)
        )


def check_smart(obj: LearningObjective, lexicon: VerbLexicon | None = None) -> SmartChecklist:
    """Rule-based SMART evaluation of an objective."""
    lex = lexicon or bundled_lexicon()
    parts = decompose_abcd(obj.text, lex)
    if isinstance(parts, StructuralFailure):
        behavior_tokens: list[str] = []
        measurable = False
        clause_text = ""
    else:
        behavior_tokens = tokenize(parts.behavior)
        verb_lemma = lex.lemmatize(behavior_tokens[0]) if behavior_tokens else None
        measurable = verb_lemma is not None and verb_lemma not in NON_OBSERVABLE_VERBS
        clause_text = " ".join(p for p in (parts.condition, parts.degree) if p)

    specific = len(behavior_tokens) >= 2  # operative verb plus a topic noun
    time_bound = bool(clause_text) and _TIME_BOUND_RE.search(clause_text) is not None
    return SmartChecklist(
        specific=specific,
        measurable=measurable,
        achievable=True,
        relevant=True,
        time_bound=time_bound,
    )


# --- import / export ---------------------------------------------------------

CSV_COLUMNS = ("id", "text", "subject", "grade_level", "declared_level")


def _parse_record(
    values: dict[str, str], where: str, ordinal: int
) -> LearningObjective:
    text = (values.get("text") or "").strip()
    if not text:
        raise InvalidInputError(f"{where}: text must be non-empty")
    raw_level = (values.get("declared_level") or "").strip()
    declared = BloomLevel.parse(raw_level) if raw_level else None
    grade = (values.get("grade_level") or "").strip() or None
    if grade is not None and grade not in GRADE_LEVELS:
        raise InvalidInputError(f"{where}: grade_level {grade!r} not in vocabulary")
    explicit_id = (values.get("id") or "").strip()
    return LearningObjective(
        id=explicit_id or f"imported-{ordinal}",
        text=text,
        provenance=Provenance.IMPORTED,
        curation=CurationStatus.PENDING,
        bloom_declared=declared,
        subject=(values.get("subject") or "").strip() or None,
        grade_level=grade,
    )


def _check_unique_ids(objectives: list[LearningObjective]) -> None:
    seen: set[str] = set()
    for o in objectives:
        if o.id in seen:
            raise InvalidInputError(f"duplicate objective id: {o.id!r}")
        seen.add(o.id)


def import_set(payload: bytes, format: str, source: str = "upload") -> ObjectiveSet:
    """Parse an uploaded objective file into an ObjectiveSet.

    Every record becomes an imported, curation-pending objective; ids are
    generated when absent. Row errors name the offending file line and column.
    """
    if format not in ("csv", "json"):
        raise InvalidInputError(f"unsupported import format: {format!r}")
    if not payload or not payload.strip():
        raise InvalidInputError("import payload is empty")
    text = payload.decode("utf-8")

    if format == "csv":
        reader = csv.reader(io.StringIO(text, newline=""))
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError("import payload is empty") from None
        header = [h.strip() for h in header]
        unknown = [h for h in header if h not in CSV_COLUMNS]
        if unknown:
            raise InvalidInputError(f"unknown CSV columns: {', '.join(unknown)}")
        if "text" not in header:
            raise InvalidInputError("CSV header must include a 'text' column")
        objectives = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise InvalidInputError(f"row {line_no}: expected {len(header)} columns")
            values = dict(zip(header, row))
            objectives.append(_parse_record(values, f"row {line_no}", len(objectives) + 1))
        _check_unique_ids(objectives)
        return ObjectiveSet(
            id=_derived_set_id(payload),
            title=source,
            objectives=objectives,
            created_at=utc_now(),
            source=source,
        )

    try:
        data = json.loads(text)
    except ValueError as e:
        raise InvalidInputError(f"invalid JSON payload: {e}") from None
    if isinstance(data, dict) and "objectives" in data:
        records = data["objectives"]
        set_id = data.get("id") or _derived_set_id(payload)
        title = data.get("title") or source
        created = parse_iso(data["created_at"]) if data.get("created_at") else utc_now()
        src = data.get("source") or source
    elif isinstance(data, list):
        records, set_id, title, created, src = data, _derived_set_id(payload), source, utc_now(), source
    else:
        raise InvalidInputError("JSON payload must be an array or an object with 'objectives'")
    objectives = []
    for i, record in enumerate(records, start=1):
        if not isinstance(record, dict):
            raise InvalidInputError(f"item {i}: expected an object")
        values = {k: ("" if record.get(k) is None else str(record.get(k))) for k in CSV_COLUMNS}
        objectives.append(_parse_record(values, f"item {i}", len(objectives) + 1))
    _check_unique_ids(objectives)
    return ObjectiveSet(id=set_id, title=title, objectives=objectives, created_at=created, source=src)


def _derived_set_id(payload: bytes) -> str:
    return "set-" + hashlib.sha256(payload).hexdigest()[:12]


def export_set(objset: ObjectiveSet, format: str) -> bytes:
    """Serialize an objective set to canonical bytes.

    CSV: fixed column order, RFC-4180 quoting, LF endings. JSON: sorted keys,
    compact separators, set metadata included for lossless reimport.
    """
    if format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for o in objset.objectives:
            writer.writerow(
                [
                    o.id,
                    o.text,
                    o.subject or "",
                    o.grade_level or "",
                    o.bloom_declared.label if o.bloom_declared is not None else "",
                ]
            )
        return out.getvalue().encode("utf-8")
    if format == "json":
        return canonical_json_bytes(
            {
                "id": objset.id,
                "title": objset.title,
                "created_at": iso(objset.created_at),
                "source": objset.source,
                "objectives": [
                    {
                        "id": o.id,
                        "text": o.text,
                        "subject": o.subject,
                        "grade_level": o.grade_level,
                        "declared_level": o.bloom_declared.label if o.bloom_declared is not None else None,
                    }
                    for o in objset.objectives
                ],
            }
        )
    raise InvalidInputError(f"unsupported export format: {format!r}")


# --- dict serialization (used by session persistence) -------------------------

def objective_to_dict(o: LearningObjective) -> dict[str, Any]:
    return {
        "id": o.id,
        "text": o.text,
        "provenance": o.provenance.value,
        "curation": o.curation.value,
        "bloom_declared": o.bloom_declared.label if o.bloom_declared is not None else None,
        "bloom_assessed": o.bloom_assessed.label if o.bloom_assessed is not None else None,
        "abcd": None
        if o.abcd is None
        else {
            "behavior": o.abcd.behavior,
            "audience": o.abcd.audience,
            "condition": o.abcd.condition,
            "degree": o.abcd.degree,
        },
        "rationale": o.rationale,
        "subject": o.subject,
        "grade_level": o.grade_level,
    }


def objective_from_dict(d: dict[str, Any]) -> LearningObjective:
    abcd = d.get("abcd")
    return LearningObjective(
        id=d["id"],
        text=d["text"],
        provenance=Provenance(d["provenance"]),
        curation=CurationStatus(d["curation"]),
        bloom_declared=BloomLevel.parse(d["bloom_declared"]) if d.get("bloom_declared") else None,
        bloom_assessed=BloomLevel.parse(d["bloom_assessed"]) if d.get("bloom_assessed") else None,
        abcd=None
        if abcd is None
        else AbcdParts(
            behavior=abcd["behavior"],
            audience=abcd.get("audience"),
            condition=abcd.get("condition"),
            degree=abcd.get("degree"),
        ),
        rationale=d.get("rationale"),
        subject=d.get("subject"),
        grade_level=d.get("grade_level"),
    )


def spec_to_dict(spec: GenerationSpec) -> dict[str, Any]:
    return {
        "grade_level": spec.grade_level,
        "subject": spec.subject,
        "topic": spec.topic,
        "target_levels": [lv.label for lv in spec.levels_ordered()],
        "count_per_level": spec.count_per_level,
        "extra_context": spec.extra_context,
    }


def spec_from_dict(d: dict[str, Any]) -> GenerationSpec:
    try:
        levels = frozenset(BloomLevel.parse(name) for name in d["target_levels"])
        return GenerationSpec(
            grade_level=d["grade_level"],
            subject=d["subject"],
            topic=d["topic"],
            target_levels=levels,
            count_per_level=int(d["count_per_level"]),
            extra_context=d.get("extra_context"),
        )
    except (KeyError, TypeError) as e:
        raise InvalidInputError(f"malformed generation spec: missing {e}") from None


def set_to_dict(s: ObjectiveSet) -> dict[str, Any]:
    return {
        "id": s.id,
        "title": s.title,
        "objectives": [objective_to_dict(o) for o in s.objectives],
        "created_at": iso(s.created_at),
        "source": s.source,
    }


def set_from_dict(d: dict[str, Any]) -> ObjectiveSet:
    return ObjectiveSet(
        id=d["id"],
        title=d["title"],
        objectives=[objective_from_dict(o) for o in d["objectives"]],
        created_at=parse_iso(d["created_at"]),
        source=d["source"],
    )
