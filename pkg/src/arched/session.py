"""Three-phase workflow sessions.

A session walks Draft -> Generating -> Review -> Analyzed -> AssessmentDraft
-> Finalized, with curation (the educator's select/reject decisions) as the
only pathway content enters the working set. Every accepted mutation appends
an audit event; persistence is one canonical JSON file per session with an
optimistic version counter.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path

from .analysis import AnalysisReport, ObjectiveAnalyzer, report_from_dict, report_to_dict
from .assessments import AssessmentDrafter, AssessmentItem, item_from_dict, item_to_dict
from .canonical import canonical_json_bytes, iso, parse_iso, payload_digest, utc_now
from .errors import (
    ConflictError,
    InvalidInputError,
    InvalidTransitionError,
    NotFoundError,
    UnknownObjectiveError,
)
from .generation import GenerationBatch, ObjectiveGenerator, batch_from_dict, batch_to_dict
from .objectives import (
    CurationStatus,
    GenerationSpec,
    LearningObjective,
    ObjectiveSet,
    set_curation,
    set_from_dict,
    set_to_dict,
    spec_from_dict,
    spec_to_dict,
)

SCHEMA_VERSION = 1


class SessionState(str, Enum):
    DRAFT = "Draft"
    GENERATING = "Generating"
    REVIEW = "Review"
    ANALYZED = "Analyzed"
    ASSESSMENT_DRAFT = "AssessmentDraft"
    FINALIZED = "Finalized"


class Actor(str, Enum):
    EDUCATOR = "educator"
    LOGS = "logs"
    OAE = "oae"
    SYSTEM = "system"


@dataclass(frozen=True)
class AuditEvent:
    timestamp: datetime
    actor: Actor
    action: str
    payload_digest: str
    note: str = ""


@dataclass
class Session:
    id: str
    title: str
    spec: GenerationSpec
    state: SessionState = SessionState.DRAFT
    batches: list[GenerationBatch] = field(default_factory=list)
    imports: list[ObjectiveSet] = field(default_factory=list)
    working_set: ObjectiveSet | None = None
    reports: list[AnalysisReport] = field(default_factory=list)
    assessments: list[AssessmentItem] = field(default_factory=list)
    audit: list[AuditEvent] = field(default_factory=list)
    created_at: datetime = field(default_factory=utc_now)
    updated_at: datetime = field(default_factory=utc_now)
    version: int = 0
    schema_version: int = SCHEMA_VERSION

    def all_objectives(self) -> list[LearningObjective]:
        """Every candidate across batches and imports, in arrival order.

        Regeneration copies kept objectives into the new batch, so an id can
        recur across batch history; the latest copy is the live one.
        """
        latest: dict[str, LearningObjective] = {}
        for batch in self.batches:
            for obj in batch.objectives:
                latest[obj.id] = obj
        for imported in self.imports:
            for obj in imported.objectives:
                latest[obj.id] = obj
        return list(latest.values())

    def find_objective(self, objective_id: str) -> LearningObjective:
        for obj in self.all_objectives():
            if obj.id == objective_id:
                return obj
        raise UnknownObjectiveError(f"unknown objective id: {objective_id!r}")


def _record(session: Session, actor: Actor, action: str, payload, note: str = "") -> None:
    now = utc_now()
    if session.audit and session.audit[-1].timestamp > now:
        now = session.audit[-1].timestamp  # keep timestamps monotone under clock skew
    session.audit.append(
        AuditEvent(
            timestamp=now,
            actor=actor,
            action=action,
            payload_digest=payload_digest(payload),
            note=note,
        )
    )
    session.updated_at = now


def _require_state(session: Session, allowed: tuple[SessionState, ...], action: str) -> None:
    if session.state not in allowed:
        raise InvalidTransitionError(
            f"{action} is not allowed in state {session.state.value}; "
            f"requires one of: {', '.join(s.value for s in allowed)}"
        )


def _recompute_working_set(session: Session) -> None:
    selected = [o for o in session.all_objectives() if o.curation is CurationStatus.SELECTED]
    session.working_set = ObjectiveSet(
        id=f"ws-{session.id}",
        title=f"{session.title} (curated)",
        objectives=selected,
        created_at=utc_now(),
        source=session.id,
    )


# --- operations ------------------------------------------------------------------

def create_session(title: str, spec: GenerationSpec) -> Session:
    if not title.strip():
        raise InvalidInputError("session title must be non-empty")
    session = Session(id=f"ses-{uuid.uuid4().hex[:12]}", title=title, spec=spec)
    _recompute_working_set(session)
    _record(session, Actor.EDUCATOR, "session-created", {"title": title, "spec": spec_to_dict(spec)})
    return session


def update_spec(session: Session, spec: GenerationSpec) -> Session:
    _require_state(session, (SessionState.DRAFT, SessionState.REVIEW), "update_spec")
    session.spec = spec
    _record(session, Actor.EDUCATOR, "spec-updated", spec_to_dict(spec))
    return session


def run_generation(session: Session, generator: ObjectiveGenerator) -> Session:
    """Generate a new candidate batch; transiently Generating, then Review."""
    _require_state(session, (SessionState.DRAFT, SessionState.REVIEW), "run_generation")
    prior = session.state
    session.state = SessionState.GENERATING
    try:
        batch = generator.generate(session.spec)
    except Exception:
        session.state = prior  # atomic: failed generation leaves the session unchanged
        raise
    session.batches.append(batch)
    session.state = SessionState.REVIEW
    _record(
        session,
        Actor.LOGS,
        "generation-run",
        batch_to_dict(batch),
        note="; ".join(batch.audit_notes),
    )
    return session


def run_regeneration(
    session: Session, generator: ObjectiveGenerator, feedback: str, keep: set[str]
) -> Session:
    """Regenerate from the latest batch, pinning kept objectives."""
    _require_state(session, (SessionState.REVIEW,), "run_regeneration")
    if not session.batches:
        raise InvalidTransitionError("no batch to regenerate from")
    prior = session.state
    session.state = SessionState.GENERATING
    try:
        batch = generator.regenerate(session.batches[-1], feedback, keep)
    except Exception:
        session.state = prior
        raise
    session.batches.append(batch)
    session.state = SessionState.REVIEW
    _recompute_working_set(session)  # kept objectives may already be selected
    _record(
        session,
        Actor.LOGS,
        "regeneration-run",
        {"feedback": feedback, "keep": sorted(keep), "batch": batch_to_dict(batch)},
        note="; ".join(batch.audit_notes),
    )
    return session


def import_objectives(session: Session, objset: ObjectiveSet) -> Session:
    """Attach an imported objective set; the session moves to Review for curation."""
    _require_state(session, (SessionState.DRAFT, SessionState.REVIEW), "import_objectives")
    existing = {o.id for o in session.all_objectives()}
    clash = [o.id for o in objset.objectives if o.id in existing]
    if clash:
        raise InvalidInputError(f"imported ids already present: {', '.join(clash)}")
    session.imports.append(objset)
    session.state = SessionState.REVIEW
    _record(session, Actor.EDUCATOR, "objectives-imported", set_to_dict(objset))
    return session


def curate(session: Session, decisions: dict[str, CurationStatus | str]) -> Session:
    """Apply the educator's select/reject decisions (the only curation pathway).

    Atomic: every id and transition is validated before any status changes.
    Curating from Analyzed reopens Review.
    """
    _require_state(session, (SessionState.REVIEW, SessionState.ANALYZED), "curate")
    if not decisions:
        raise InvalidInputError("no curation decisions given")
    resolved: list[tuple[LearningObjective, CurationStatus]] = []
    for objective_id, raw in decisions.items():
        try:
            status = CurationStatus(raw)
        except ValueError:
            raise InvalidInputError(f"unknown curation decision: {raw!r}") from None
        obj = session.find_objective(objective_id)
        if status is CurationStatus.PENDING and obj.curation is not CurationStatus.PENDING:
            raise InvalidTransitionError(f"objective {objective_id}: cannot return to pending")
        resolved.append((obj, status))
    for obj, status in resolved:
        set_curation(obj, status)
    _recompute_working_set(session)
    if session.state is SessionState.ANALYZED:
        session.state = SessionState.REVIEW
    _record(
        session,
        Actor.EDUCATOR,
        "curated",
        {oid: CurationStatus(raw).value for oid, raw in decisions.items()},
    )
    return session


def run_analysis(session: Session, analyzer: ObjectiveAnalyzer) -> Session:
    _require_state(session, (SessionState.REVIEW,), "run_analysis")
    assert session.working_set is not None
    if not session.working_set.objectives:
        raise InvalidInputError("select at least one objective before running analysis")
    report = analyzer.analyze_set(session.working_set)
    by_id = {a.objective_id: a for a in report.analyses}
    for obj in session.working_set.objectives:
        verdict = by_id.get(obj.id)
        if verdict is not None:
            obj.bloom_assessed = verdict.assessed_level
    session.reports.append(report)
    session.state = SessionState.ANALYZED
    _record(session, Actor.OAE, "analysis-run", report_to_dict(report))
    return session


def draft_assessments(
    session: Session, drafter: AssessmentDrafter, per_objective: int = 1
) -> Session:
    _require_state(session, (SessionState.ANALYZED,), "draft_assessments")
    assert session.working_set is not None
    items, notes = drafter.draft(list(session.working_set.objectives), per_objective)
    session.assessments.extend(items)
    session.state = SessionState.ASSESSMENT_DRAFT
    _record(
        session,
        Actor.SYSTEM,
        "assessments-drafted",
        [item_to_dict(i) for i in items],
        note="; ".join(notes),
    )
    return session


def finalize(session: Session) -> Session:
    _require_state(session, (SessionState.ASSESSMENT_DRAFT,), "finalize")
    session.state = SessionState.FINALIZED
    _record(session, Actor.EDUCATOR, "finalized", {"objectives": len(session.working_set.objectives)})
    return session


def latest_report(session: Session) -> AnalysisReport:
    if not session.reports:
        raise NotFoundError("session has no analysis report yet")
    return session.reports[-1]


# --- persistence -----------------------------------------------------------------

def session_to_dict(session: Session) -> dict:
    return {
        "schema_version": session.schema_version,
        "id": session.id,
        "title": session.title,
        "spec": spec_to_dict(session.spec),
        "state": session.state.value,
        "batches": [batch_to_dict(b) for b in session.batches],
        "imports": [set_to_dict(s) for s in session.imports],
        "working_set": set_to_dict(session.working_set) if session.working_set else None,
        "reports": [report_to_dict(r) for r in session.reports],
        "assessments": [item_to_dict(i) for i in session.assessments],
        "audit": [
            {
                "timestamp": iso(e.timestamp),
                "actor": e.actor.value,
                "action": e.action,
                "payload_digest": e.payload_digest,
                "note": e.note,
            }
            for e in session.audit
        ],
        "created_at": iso(session.created_at),
        "updated_at": iso(session.updated_at),
        "version": session.version,
    }


def session_from_dict(d: dict) -> Session:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise InvalidInputError(
            f"unsupported session schema version: {d.get('schema_version')!r}"
        )
    return Session(
        id=d["id"],
        title=d["title"],
        spec=spec_from_dict(d["spec"]),
        state=SessionState(d["state"]),
        batches=[batch_from_dict(b) for b in d.get("batches", [])],
        imports=[set_from_dict(s) for s in d.get("imports", [])],
        working_set=set_from_dict(d["working_set"]) if d.get("working_set") else None,
        reports=[report_from_dict(r) for r in d.get("reports", [])],
        assessments=[item_from_dict(i) for i in d.get("assessments", [])],
        audit=[
            AuditEvent(
                timestamp=parse_iso(e["timestamp"]),
                actor=Actor(e["actor"]),
                action=e["action"],
                payload_digest=e["payload_digest"],
                note=e.get("note", ""),
            )
            for e in d.get("audit", [])
        ],
        created_at=parse_iso(d["created_at"]),
        updated_at=parse_iso(d["updated_at"]),
        version=int(d.get("version", 0)),
        schema_version=int(d["schema_version"]),
    )


class SessionStore:
    """One canonical JSON file per session under a data directory.

    Saves are optimistic: a stale in-memory version loses to the file and
    surfaces a conflict instead of silently overwriting.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise InvalidInputError(f"invalid session id: {session_id!r}")
        return self.root / f"{session_id}.json"

    def save(self, session: Session) -> Session:
        path = self._path(session.id)
        with self._lock:
            if path.exists():
                stored = json.loads(path.read_text(encoding="utf-8"))
                if int(stored.get("version", 0)) != session.version:
                    raise ConflictError(
                        f"session {session.id} was modified elsewhere "
                        f"(stored v{stored.get('version')}, in-memory v{session.version})"
                    )
            session.version += 1
            data = canonical_json_bytes(session_to_dict(session))
            fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix=".json")
            try:
                with os.fdopen(fd, "wb") as handle:
                    handle.write(data)
                os.replace(tmp, path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
        return session

    def load(self, session_id: str) -> Session:
        path = self._path(session_id)
        if not path.exists():
            raise NotFoundError(f"no session with id {session_id!r}")
        return session_from_dict(json.loads(path.read_text(encoding="utf-8")))

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json") if not p.name.startswith("."))
