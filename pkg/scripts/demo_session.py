#!/usr/bin/env python3
"""Drive one full workflow session against the stub backend and write the
resulting reports next to the session store.

Useful as a smoke check and as a way to eyeball the report formats without
starting the HTTP service.
"""

import argparse
from pathlib import Path

import arched.session as ws
from arched.analysis import ObjectiveAnalyzer, render_report
from arched.assessments import AssessmentDrafter
from arched.bloom import BloomLevel
from arched.gateway import BackendConfig, LlmGateway
from arched.generation import ObjectiveGenerator
from arched.objectives import CurationStatus, GenerationSpec


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="./demo-out", help="output directory")
    parser.add_argument("--topic", default="binary search trees")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    gateway = LlmGateway(BackendConfig(kind="stub"))
    generator = ObjectiveGenerator(gateway)
    analyzer = ObjectiveAnalyzer(gateway)
    drafter = AssessmentDrafter(gateway)

    spec = GenerationSpec(
        grade_level="undergraduate-intro",
        subject="computer science",
        topic=args.topic,
        target_levels=frozenset(
            {BloomLevel.REMEMBER, BloomLevel.APPLY, BloomLevel.ANALYZE, BloomLevel.CREATE}
        ),
        count_per_level=2,
    )

    session = ws.create_session(f"Demo: {args.topic}", spec)
    ws.run_generation(session, generator)
    print(f"generated {len(session.batches[-1].objectives)} candidates")

    # select everything except the last candidate, mimicking a curation pass
    ids = [o.id for o in session.batches[-1].objectives]
    decisions = {oid: "selected" for oid in ids[:-1]}
    decisions[ids[-1]] = "rejected"
    ws.curate(session, decisions)
    print(f"selected {len(session.working_set.objectives)} of {len(ids)}")

    ws.run_analysis(session, analyzer)
    ws.draft_assessments(session, drafter, per_objective=1)
    ws.finalize(session)

    report = ws.latest_report(session)
    (out / "report.md").write_bytes(render_report(report, "markdown"))
    (out / "report.json").write_bytes(render_report(report, "json"))
    store = ws.SessionStore(out / "sessions")
    store.save(session)

    print(f"state: {session.state.value}")
    print(f"distribution: {report.distribution}")
    print(f"gaps: {', '.join(report.gaps) or 'none'}")
    print(f"assessments: {[i.item_type for i in session.assessments]}")
    print(f"wrote {out}/report.md, {out}/report.json, session file under {out}/sessions/")


if __name__ == "__main__":
    main()
