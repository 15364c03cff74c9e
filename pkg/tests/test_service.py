import json
import socket

import pytest
from fastapi.testclient import TestClient

from arched.errors import ArchedError
from arched.evalstats import synthetic_corpus, corpus_to_csv
from arched.gateway import BackendConfig
from arched.service import STATUS_BY_CODE, ServiceConfig, create_app, load_service_config

SPEC_BODY = {
    "grade_level": "undergraduate-intro",
    "subject": "computer science",
    "topic": "recursion",
    "target_levels": ["Remember", "Create"],
    "count_per_level": 2,
}


@pytest.fixture()
def client(tmp_path):
    config = ServiceConfig(data_dir=str(tmp_path), backend=BackendConfig(kind="stub"))
    app = create_app(config)
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


@pytest.fixture()
def no_egress(monkeypatch):
    """Deny all socket connections for the duration of a test."""
    real_connect = socket.socket.connect

    def guarded(self, address, *args, **kwargs):
        raise AssertionError(f"network egress attempted: {address!r}")

    monkeypatch.setattr(socket.socket, "connect", guarded)
    yield
    monkeypatch.setattr(socket.socket, "connect", real_connect)


def create_session(client):
    response = client.post("/api/sessions", json={"title": "Unit 1", "spec": SPEC_BODY})
    assert response.status_code == 201, response.text
    return response.json()


def test_health_reports_backend(client):
    response = client.get("/api/health")
    assert response.status_code == 200
    body = response.json()
    assert body["backend"] == "stub"
    assert body["model"]
    assert response.headers["X-Arched-Api"] == "1"


def test_create_session_has_draft_state(client):
    body = create_session(client)
    assert body["state"] == "Draft"
    assert body["working_set"]["objectives"] == []
    assert body["version"] == 1  # persisted once


def test_get_session_roundtrip(client):
    created = create_session(client)
    fetched = client.get(f"/api/sessions/{created['id']}")
    assert fetched.status_code == 200
    assert fetched.json() == created


def test_unknown_session_404(client):
    response = client.get("/api/sessions/ses-nope")
    assert response.status_code == 404
    assert response.json()["code"] == "not-found"


def test_curate_unknown_objective_422(client):
    session = create_session(client)
    client.post(f"/api/sessions/{session['id']}/generate")
    response = client.post(
        f"/api/sessions/{session['id']}/curate", json={"decisions": {"ghost": "selected"}}
    )
    assert response.status_code == 422
    assert response.json()["code"] == "unknown-objective"


def test_invalid_transition_409(client):
    session = create_session(client)
    response = client.post(f"/api/sessions/{session['id']}/finalize")
    assert response.status_code == 409
    assert response.json()["code"] == "invalid-transition"


def test_malformed_payload_422(client):
    response = client.post("/api/sessions", json={"title": "x"})
    assert response.status_code == 422
    assert response.json()["code"] == "malformed-payload"


def test_bad_spec_value_422(client):
    bad = dict(SPEC_BODY, grade_level="sophomore")
    response = client.post("/api/sessions", json={"title": "x", "spec": bad})
    assert response.status_code == 422
    assert response.json()["code"] == "invalid-input"


def test_full_flow_offline(client, no_egress):
    session = create_session(client)
    sid = session["id"]

    generated = client.post(f"/api/sessions/{sid}/generate")
    assert generated.status_code == 200
    body = generated.json()
    assert body["state"] == "Review"
    ids = [o["id"] for o in body["batches"][-1]["objectives"]]
    assert len(ids) == 4

    curated = client.post(
        f"/api/sessions/{sid}/curate",
        json={"decisions": {ids[0]: "selected", ids[1]: "selected", ids[2]: "rejected"}},
    )
    assert curated.status_code == 200
    assert len(curated.json()["working_set"]["objectives"]) == 2

    analyzed = client.post(f"/api/sessions/{sid}/analyze")
    assert analyzed.status_code == 200
    report = analyzed.json()["reports"][-1]
    assert sum(report["distribution"].values()) == 2

    assessed = client.post(f"/api/sessions/{sid}/assessments", json={"per_objective": 1})
    assert assessed.status_code == 200
    assert len(assessed.json()["assessments"]) == 2

    final = client.post(f"/api/sessions/{sid}/finalize")
    assert final.status_code == 200
    assert final.json()["state"] == "Finalized"

    markdown = client.get(f"/api/sessions/{sid}/report", params={"format": "markdown"})
    assert markdown.status_code == 200
    assert "## Level distribution" in markdown.text
    assert "Coverage gaps:" in markdown.text

    as_json = client.get(f"/api/sessions/{sid}/report", params={"format": "json"})
    assert as_json.status_code == 200
    assert json.loads(as_json.content)["distribution"]


def test_report_before_analysis_404(client):
    session = create_session(client)
    response = client.get(f"/api/sessions/{session['id']}/report")
    assert response.status_code == 404


def test_regenerate_endpoint(client):
    session = create_session(client)
    sid = session["id"]
    ids = [o["id"] for o in client.post(f"/api/sessions/{sid}/generate").json()["batches"][-1]["objectives"]]
    response = client.post(
        f"/api/sessions/{sid}/regenerate", json={"feedback": "shorter", "keep": ids[:1]}
    )
    assert response.status_code == 200
    new_ids = [o["id"] for o in response.json()["batches"][-1]["objectives"]]
    assert ids[0] in new_ids


def test_patch_spec(client):
    session = create_session(client)
    new_spec = dict(SPEC_BODY, topic="dynamic programming")
    response = client.patch(f"/api/sessions/{session['id']}/spec", json=new_spec)
    assert response.status_code == 200
    assert response.json()["spec"]["topic"] == "dynamic programming"


def test_import_standalone_and_into_session(client):
    csv_payload = "id,text\nimp1,Students will list the phases\nimp2,Students will design a rubric\n"
    standalone = client.post("/api/import", json={"format": "csv", "content": csv_payload})
    assert standalone.status_code == 201
    assert len(standalone.json()["objectives"]) == 2

    session = create_session(client)
    attached = client.post(
        "/api/import",
        json={"format": "csv", "content": csv_payload, "session_id": session["id"]},
    )
    assert attached.status_code == 201
    assert attached.json()["state"] == "Review"


def test_import_malformed_csv_names_row(client):
    bad = "id,text\nok,Students will list things\nbad,\n"
    response = client.post("/api/import", json={"format": "csv", "content": bad})
    assert response.status_code == 422
    assert "row 3" in response.json()["message"]


def test_eval_corpus_endpoint(client):
    payload = corpus_to_csv(synthetic_corpus(n=40, seed=7)).decode()
    response = client.post(
        "/api/eval/corpus", json={"csv": payload, "resamples": 200, "seed": 7}
    )
    assert response.status_code == 200
    body = response.json()
    assert body["n"] == 40
    assert body["kappa"]["ci_low"] <= body["kappa"]["kappa"] <= body["kappa"]["ci_high"]


def test_every_domain_code_maps_to_exactly_one_status():
    # every ArchedError subclass code appears in the table exactly once
    def subclasses(cls):
        for sub in cls.__subclasses__():
            yield sub
            yield from subclasses(sub)

    codes = {cls.code for cls in subclasses(ArchedError)} | {ArchedError.code}
    for code in codes:
        assert code in STATUS_BY_CODE, code
    statuses = [STATUS_BY_CODE[c] for c in STATUS_BY_CODE]
    assert all(isinstance(s, int) for s in statuses)
    assert len(STATUS_BY_CODE) == len(set(STATUS_BY_CODE))


def test_all_responses_carry_headers(client):
    for response in (
        client.get("/api/health"),
        client.get("/api/sessions/ses-nope"),
        client.post("/api/sessions", json={}),
    ):
        assert response.headers["X-Arched-Api"] == "1"
        assert "content-type" in response.headers


def test_static_ui_mount(tmp_path):
    static = tmp_path / "ui"
    static.mkdir()
    (static / "index.html").write_text("<html><body>panel</body></html>")
    config = ServiceConfig(
        data_dir=str(tmp_path / "data"),
        static_dir=str(static),
        backend=BackendConfig(kind="stub"),
    )
    with TestClient(create_app(config)) as client:
        page = client.get("/")
        assert page.status_code == 200
        assert "panel" in page.text
        assert client.get("/api/health").status_code == 200


def test_load_service_config_precedence(tmp_path):
    config_file = tmp_path / "svc.json"
    config_file.write_text(
        json.dumps({"port": 1111, "data_dir": "file-dir", "backend": {"kind": "stub"}})
    )
    env = {"ARCHED_PORT": "2222", "ARCHED_LLM_MODEL": "env-model"}
    config = load_service_config(str(config_file), env=env, overrides={"port": 3333})
    assert config.port == 3333  # CLI beats env beats file
    assert config.data_dir == "file-dir"
    assert config.backend.model_default == "env-model"

    from arched.errors import InvalidInputError

    with pytest.raises(InvalidInputError):
        load_service_config(str(tmp_path / "missing.json"), env={})
    bad = tmp_path / "bad.json"
    bad.write_text('{"nope": 1}')
    with pytest.raises(InvalidInputError):
        load_service_config(str(bad), env={})


def test_sessions_listing(client):
    create_session(client)
    create_session(client)
    listed = client.get("/api/sessions")
    assert listed.status_code == 200
    assert len(listed.json()["sessions"]) == 2
