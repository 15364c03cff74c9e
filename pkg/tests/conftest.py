import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from arched.bloom import BloomLevel, bundled_lexicon
from arched.gateway import BackendConfig, LlmGateway
from arched.objectives import GenerationSpec


@pytest.fixture(scope="session")
def lexicon():
    return bundled_lexicon()


@pytest.fixture()
def stub_gateway():
    return LlmGateway(BackendConfig(kind="stub"))


@pytest.fixture()
def small_spec():
    return GenerationSpec(
        grade_level="undergraduate-intro",
        subject="computer science",
        topic="recursion",
        target_levels=frozenset({BloomLevel.REMEMBER, BloomLevel.CREATE}),
        count_per_level=2,
    )


class ScriptedGateway:
    """Duck-typed gateway whose complete_structured pops queued values.

    A queued Exception instance is raised instead of returned; useful for
    forcing the rule-fallback paths.
    """

    def __init__(self, responses, model="scripted-model"):
        self.responses = list(responses)
        self.requests = []
        self.config = BackendConfig(kind="stub")
        self.default_model = model

    def complete_structured(self, req, schema):
        self.requests.append(req)
        if not self.responses:
            raise AssertionError("ScriptedGateway exhausted")
        value = self.responses.pop(0)
        if isinstance(value, Exception):
            raise value
        return value


@pytest.fixture()
def scripted_gateway_factory():
    return ScriptedGateway


class _ScriptedHttpHandler(BaseHTTPRequestHandler):
    script = []  # list of (status, body_bytes) shared per server instance
    lock = threading.Lock()
    requests_seen = 0

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        self.rfile.read(length)
        cls = type(self)
        with cls.lock:
            cls.requests_seen += 1
            status, body = cls.script.pop(0) if cls.script else (500, b"{}")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def fixture_server():
    """Loopback HTTP server replaying a scripted list of (status, body) pairs."""

    class Handler(_ScriptedHttpHandler):
        script = []
        lock = threading.Lock()
        requests_seen = 0

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base_url = f"http://127.0.0.1:{server.server_address[1]}"
    yield Handler, base_url
    server.shutdown()
    thread.join(timeout=5)
