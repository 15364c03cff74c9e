import json
import logging
import threading
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arched.errors import (
    GatewayProtocolError,
    GatewayRequestError,
    GatewayTimeoutError,
    InvalidInputError,
    StructuredOutputError,
)
from arched.gateway import (
    BackendConfig,
    ChatMessage,
    ChatRequest,
    LlmGateway,
    config_from_env,
    extract_structured_value,
)


def make_request(system="You are a helper.", user="Say hi.", temperature=0.2):
    return ChatRequest(
        model="test-model",
        messages=(ChatMessage("system", system), ChatMessage("user", user)),
        temperature=temperature,
    )


def choice_body(content, model="fixture-model"):
    return json.dumps(
        {
            "model": model,
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": 7, "completion_tokens": 3},
        }
    ).encode()


# --- request/config validation ------------------------------------------------------

def test_request_validation():
    with pytest.raises(InvalidInputError):
        ChatRequest(model="m", messages=())
    with pytest.raises(InvalidInputError):
        ChatRequest(model="m", messages=(ChatMessage("user", "hi"),))
    with pytest.raises(InvalidInputError):
        make_request(temperature=-0.1)
    with pytest.raises(InvalidInputError):
        ChatMessage("narrator", "hi")


def test_backend_config_validation():
    with pytest.raises(InvalidInputError):
        BackendConfig(kind="http")  # missing base_url
    with pytest.raises(InvalidInputError):
        BackendConfig(kind="carrier-pigeon")
    config = BackendConfig(kind="http", base_url="http://x", api_key="sk-secret")
    assert "sk-secret" not in repr(config)


def test_config_from_env():
    env = {
        "ARCHED_LLM_BACKEND": "http",
        "ARCHED_LLM_BASE_URL": "http://localhost:9",
        "ARCHED_LLM_API_KEY": "sk-abc",
        "ARCHED_LLM_MODEL": "local-model",
    }
    config = config_from_env(env)
    assert config.kind == "http"
    assert config.model_default == "local-model"
    assert config_from_env({}).kind == "stub"


# --- stub backend ---------------------------------------------------------------------

def test_stub_is_deterministic(stub_gateway):
    req = make_request()
    assert stub_gateway.complete(req).content == stub_gateway.complete(req).content


simple_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=60
)


@settings(max_examples=40, deadline=None)
@given(
    system=simple_text,
    user=simple_text,
    temperature=st.sampled_from((0.0, 0.2, 0.8)),
    max_tokens=st.sampled_from((256, 1024)),
)
def test_stub_pure_function_of_messages_model_temperature(system, user, temperature, max_tokens):
    gateway = LlmGateway(BackendConfig(kind="stub"))
    r1 = gateway.complete(
        ChatRequest(
            model="m",
            messages=(ChatMessage("system", system), ChatMessage("user", user)),
            temperature=temperature,
            max_tokens=max_tokens,
        )
    )
    r2 = gateway.complete(
        ChatRequest(
            model="m",
            messages=(ChatMessage("system", system), ChatMessage("user", user)),
            temperature=temperature,
            max_tokens=2048,  # not part of the stub's determinism domain
        )
    )
    assert r1.content == r2.content
    assert r1.backend == "stub"


def test_stub_varies_with_temperature(stub_gateway):
    a = stub_gateway.complete(make_request(temperature=0.2))
    b = stub_gateway.complete(make_request(temperature=0.8))
    assert a.content != b.content


# --- structured extraction ------------------------------------------------------------

def test_extract_from_fenced_block():
    text = 'Sure!\n```json\n{"a": 1}\n```\nHope this helps.'
    assert extract_structured_value(text) == {"a": 1}


def test_extract_from_bare_json_with_prose():
    text = 'The answer is {"a": [1, 2]} as requested.'
    assert extract_structured_value(text) == {"a": [1, 2]}


def test_extract_prefers_first_valid_block():
    text = "```json\nnot json\n```\n```json\n[1]\n```"
    assert extract_structured_value(text) == [1]


def test_extract_none_when_no_structure():
    assert extract_structured_value("just words { not json") is None


SCHEMA = {
    "type": "object",
    "required": ["answer"],
    "properties": {"answer": {"type": "integer"}},
}


class QueueBackend(LlmGateway):
    """Stub gateway whose complete() pops scripted contents."""

    def __init__(self, contents):
        super().__init__(BackendConfig(kind="stub"))
        self.contents = list(contents)
        self.calls = []

    def complete(self, req):
        self.calls.append(req)
        content = self.contents.pop(0)
        from arched.gateway import ChatResponse, ChatUsage

        return ChatResponse(
            content=content, model=req.model, usage=ChatUsage(), backend="stub", latency_ms=0.0
        )


def test_structured_accepts_valid_block_with_prose():
    backend = QueueBackend(['Here you go:\n```json\n{"answer": 41}\n```\n'])
    assert backend.complete_structured(make_request(), SCHEMA) == {"answer": 41}
    assert len(backend.calls) == 1


def test_structured_reprompts_once_with_violation():
    backend = QueueBackend(['{"answer": "nope"}', '{"answer": 7}'])
    assert backend.complete_structured(make_request(), SCHEMA) == {"answer": 7}
    assert len(backend.calls) == 2
    correction = backend.calls[1].messages[-1]
    assert correction.role == "user"
    assert "not machine-readable" in correction.content


def test_structured_fails_after_exactly_two_attempts():
    backend = QueueBackend(["word salad", "more salad", "never reached"])
    with pytest.raises(StructuredOutputError) as exc_info:
        backend.complete_structured(make_request(), SCHEMA)
    assert len(backend.calls) == 2
    assert exc_info.value.detail["attempts"] == ["word salad", "more salad"]


# --- http backend -----------------------------------------------------------------------

def http_gateway(base_url, **kwargs):
    config = BackendConfig(
        kind="http", base_url=base_url, api_key="sk-SECRET", max_retries=3, **kwargs
    )
    return LlmGateway(config, sleep=lambda s: None)


def test_http_passthrough(fixture_server):
    handler, base_url = fixture_server
    handler.script.append((200, choice_body("canned answer")))
    response = http_gateway(base_url).complete(make_request())
    assert response.content == "canned answer"
    assert response.backend == "http"
    assert response.model == "fixture-model"
    assert response.usage.prompt_tokens == 7
    assert response.retry_count == 0


def test_http_retries_on_5xx_then_succeeds(fixture_server):
    handler, base_url = fixture_server
    handler.script.extend(
        [(500, b"boom"), (500, b"boom"), (200, choice_body("eventually"))]
    )
    response = http_gateway(base_url).complete(make_request())
    assert response.content == "eventually"
    assert response.retry_count == 2
    assert handler.requests_seen == 3


def test_http_retries_exhausted(fixture_server):
    handler, base_url = fixture_server
    handler.script.extend([(503, b"nope")] * 4)
    with pytest.raises(GatewayRequestError) as exc_info:
        http_gateway(base_url).complete(make_request())
    assert exc_info.value.status == 503
    assert handler.requests_seen == 4  # initial try + 3 retries


def test_http_429_is_retried(fixture_server):
    handler, base_url = fixture_server
    handler.script.extend([(429, b"slow down"), (200, choice_body("ok"))])
    assert http_gateway(base_url).complete(make_request()).content == "ok"


def test_http_4xx_is_permanent(fixture_server):
    handler, base_url = fixture_server
    handler.script.append((404, b"what model?"))
    with pytest.raises(GatewayRequestError) as exc_info:
        http_gateway(base_url).complete(make_request())
    assert exc_info.value.status == 404
    assert "what model?" in exc_info.value.body_excerpt
    assert handler.requests_seen == 1  # no retry on permanent errors


def test_http_malformed_body_is_protocol_error(fixture_server):
    handler, base_url = fixture_server
    handler.script.append((200, b"not json at all"))
    with pytest.raises(GatewayProtocolError):
        http_gateway(base_url).complete(make_request())
    handler.script.append((200, b'{"choices": []}'))
    with pytest.raises(GatewayProtocolError):
        http_gateway(base_url).complete(make_request())


def test_http_timeout_maps_to_timeout_error():
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    class SlowHandler(BaseHTTPRequestHandler):
        def do_POST(self):
            self.rfile.read(int(self.headers.get("Content-Length", 0)))
            time.sleep(0.5)
            body = choice_body("too late")
            self.send_response(200)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), SlowHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        config = BackendConfig(
            kind="http",
            base_url=f"http://127.0.0.1:{server.server_address[1]}",
            timeout_ms=100,
            max_retries=1,
        )
        gateway = LlmGateway(config, sleep=lambda s: None)
        with pytest.raises(GatewayTimeoutError):
            gateway.complete(make_request())
    finally:
        server.shutdown()
        thread.join(timeout=5)


def test_api_key_never_logged(fixture_server, caplog):
    handler, base_url = fixture_server
    handler.script.extend([(500, b"x"), (200, choice_body("fine"))])
    with caplog.at_level(logging.DEBUG, logger="arched.gateway"):
        http_gateway(base_url).complete(make_request())
    blob = "\n".join(r.getMessage() for r in caplog.records) + repr(caplog.records)
    assert "sk-SECRET" not in blob
    assert any("retrying" in r.getMessage() for r in caplog.records)


# --- concurrency cap ----------------------------------------------------------------------

def test_max_in_flight_bounds_concurrency():
    config = BackendConfig(kind="stub", max_in_flight=3)
    gateway = LlmGateway(config)
    active = 0
    peak = 0
    guard = threading.Lock()
    original = gateway._slots

    class CountingSlots:
        def __enter__(self):
            original.acquire()
            nonlocal active, peak
            with guard:
                active += 1
                peak = max(peak, active)
            time.sleep(0.01)

        def __exit__(self, *exc):
            nonlocal active
            with guard:
                active -= 1
            original.release()

    gateway._slots = CountingSlots()
    threads = [
        threading.Thread(target=lambda: gateway.complete(make_request(user=f"u{i}")))
        for i in range(12)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak <= 3
