"""Provider-agnostic chat-completion client.

Speaks the OpenAI-compatible wire protocol over HTTP, and ships a
deterministic stub backend so the whole system runs and tests offline. Also
enforces the structured-output contract (extract, validate, one corrective
re-prompt) that the generation and analysis engines rely on.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import httpx
import jsonschema

from .bloom import BloomLevel, bundled_lexicon, classify_by_verb, tokenize, verbs_for_level
from .canonical import canonical_json_bytes
from .errors import (
    GatewayError,
    GatewayProtocolError,
    GatewayRequestError,
    GatewayTimeoutError,
    InvalidInputError,
    StructuredOutputError,
)

logger = logging.getLogger("arched.gateway")

MARKER_LOGS = "[ARCHED:LOGS:v1]"
MARKER_OAE = "[ARCHED:OAE:v1]"
MARKER_ASSESS = "[ARCHED:ASSESS:v1]"

DEFAULT_MODEL = "gpt-4o-mini-2024-07-18"

_BACKOFF_BASE_S = 0.5
_BACKOFF_FACTOR = 2.0
_BACKOFF_JITTER = 0.2

_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in _ROLES:
            raise InvalidInputError(f"unknown message role: {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.2
    max_tokens: int = 1024
    seed_hint: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise InvalidInputError("messages must be non-empty")
        if self.messages[0].role != "system":
            raise InvalidInputError("first message must have the system role")
        if self.temperature < 0:
            raise InvalidInputError("temperature must be >= 0")


@dataclass(frozen=True)
class ChatUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class ChatResponse:
    content: str
    model: str
    usage: ChatUsage
    backend: str  # "http" | "stub"
    latency_ms: float
    retry_count: int = 0


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "stub"  # "http" | "stub"
    base_url: str | None = None
    api_key: str | None = field(default=None, repr=False)
    model_default: str = DEFAULT_MODEL
    timeout_ms: int = 60_000
    max_retries: int = 3
    max_in_flight: int = 4

    def __post_init__(self):
        if self.kind not in ("http", "stub"):
            raise InvalidInputError(f"unknown backend kind: {self.kind!r}")
        if self.kind == "http" and not self.base_url:
            raise InvalidInputError("http backend requires base_url")
        if self.max_in_flight < 1:
            raise InvalidInputError("max_in_flight must be >= 1")


def config_from_env(env: Mapping[str, str] = os.environ) -> BackendConfig:
    """Backend configuration from ARCHED_LLM_* environment variables."""
    return BackendConfig(
        kind=env.get("ARCHED_LLM_BACKEND", "stub"),
        base_url=env.get("ARCHED_LLM_BASE_URL"),
        api_key=env.get("ARCHED_LLM_API_KEY"),
        model_default=env.get("ARCHED_LLM_MODEL", DEFAULT_MODEL),
    )


# --- structured-output extraction ---------------------------------------------

_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


def extract_structured_value(text: str) -> Any | None:
    """First well-formed JSON object/array in ``text``, tolerating prose and fences."""
    for m in _FENCE_RE.finditer(text):
        try:
            return json.loads(m.group(1))
        except ValueError:
            continue
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch in "{[":
            try:
                value, _ = decoder.raw_decode(text, i)
            except ValueError:
                continue
            return value
    return None


class LlmGateway:
    """Shared chat-completion client with bounded concurrency.

    At most ``max_in_flight`` requests are outstanding per instance; extra
    callers block until a slot frees up.
    """

    def __init__(self, config: BackendConfig, sleep=time.sleep):
        self.config = config
        self._sleep = sleep
        self._slots = threading.Semaphore(config.max_in_flight)
        self._rng = random.Random()
        self._client: httpx.Client | None = None
        if config.kind == "http":
            self._client = httpx.Client(timeout=config.timeout_ms / 1000.0)

    @property
    def default_model(self) -> str:
        return self.config.model_default

    def close(self) -> None:
        if self._client is not None:
            self._client.close()

    def complete(self, req: ChatRequest) -> ChatResponse:
        """Run one chat completion against the configured backend."""
        with self._slots:
            started = time.monotonic()
            if self.config.kind == "stub":
                content = _stub_content(req)
                latency = (time.monotonic() - started) * 1000.0
                return ChatResponse(
                    content=content,
                    model=req.model,
                    usage=ChatUsage(
                        prompt_tokens=sum(len(m.content) for m in req.messages) // 4,
                        completion_tokens=len(content) // 4,
                    ),
                    backend="stub",
                    latency_ms=latency,
                )
            return self._http_complete(req, started)

    def _http_complete(self, req: ChatRequest, started: float) -> ChatResponse:
        payload: dict[str, Any] = {
            "model": req.model,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.seed_hint is not None:
            payload["seed"] = req.seed_hint
        headers = {}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        url = (self.config.base_url or "").rstrip("/") + "/v1/chat/completions"

        assert self._client is not None
        attempt = 0
        while True:
            failure: GatewayError | None = None
            response = None
            try:
                response = self._client.post(url, json=payload, headers=headers)
            except httpx.TimeoutException as e:
                failure = GatewayTimeoutError(f"backend timed out: {e}")
            except httpx.HTTPError as e:
                failure = GatewayError(f"transport failure: {e}")

            if response is not None:
                if response.status_code == 200:
                    return self._parse_http_response(req, response, attempt, started)
                excerpt = response.text[:300]
                if response.status_code == 429 or response.status_code >= 500:
                    failure = GatewayRequestError(
                        f"backend returned {response.status_code}",
                        status=response.status_code,
                        body_excerpt=excerpt,
                    )
                else:
                    raise GatewayRequestError(
                        f"backend rejected request with {response.status_code}",
                        status=response.status_code,
                        body_excerpt=excerpt,
                    )

            assert failure is not None
            if attempt >= self.config.max_retries:
                raise failure
            delay = (
                _BACKOFF_BASE_S
                * (_BACKOFF_FACTOR**attempt)
                * self._rng.uniform(1 - _BACKOFF_JITTER, 1 + _BACKOFF_JITTER)
            )
            logger.warning(
                "retrying completion (attempt %d/%d) after %s",
                attempt + 1,
                self.config.max_retries,
                type(failure).__name__,
            )
            self._sleep(delay)
            attempt += 1

    def _parse_http_response(
        self, req: ChatRequest, response: httpx.Response, retries: int, started: float
    ) -> ChatResponse:
        try:
            data = response.json()
        except ValueError:
            raise GatewayProtocolError("backend response body is not valid JSON") from None
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise GatewayProtocolError("backend response missing choices[0].message.content") from None
        if not isinstance(content, str):
            raise GatewayProtocolError("backend returned non-text content")
        usage = data.get("usage") or {}
        latency = (time.monotonic() - started) * 1000.0
        logger.debug(
            "completion ok backend=http model=%s latency_ms=%.1f retries=%d",
            data.get("model", req.model),
            latency,
            retries,
        )
        return ChatResponse(
            content=content,
            model=data.get("model", req.model),
            usage=ChatUsage(
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
            ),
            backend="http",
            latency_ms=latency,
            retry_count=retries,
        )

    def complete_structured(self, req: ChatRequest, schema: dict) -> Any:
        """Completion that must yield a JSON value matching ``schema``.

        Extracts the first structured block from the reply and validates it;
        on failure, re-prompts once quoting the violation. Two total attempts,
        then a ``StructuredOutputError`` carrying every raw response.
        """
        attempts: list[str] = []
        current = req
        violation = ""
        for attempt in range(2):
            response = self.complete(current)
            attempts.append(response.content)
            value = extract_structured_value(response.content)
            if value is None:
                violation = "no parseable JSON block found in the reply"
            else:
                try:
                    jsonschema.validate(value, schema)
                    return value
                except jsonschema.ValidationError as e:
                    violation = e.message[:300]
            if attempt == 0:
                correction = ChatMessage(
                    role="user",
                    content=(
                        "Your previous reply was not machine-readable: "
                        f"{violation}. Respond again with only a JSON block "
                        "matching the required schema."
                    ),
                )
                current = replace(
                    req,
                    messages=req.messages
                    + (ChatMessage(role="assistant", content=response.content), correction),
                )
        raise StructuredOutputError(
            f"structured output failed validation after 2 attempts: {violation}",
            detail={"attempts": attempts},
        )


# --- deterministic stub backend -------------------------------------------------

_LEVEL_DEMANDS = {
    BloomLevel.REMEMBER: "retrieve the relevant facts from memory",
    BloomLevel.UNDERSTAND: "make sense of the material in their own terms",
    BloomLevel.APPLY: "carry out a procedure in a concrete situation",
    BloomLevel.ANALYZE: "break the material apart and relate its pieces",
    BloomLevel.EVALUATE: "weigh the material against explicit criteria",
    BloomLevel.CREATE: "put elements together into an original product",
}

_ASPECTS = (
    "key concepts",
    "core principles",
    "essential components",
    "representative examples",
    "fundamental properties",
    "common pitfalls",
)

_TAILS = (
    "with at least {pct}% accuracy",
    "using the course materials",
    "by the end of the unit",
    "in a short written exercise",
)

_ITEM_TYPES = ("multiple-choice", "short-answer", "project-task", "discussion-prompt")

_ITEM_STEMS = {
    BloomLevel.REMEMBER: "Recall and write down what the objective asks about: {focus}.",
    BloomLevel.UNDERSTAND: "In your own words, explain the idea behind: {focus}.",
    BloomLevel.APPLY: "Work through a new instance of: {focus}.",
    BloomLevel.ANALYZE: "Break down and relate the parts involved in: {focus}.",
    BloomLevel.EVALUATE: "Judge, with explicit criteria, the approach described in: {focus}.",
    BloomLevel.CREATE: "Produce an original artifact that satisfies: {focus}.",
}


def _stub_seed(req: ChatRequest) -> int:
    # Pure function of (messages, model, temperature) only.
    digest = hashlib.sha256(
        canonical_json_bytes(
            {
                "messages": [[m.role, m.content] for m in req.messages],
                "model": req.model,
                "temperature": req.temperature,
            }
        )
    ).digest()
    return int.from_bytes(digest[:8], "big")


def _stub_params(req: ChatRequest) -> dict | None:
    for message in reversed(req.messages):
        if message.role != "user":
            continue
        value = extract_structured_value(message.content)
        if isinstance(value, dict):
            return value
    return None


def _fenced(value: Any, preamble: str) -> str:
    body = json.dumps(value, sort_keys=True, ensure_ascii=False, indent=2)
    return f"{preamble}\n\n```json\n{body}\n```\n"


def _stub_content(req: ChatRequest) -> str:
    rng = random.Random(_stub_seed(req))
    system = req.messages[0].content
    params = _stub_params(req) or {}
    task = params.get("task")
    if MARKER_LOGS in system:
        return _stub_generate(params, rng)
    if MARKER_OAE in system and task == "classify-level":
        return _stub_classify(params)
    if MARKER_OAE in system and task == "score-rubric":
        return _stub_rubric(params)
    if MARKER_ASSESS in system:
        return _stub_assess(params, rng)
    return f"Acknowledged (stub backend, fingerprint {rng.getrandbits(32):08x})."


def _stub_generate(params: dict, rng: random.Random) -> str:
    levels = [BloomLevel.parse(name) for name in params.get("target_levels", [])]
    count = int(params.get("count_per_level", 1))
    topic = str(params.get("topic", "the topic"))
    avoid = set(params.get("avoid_texts", []))
    objectives = []
    seen: set[str] = set()
    for level in levels:
        verbs = verbs_for_level(level)
        for i in range(count):
            verb = rng.choice(verbs)
            aspect = rng.choice(_ASPECTS)
            tail = rng.choice(_TAILS).format(pct=rng.choice((70, 75, 80, 85, 90)))
            text = f"Students will {verb} {aspect} of {topic} {tail}"
            k = 2
            while text in avoid or text in seen:
                text = f"Students will {verb} {aspect} of {topic} {tail} (variant {k})"
                k += 1
            seen.add(text)
            objectives.append(
                {
                    "text": text,
                    "level": level.label,
                    "rationale": (
                        f"'{verb.capitalize()}' is an exemplar {level.label} verb: "
                        f"students must {_LEVEL_DEMANDS[level]}."
                    ),
                }
            )
    return _fenced({"objectives": objectives}, "Here are the drafted objectives.")


def _first_lemma(text: str) -> str | None:
    lex = bundled_lexicon()
    for token in tokenize(text):
        lemma = lex.lemmatize(token)
        if lemma is not None:
            return lemma
    return None


def _stub_classify(params: dict) -> str:
    text = str(params.get("objective_text", ""))
    verdict = classify_by_verb(text) if text.strip() else None
    if verdict is None:
        level = BloomLevel.UNDERSTAND
        reasoning = (
            "Step 1: no operative action verb from the taxonomy lexicon is present. "
            "Step 2: without an observable verb the demanded cognitive work is unclear. "
            "Step 3: defaulting to Understand with low confidence."
        )
    else:
        level = verdict
        lemma = _first_lemma(text) or "the verb"
        reasoning = (
            f"Step 1: the operative verb is '{lemma}'. "
            f"Step 2: that verb asks students to {_LEVEL_DEMANDS[level]}. "
            f"Step 3: this matches the {level.label} level."
        )
    return _fenced({"level": level.label, "reasoning": reasoning}, "Reasoning complete.")


def _stub_rubric(params: dict) -> str:
    text = str(params.get("objective_text", ""))
    evidence = params.get("evidence") or {}
    parts = evidence.get("abcd_present") or []
    behavior_present = bool(evidence.get("behavior_present"))
    smart = evidence.get("smart") or {}
    verb_level = evidence.get("verb_level")
    declared = evidence.get("declared_level")

    structural = min(5, 1 + len(parts)) if behavior_present else 1
    measurable = 5 if smart.get("measurable") else 2
    taxonomic = 5 if (declared and verb_level and declared == verb_level) else 3
    clarity = 4 if len(text) <= 160 else 3
    technical = 4
    notes = {
        "structural": f"ABCD parts detected: {', '.join(parts) if parts else 'none'}.",
        "taxonomic": (
            f"Declared level {declared or 'absent'}; verb analysis says {verb_level or 'inconclusive'}."
        ),
        "measurable": "Behavior verb is observable." if smart.get("measurable") else "No observable behavior verb.",
        "clarity": "Concise single-sentence objective." if len(text) <= 160 else "Long sentence; consider splitting.",
        "technical": "Terminology is plausible for the stated subject.",
    }
    suggestions = []
    for part, hint in (
        ("condition", "State the condition (tools, references, or scenario) students work under."),
        ("degree", "Add a success criterion, e.g. a minimum accuracy or count."),
        ("audience", "Name the audience explicitly (e.g. 'students will ...')."),
    ):
        if part not in parts:
            suggestions.append(hint)
    if not behavior_present:
        suggestions.insert(0, "Replace the non-observable verb with an observable action verb.")
    payload = {
        "structural": structural,
        "taxonomic": taxonomic,
        "measurable": measurable,
        "clarity": clarity,
        "technical": technical,
        "notes": notes,
        "improvement_suggestions": suggestions,
    }
    return _fenced(payload, "Rubric assessment follows.")


def _stub_assess(params: dict, rng: random.Random) -> str:
    per_objective = int(params.get("per_objective", 1))
    items = []
    for obj in params.get("objectives", []):
        level = BloomLevel.parse(obj.get("level", "Understand"))
        focus = str(obj.get("text", ""))[:120]
        for i in range(per_objective):
            item_type = rng.choice(_ITEM_TYPES)
            items.append(
                {
                    "objective_id": obj.get("id", ""),
                    "item_type": item_type,
                    "stem": _ITEM_STEMS[level].format(focus=focus),
                    "answer_guide": (
                        f"Credit responses that {_LEVEL_DEMANDS[level]}; "
                        f"item {i + 1} of {per_objective} for this objective."
                    ),
                    "bloom_target": level.label,
                }
            )
    return _fenced({"items": items}, "Draft assessment items follow.")
