"""The single chat-completion boundary.

Every model-backed step (labeling, diagnosis, compatibility, summaries,
preference notes, proficiency bands) goes through ``Gateway``. The gateway
refuses any request whose temperature is not 0, keeps a transcript of every
exchange, and can run against a live provider or a replay store recorded from
an earlier run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import requests
from django.conf import settings

from .exceptions import (
    BackendUnavailable,
    ConflictError,
    IoError,
    NonZeroTemperature,
    ReplayMiss,
    SchemaError,
    UnboundPlaceholder,
    UnusedBindingWarning,
)
from .signals import agent_completed

logger = logging.getLogger(__name__)

PLACEHOLDER = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")

SYSTEM_TEXT = (
    "You are an assistant inside a course analytics pipeline. "
    "Follow the instructions exactly and answer only in the requested format."
)


@dataclass(frozen=True)
class AgentRequest:
    model_id: str
    temperature: float
    system_text: str
    user_text: str


@dataclass(frozen=True)
class AgentResponse:
    text: str
    model_id: str


@dataclass(frozen=True)
class Transcript:
    request: AgentRequest
    response: AgentResponse
    timestamp: datetime
    request_digest: str


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    @property
    def placeholders(self) -> list[str]:
        return list(dict.fromkeys(PLACEHOLDER.findall(self.body)))


def render(template: PromptTemplate, bindings: dict) -> str:
    """Substitute every ``{{name}}`` placeholder; unbound names are an error."""
    names = template.placeholders
    for name in names:
        if name not in bindings:
            raise UnboundPlaceholder(name)
    unused = sorted(set(bindings) - set(names))
    for name in unused:
        logger.warning("template=%s unused_binding=%s", template.name, name)
        warnings.warn(f"binding {name!r} is not used by template {template.name!r}", UnusedBindingWarning)
    # single pass, so substituted values are never themselves re-scanned
    return PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), template.body)


def load_template(name: str) -> PromptTemplate:
    path = Path(settings.ALIGN["PROMPTS_DIR"]) / f"{name}.txt"
    try:
        return PromptTemplate(name=name, body=path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read prompt template {path}: {exc}") from exc


def request_digest(request: AgentRequest) -> str:
    canonical = json.dumps(
        [request.model_id, float(request.temperature), request.system_text, request.user_text],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ── backends ──────────────────────────────────────────────────────────────────

class ReplayBackend:
    """Answers from a recorded store: digest -> {text, model_id}."""

    kind = "replay"

    def __init__(self, store: dict):
        self.store = dict(store)

    @classmethod
    def from_file(cls, path) -> "ReplayBackend":
        return cls(load_replay_store(path))

    def send(self, request: AgentRequest) -> AgentResponse:
        digest = request_digest(request)
        try:
            entry = self.store[digest]
        except KeyError:
            raise ReplayMiss(digest) from None
        return AgentResponse(text=entry["text"], model_id=entry.get("model_id", request.model_id))


class LiveChatBackend:
    """OpenAI-style chat completion over plain HTTP: one system and one user message."""

    kind = "live"

    def __init__(self, url=None, api_key=None, timeout=None, session=None):
        self.url = url if url is not None else settings.ALIGN["LLM_URL"]
        self.api_key = api_key if api_key is not None else settings.ALIGN["LLM_KEY"]
        self.timeout = timeout or settings.ALIGN["HTTP_TIMEOUT"]
        self.session = session or requests.Session()

    def send(self, request: AgentRequest) -> AgentResponse:
        if not self.url:
            raise BackendUnavailable("ALIGN_LLM_URL is not set")
        payload = {
            "model": request.model_id,
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = self.session.post(self.url, json=payload, headers=headers, timeout=self.timeout)
            response.raise_for_status()
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except requests.exceptions.RequestException as exc:
            raise BackendUnavailable(f"chat backend request failed: {exc}") from exc
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"chat backend returned an unexpected body: {exc}") from exc
        return AgentResponse(text=(text or "").strip(), model_id=body.get("model", request.model_id))


# ── gateway ───────────────────────────────────────────────────────────────────

@dataclass
class Gateway:
    backend: object
    model_id: str = ""
    transcripts: list = field(default_factory=list)

    def __post_init__(self):
        self.model_id = self.model_id or settings.ALIGN["MODEL_ID"]
        self._lock = threading.Lock()

    def request(self, user_text: str, system_text: str = SYSTEM_TEXT) -> AgentRequest:
        """Build a pipeline request; the temperature is fixed here and nowhere else."""
        return AgentRequest(model_id=self.model_id, temperature=0.0, system_text=system_text, user_text=user_text)

    def complete(self, request: AgentRequest) -> AgentResponse:
        if request.temperature != 0:
            raise NonZeroTemperature(request.temperature)
        if not request.user_text.strip():
            raise SchemaError("agent request has empty user text")
        digest = request_digest(request)
        response = self.backend.send(request)
        if not response.text:
            raise BackendUnavailable(f"backend returned empty text for request {digest}")
        transcript = Transcript(
            request=request,
            response=response,
            timestamp=datetime.now(timezone.utc),
            request_digest=digest,
        )
        with self._lock:
            self.transcripts.append(transcript)
        agent_completed.send(sender=self.__class__, transcript=transcript, backend=getattr(self.backend, "kind", "custom"))
        return response

    def ask(self, template_name: str, bindings: dict, *, reprompt: str = "") -> str:
        user_text = render(load_template(template_name), bindings)
        if reprompt:
            user_text = f"{user_text}\n\n{reprompt}"
        return self.complete(self.request(user_text)).text


def with_retry(gateway: Gateway, template_name: str, bindings: dict, parse, error_class, reminder: str):
    """Ask once, reprompt once on a contract violation, then give up."""
    text = gateway.ask(template_name, bindings)
    try:
        return parse(text)
    except error_class as first:
        logger.info("template=%s contract_violation=%s reprompting", template_name, first)
    text = gateway.ask(template_name, bindings, reprompt=reminder)
    return parse(text)


# ── replay store files ────────────────────────────────────────────────────────

def record_session(transcripts, sink) -> Path:
    store: dict[str, dict] = {}
    for transcript in transcripts:
        entry = {"text": transcript.response.text, "model_id": transcript.response.model_id}
        previous = store.get(transcript.request_digest)
        if previous is not None and previous["text"] != entry["text"]:
            raise ConflictError(f"request {transcript.request_digest} was answered differently within one run")
        store[transcript.request_digest] = entry
    sink = Path(sink)
    try:
        sink.parent.mkdir(parents=True, exist_ok=True)
        sink.write_text(json.dumps(store, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write replay store {sink}: {exc}") from exc
    logger.info("recorded replay store=%s entries=%d", sink, len(store))
    return sink


def load_replay_store(path) -> dict:
    path = Path(path)
    try:
        store = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read replay store {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"replay store {path} is not valid JSON: {exc}") from exc
    if not isinstance(store, dict) or not all(isinstance(v, dict) and "text" in v for v in store.values()):
        raise SchemaError(f"replay store {path} must map digests to {{text, model_id}} objects")
    return store
