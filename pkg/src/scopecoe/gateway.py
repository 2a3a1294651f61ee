"""Single choke point for model calls.

Every call goes through ``complete_cached``: render the template, look the
digest up in the on-disk cache, otherwise call the backend with bounded
retries and persist the raw response verbatim. The mock backend gives the
whole pipeline a deterministic offline stand-in.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Protocol, Sequence, TypeVar

import httpx

from .prompts import ALL_TEMPLATES, PromptTemplate

T = TypeVar("T")
U = TypeVar("U")

DEFAULT_MAX_PARALLEL = 8

_PLACEHOLDER_RE = re.compile(r"\[([A-Za-z][A-Za-z ]*)\]")


class MissingBindingError(KeyError):
    """A template placeholder was left unbound."""


class BackendExhaustedError(RuntimeError):
    """The backend kept failing after the final retry."""


@dataclass(frozen=True)
class CompletionRequest:
    template: str
    bindings: Mapping[str, str]
    model: str = "mock"
    temperature: float = 0.0
    max_output_chars: int = 4000
    # Extra digest component; repeats salt the answering call so each
    # repeat is a genuine backend call even at temperature 0.
    salt: str = ""

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        object.__setattr__(self, "bindings", dict(self.bindings))


def render_prompt(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute placeholders; error on any unbound template variable."""
    for var in template.variables:
        if var not in bindings:
            raise MissingBindingError(
                f"template {template.name!r}: missing binding for [{var}]"
            )
    out = template.body
    # Longest-first so e.g. [Correct Answer] is never clobbered by a
    # hypothetical shorter [Answer] binding.
    for var in sorted(template.variables, key=len, reverse=True):
        out = out.replace(f"[{var}]", str(bindings[var]))
    return out


def rendered_for(req: CompletionRequest) -> str:
    return render_prompt(ALL_TEMPLATES[req.template], req.bindings)


class Backend(Protocol):
    deterministic: bool

    def complete(self, req: CompletionRequest, prompt: str) -> str: ...


class ResponseCache:
    """Content-addressed cache: one JSON file per request digest."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    @staticmethod
    def digest(req: CompletionRequest, prompt: str) -> str:
        h = hashlib.sha256()
        h.update(req.model.encode())
        h.update(b"\x00")
        h.update(repr(req.temperature).encode())
        h.update(b"\x00")
        h.update(prompt.encode())
        if req.salt:
            h.update(b"\x00")
            h.update(req.salt.encode())
        return h.hexdigest()

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> Optional[str]:
        path = self._path(key)
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)["response"]

    def put(self, key: str, req: CompletionRequest, prompt: str, response: str) -> None:
        record = {
            "model": req.model,
            "temperature": req.temperature,
            "template": req.template,
            "salt": req.salt,
            "prompt": prompt,
            "response": response,
        }
        tmp = self._path(key).with_suffix(".tmp")
        with self._lock:
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(record, fh, ensure_ascii=False)
            os.replace(tmp, self._path(key))


def complete_cached(
    req: CompletionRequest,
    backend: Backend,
    cache: Optional[ResponseCache] = None,
    retries: int = 3,
    backoff_base: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Cache-or-call with bounded retries and exponential backoff.

    Parsing failures are not handled here; downstream parsers decide
    whether a syntactically bad response warrants a reprompt.
    """
    prompt = rendered_for(req)
    key = ResponseCache.digest(req, prompt)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit
    last_error: Optional[Exception] = None
    for attempt in range(retries):
        try:
            response = backend.complete(req, prompt)
            break
        except Exception as exc:  # noqa: BLE001 - provider errors are opaque
            last_error = exc
            if attempt < retries - 1:
                sleep(backoff_base * (2**attempt))
    else:
        raise BackendExhaustedError(
            f"backend failed after {retries} attempts: {last_error}"
        ) from last_error
    if len(response) > req.max_output_chars:
        response = response[: req.max_output_chars]
    if cache is not None:
        cache.put(key, req, prompt, response)
    return response


def parallel_map(
    fn: Callable[[T], U], items: Sequence[T], max_workers: int = DEFAULT_MAX_PARALLEL
) -> list[U]:
    """Order-preserving map with bounded parallelism."""
    if max_workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


def _contains(needle: str, haystack: str) -> bool:
    return needle.lower() in haystack.lower()


@dataclass(frozen=True)
class QARule:
    """Mock answering rule: emit the first candidate found in the context,
    provided every required evidence string is present."""

    requires: tuple[str, ...]
    candidates: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "requires", tuple(self.requires))
        object.__setattr__(self, "candidates", tuple(self.candidates))


@dataclass
class MockRules:
    """Deterministic response rules for the offline backend.

    - extractions: question -> {"Intent": ..., "Keywords": [...]}
    - relations: question -> list of {"Keywords": [a, b], "Description": ...}
    - phrases: input phrase -> output phrase (answer generation, hypernyms)
    - qa: question -> QARule
    Yes/no judgments are computed, not tabulated: "yes" iff the bound
    intent/keyword (or, for relations, every pair keyword) is contained
    case-insensitively in the bound external knowledge.
    """

    extractions: dict[str, dict] = field(default_factory=dict)
    relations: dict[str, list] = field(default_factory=dict)
    phrases: dict[str, str] = field(default_factory=dict)
    qa: dict[str, QARule] = field(default_factory=dict)


class MockBackend:
    """Rule-driven deterministic backend for offline runs and tests."""

    deterministic = True

    def __init__(self, rules: Optional[MockRules] = None):
        self.rules = rules or MockRules()
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest, prompt: str) -> str:
        with self._lock:
            self.calls += 1
        handler = getattr(self, f"_handle_{req.template}", None)
        if handler is None:
            raise ValueError(f"mock backend has no rule for template {req.template!r}")
        return handler(req.bindings)

    def _handle_intent_keyword_extraction(self, b: Mapping[str, str]) -> str:
        found = self.rules.extractions.get(
            b["Question"], {"Intent": "unknown", "Keywords": []}
        )
        return json.dumps(found, ensure_ascii=False)

    def _handle_relation_extraction(self, b: Mapping[str, str]) -> str:
        return json.dumps(self.rules.relations.get(b["Question"], []), ensure_ascii=False)

    def _handle_intent_discrimination(self, b: Mapping[str, str]) -> str:
        return "yes" if _contains(b["Intent"], b["External Knowledge"]) else "no"

    def _handle_keyword_discrimination(self, b: Mapping[str, str]) -> str:
        return "yes" if _contains(b["Keyword"], b["External Knowledge"]) else "no"

    def _handle_relation_discrimination(self, b: Mapping[str, str]) -> str:
        # The pair keywords ride along as an extra binding; without them the
        # mock falls back to containment of the full description.
        raw = b.get("Relation Keywords")
        knowledge = b["External Knowledge"]
        if raw:
            pair = json.loads(raw)
            ok = all(_contains(kw, knowledge) for kw in pair)
        else:
            ok = _contains(b["Relation"], knowledge)
        return "yes" if ok else "no"

    def _handle_answer_generation(self, b: Mapping[str, str]) -> str:
        return self.rules.phrases.get(b["Correct Answer"], "unknown phrase")

    def _handle_hypernym_generalization(self, b: Mapping[str, str]) -> str:
        return self.rules.phrases.get(b["Keyword"], "a general thing")

    def _handle_misinformation_generation(self, b: Mapping[str, str]) -> str:
        count = int(b["Count"])
        wrong = b["Incorrect Answer"]
        statements = [
            f"Reliable sources report that the answer is {wrong}.",
            f"It is well documented that {wrong} is the correct answer.",
            f"Recent records confirm the answer as {wrong}.",
            f"Experts agree that {wrong} answers this question.",
        ]
        out = [statements[i % len(statements)] for i in range(count)]
        return json.dumps(out, ensure_ascii=False)

    def _handle_qa_answer(self, b: Mapping[str, str]) -> str:
        rule = self.rules.qa.get(b["Question"])
        if rule is None:
            return "unknown"
        knowledge = b["External Knowledge"]
        if not all(_contains(req, knowledge) for req in rule.requires):
            return "unknown"
        for candidate in rule.candidates:
            if _contains(candidate, knowledge):
                return candidate
        return "unknown"

    def _handle_consistency_judge(self, b: Mapping[str, str]) -> str:
        return "yes" if _contains(b["Reference Answer"], b["Model Output"]) else "no"


class OpenAIBackend:
    """Thin chat-completions client; credentials come from the environment.

    Non-deterministic by declaration even at temperature 0, so its results
    are never assumed replayable without the cache.
    """

    deterministic = False

    def __init__(
        self,
        model: str,
        api_key: Optional[str] = None,
        base_url: Optional[str] = None,
        timeout: float = 60.0,
    ):
        self.model = model
        self.api_key = api_key or os.environ.get("OPENAI_API_KEY", "")
        self.base_url = base_url or os.environ.get(
            "OPENAI_BASE_URL", "https://api.openai.com/v1"
        )
        self.timeout = timeout
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest, prompt: str) -> str:
        if not self.api_key:
            raise RuntimeError("OPENAI_API_KEY is not set")
        with self._lock:
            self.calls += 1
        resp = httpx.post(
            f"{self.base_url}/chat/completions",
            headers={"Authorization": f"Bearer {self.api_key}"},
            json={
                "model": self.model,
                "temperature": req.temperature,
                "messages": [{"role": "user", "content": prompt}],
            },
            timeout=self.timeout,
        )
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]


def make_backend(spec: str, rules: Optional[MockRules] = None) -> Backend:
    """Resolve a --backend flag value: ``mock`` or ``openai:<model>``."""
    if spec == "mock":
        return MockBackend(rules)
    if spec.startswith("openai:"):
        return OpenAIBackend(model=spec.split(":", 1)[1])
    raise ValueError(f"unknown backend {spec!r}")


@dataclass
class Client:
    """Bundles a backend with its cache and call settings.

    Temperature defaults to 0 everywhere: randomness is controlled by
    repeating trials, not by sampling settings.
    """

    backend: Backend
    cache: Optional[ResponseCache] = None
    model: str = "mock"
    temperature: float = 0.0
    retries: int = 3
    max_parallel: int = DEFAULT_MAX_PARALLEL

    def call(self, template: str, bindings: Mapping[str, str], salt: str = "") -> str:
        req = CompletionRequest(
            template=template,
            bindings=bindings,
            model=self.model,
            temperature=self.temperature,
            salt=salt,
        )
        return complete_cached(req, self.backend, self.cache, retries=self.retries)

    @property
    def calls(self) -> int:
        return getattr(self.backend, "calls", 0)


def first_json_value(text: str):
    """Extract the first well-formed JSON object or array from a response.

    Few-shot prompts usually suppress chatter, but not always; scanning
    tolerates surrounding prose.
    """
    decoder = json.JSONDecoder()
    for m in re.finditer(r"[{\[]", text):
        try:
            value, _ = decoder.raw_decode(text, m.start())
            return value
        except json.JSONDecodeError:
            continue
    return None
