"""Pluggable chat and scoring backends.

Wire contracts:
  POST /chat  {template_id, rendered_prompt, images: [base64], decoding} -> {text}
  POST /score {title, abstract, caption, image: base64|null, question}
              -> {token_nlls: [float], mean_nll: float}

Three modes everywhere: ``mock`` (deterministic offline synthesis), ``replay``
(answers only from a recorded cache, no network), ``live`` (HTTP). Any backend
can be wrapped in a recorder that appends request-hash -> response pairs to a
replay cache, making live runs replayable offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import BackendUnavailable, ConfigError
from .jsonio import append_jsonl, canonical_dumps, iter_jsonl
from .prompts import BackendRequest

logger = logging.getLogger(__name__)

BACKEND_MODES = ("mock", "replay", "live")


def _payload_hash(payload: dict) -> str:
    return hashlib.sha256(canonical_dumps(payload).encode("utf-8")).hexdigest()


@dataclass
class ChatCall:
    """The wire payload for one /chat request."""

    template_id: str
    rendered_prompt: str
    images: list[str]
    decoding: dict

    @classmethod
    def from_request(cls, request: BackendRequest, images_b64: list[str]) -> "ChatCall":
        return cls(template_id=request.template_id, rendered_prompt=request.render(),
                   images=images_b64, decoding=request.decoding)

    def payload(self) -> dict:
        return {"template_id": self.template_id,
                "rendered_prompt": self.rendered_prompt,
                "images": self.images, "decoding": self.decoding}

    def request_hash(self) -> str:
        return _payload_hash(self.payload())


@dataclass
class ScoreCall:
    """The wire payload for one /score request."""

    title: str
    abstract: str
    caption: str
    image: str | None
    question: str

    def payload(self) -> dict:
        return {"title": self.title, "abstract": self.abstract,
                "caption": self.caption, "image": self.image,
                "question": self.question}

    def request_hash(self) -> str:
        return _payload_hash(self.payload())


@dataclass
class ScoreResult:
    token_nlls: list[float]
    mean_nll: float


class ReplayCache:
    """Append-only request-hash -> response log; single writer, many readers."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.entries: dict[str, object] = {}
        if self.path.exists():
            for obj in iter_jsonl(self.path):
                self.entries[obj["request_hash"]] = obj["response"]

    def get(self, request_hash: str) -> object | None:
        return self.entries.get(request_hash)

    def put(self, request_hash: str, kind: str, response: object,
            request: dict | None = None) -> None:
        """Record a response; the full request payload rides along so recorded
        runs double as an audit log (replay looks up by hash only)."""
        with self._lock:
            if request_hash in self.entries:
                return
            entry = {"request_hash": request_hash, "kind": kind, "response": response}
            if request is not None:
                entry["request"] = request
            append_jsonl(self.path, entry)
            self.entries[request_hash] = response


class TokenBucket:
    """Simple rate limiter: `rate` permits per second, burst up to `capacity`."""

    def __init__(self, rate: float, capacity: int | None = None):
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1, int(rate))
        self._tokens = float(self.capacity)
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


def parallel_map(fn, items, workers: int = 1, rate: float | None = None) -> list:
    """Apply fn over independent work units with bounded in-flight calls.

    Results come back in input order regardless of completion order, so
    parallel runs write identical files. An optional token bucket throttles
    the aggregate request rate.
    """
    bucket = TokenBucket(rate) if rate else None

    def wrapped(item):
        if bucket is not None:
            bucket.acquire()
        return fn(item)

    if workers <= 1:
        return [wrapped(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(wrapped, items))


# =============================================================================
# Chat backends
# =============================================================================

class ChatBackend(ABC):
    """Chat completion against a rendered template; implementations log calls."""

    def __init__(self) -> None:
        self.calls: list[dict] = []

    def complete(self, call: ChatCall) -> str:
        self.calls.append(call.payload())
        return self._complete(call)

    @abstractmethod
    def _complete(self, call: ChatCall) -> str:
        ...


class ScoreBackend(ABC):
    def __init__(self) -> None:
        self.calls: list[dict] = []

    def score(self, call: ScoreCall) -> ScoreResult:
        self.calls.append(call.payload())
        return self._score(call)

    @abstractmethod
    def _score(self, call: ScoreCall) -> ScoreResult:
        ...


class ReplayChatBackend(ChatBackend):
    def __init__(self, cache: ReplayCache):
        super().__init__()
        self.cache = cache

    def _complete(self, call: ChatCall) -> str:
        response = self.cache.get(call.request_hash())
        if response is None:
            raise BackendUnavailable(
                f"replay cache has no response for {call.template_id} request "
                f"{call.request_hash()[:12]} (replay mode never touches the network)")
        return str(response)


class ReplayScoreBackend(ScoreBackend):
    def __init__(self, cache: ReplayCache):
        super().__init__()
        self.cache = cache

    def _score(self, call: ScoreCall) -> ScoreResult:
        response = self.cache.get(call.request_hash())
        if response is None:
            raise BackendUnavailable(
                f"replay cache has no response for score request "
                f"{call.request_hash()[:12]}")
        assert isinstance(response, dict)
        return ScoreResult(token_nlls=list(response["token_nlls"]),
                           mean_nll=float(response["mean_nll"]))


class RecordingChatBackend(ChatBackend):
    def __init__(self, inner: ChatBackend, cache: ReplayCache):
        super().__init__()
        self.inner = inner
        self.cache = cache

    def _complete(self, call: ChatCall) -> str:
        text = self.inner.complete(call)
        self.cache.put(call.request_hash(), "chat", text, request=call.payload())
        return text


class RecordingScoreBackend(ScoreBackend):
    def __init__(self, inner: ScoreBackend, cache: ReplayCache):
        super().__init__()
        self.inner = inner
        self.cache = cache

    def _score(self, call: ScoreCall) -> ScoreResult:
        result = self.inner.score(call)
        self.cache.put(call.request_hash(), "score",
                       {"token_nlls": result.token_nlls, "mean_nll": result.mean_nll},
                       request=call.payload())
        return result


class LiveChatBackend(ChatBackend):
    def __init__(self, base_url: str, api_key_env: str = "MQUD_API_KEY",
                 timeout: float = 120.0):
        super().__init__()
        self.base_url = base_url.rstrip("/")
        self.api_key = os.environ.get(api_key_env, "")
        self.timeout = timeout

    def _complete(self, call: ChatCall) -> str:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            response = httpx.post(f"{self.base_url}/chat", json=call.payload(),
                                  headers=headers, timeout=self.timeout)
            response.raise_for_status()
            return response.json()["text"]
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise BackendUnavailable(f"chat backend failed: {exc}") from exc


class LiveScoreBackend(ScoreBackend):
    def __init__(self, base_url: str, api_key_env: str = "MQUD_API_KEY",
                 timeout: float = 120.0):
        super().__init__()
        self.base_url = base_url.rstrip("/")
        self.api_key = os.environ.get(api_key_env, "")
        self.timeout = timeout

    def _score(self, call: ScoreCall) -> ScoreResult:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            response = httpx.post(f"{self.base_url}/score", json=call.payload(),
                                  headers=headers, timeout=self.timeout)
            response.raise_for_status()
            obj = response.json()
            return ScoreResult(token_nlls=list(obj["token_nlls"]),
                               mean_nll=float(obj["mean_nll"]))
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise BackendUnavailable(f"score backend failed: {exc}") from exc


# =============================================================================
# Deterministic offline mocks
# =============================================================================

_STOPWORDS = frozenset(
    "a an and are as at be but by for from has have in is it its of on or "
    "that the their this to was we were which with across over under within "
    "each all both when what how why against during between".split())

_VISUAL_WORDS = ("figure", "panel", "curve", "line", "bar", "region", "axis")


def _hash_unit(*parts: str) -> float:
    """Deterministic float in [0, 1) from strings."""
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2 ** 64


def _field_after(prompt: str, marker: str) -> str:
    idx = prompt.find(marker)
    if idx < 0:
        return ""
    rest = prompt[idx + len(marker):]
    return rest.split("\n", 1)[0].strip()


def _block_after(prompt: str, marker: str) -> str:
    idx = prompt.find(marker)
    if idx < 0:
        return ""
    rest = prompt[idx + len(marker):]
    return rest.split("\n\nReturn", 1)[0].strip()


def _content_tokens(text: str) -> list[str]:
    tokens = re.findall(r"[a-z0-9]+", text.lower())
    seen: list[str] = []
    for tok in tokens:
        if tok in _STOPWORDS or len(tok) <= 3 or tok in seen:
            continue
        seen.append(tok)
    return seen


def _make_words(n: int, pool: list[str], salt: str) -> str:
    """Exactly-n-word filler text drawn deterministically from a token pool."""
    if not pool:
        pool = ["observed", "pattern", "values", "trend"]
    start = int(_hash_unit(salt) * len(pool))
    words = [pool[(start + i) % len(pool)] for i in range(n)]
    return " ".join(words) + "."


class MockChatBackend(ChatBackend):
    """Synthesizes well-formed responses from the rendered prompt alone.

    Everything derives from hashes of the prompt text, so identical pipelines
    produce identical corpora with no network and no stored cache.
    """

    GENERATION_PLAN = [
        # (type, answer_words, flavor) per candidate slot; flavor "dup" repeats
        # the first question nearly verbatim, "vague" fails the grounding check.
        ("cause", 22, "plain"),
        ("comparison", 19, "plain"),
        ("extent", 121, "plain"),
        ("consequence", 60, "plain"),
        ("procedural", 45, "vague"),
        ("concept", 85, "plain"),
        ("cause", 30, "dup"),
    ]

    def _complete(self, call: ChatCall) -> str:
        handler = {
            "qud_generate": self._generate,
            "rephrase": self._rephrase,
            "grounding_check": self._grounding,
            "judge": self._judge,
        }[call.template_id]
        return handler(call.rendered_prompt)

    def _generate(self, prompt: str) -> str:
        n_match = re.search(r"Generate (\d+) natural", prompt)
        n = int(n_match.group(1)) if n_match else 5
        caption = _field_after(prompt, "Caption: ")
        paragraphs = _block_after(prompt, "Text discussing this figure:\n")
        cap_tokens = _content_tokens(caption) or ["pattern", "results"]
        k0 = cap_tokens[0]
        k1 = cap_tokens[1] if len(cap_tokens) > 1 else "baseline"
        sentences = [s.strip() for s in re.split(r"(?<=\.)\s+", paragraphs) if s.strip()]
        pool = _content_tokens(paragraphs) + cap_tokens

        question_forms = {
            "cause": f"Why does the {k0} shown in the figure change across the {k1} condition?",
            "comparison": f"How do the {k0} and {k1} trends plotted in the figure differ between settings?",
            "extent": f"To what extent does the {k0} vary with {k1} in the plotted curve?",
            "consequence": f"What happens to the {k0} when the {k1} increases in this panel?",
            "procedural": f"How is the stable {k0} behavior visible in the figure achieved?",
            "concept": f"What does the shaded {k0} region of the figure represent for {k1}?",
        }
        items = []
        for i, (qtype, n_words, flavor) in enumerate(self.GENERATION_PLAN[:n]):
            question = question_forms[qtype]
            if flavor == "dup":
                question = question[:-1] + " overall?"
            source = sentences[i % len(sentences)] if sentences else ""
            if flavor == "vague":
                answer = ("The change can be seen by looking at the plot; "
                          "see the figure for the relevant values. "
                          + _make_words(max(4, n_words - 18), pool, question))
            else:
                answer = _make_words(n_words, pool, question)
            items.append({
                "question": question,
                "answer": answer,
                "answer_source": source,
                "question_type": qtype,
                "difficulty": "medium" if i % 2 == 0 else "hard",
            })
        return json.dumps(items)

    def _rephrase(self, prompt: str) -> str:
        n_match = re.search(r"produce (\d+) rephrased", prompt)
        n = int(n_match.group(1)) if n_match else 2
        question = _field_after(prompt, "Original question: ")
        answer = _block_after(prompt, "Original answer: ")
        pool = _content_tokens(answer) or ["finding"]
        stripped = question.rstrip("?")
        lowered = stripped[0].lower() + stripped[1:] if stripped else stripped
        variants = [
            {"question": f"In what way {lowered}?",
             "answer": _make_words(25, pool, question + "v1")},
            {"question": f"What explains the pattern where {lowered.replace('why does ', '')}?",
             "answer": _make_words(70, pool, question + "v2")},
        ]
        extra = [{"question": f"Could you clarify how {lowered}?",
                  "answer": _make_words(40, pool, question + f"v{i}")}
                 for i in range(3, n + 1)]
        return json.dumps((variants + extra)[:n])

    def _grounding(self, prompt: str) -> str:
        answer = _block_after(prompt, "\nAnswer: ").lower()
        vague = "see the figure" in answer or "looking at the plot" in answer
        return json.dumps({"grounded": not vague,
                           "reason": "vague non-answer" if vague else
                           "claims trace to the provided text"})

    def _judge(self, prompt: str) -> str:
        question = _field_after(prompt, "Question: ")
        answer = _block_after(prompt, "\nAnswer: ")
        seed = f"{question}|{answer}"

        def pick(dim: str, weighted: list[tuple[str, float]]) -> str:
            u = _hash_unit(seed, dim)
            acc = 0.0
            for value, weight in weighted:
                acc += weight
                if u < acc:
                    return value
            return weighted[-1][0]

        verdict = {
            "q-grammar": pick("grammar", [("perfect", 0.7), ("minor", 0.2), ("major", 0.1)]),
            "salience": pick("salience", [("very", 0.55), ("somewhat", 0.3), ("not", 0.15)]),
            "answer_quality": pick("quality", [("4", 0.3), ("3", 0.4), ("2", 0.2), ("1", 0.1)]),
            "answer-correct": pick("correct", [("yes", 0.6), ("partial", 0.25), ("no", 0.15)]),
            "figure-useful": pick("useful", [("essential", 0.5), ("helpful", 0.35), ("not", 0.15)]),
            "answered-by-figure": pick("answered", [("yes", 0.5), ("no", 0.5)]),
            "figure-type": pick("ftype", [("result", 0.45), ("data", 0.2), ("method", 0.15),
                                          ("comparison", 0.15), ("other", 0.05)]),
            "notes": "automatic verdict",
        }
        return json.dumps(verdict)


class MockScoreBackend(ScoreBackend):
    """Deterministic pseudo-NLLs.

    Per-token values hash from the text-only condition; a present image scales
    them down by an image-specific factor, so the figure always "helps" and
    different figures help differently, mimicking a figure-sensitive model
    without content-specific grounding.
    """

    def _score(self, call: ScoreCall) -> ScoreResult:
        text_key = canonical_dumps({"title": call.title, "abstract": call.abstract,
                                    "caption": call.caption, "question": call.question})
        tokens = call.question.split()
        values = [0.8 + 2.4 * _hash_unit(text_key, str(i)) for i in range(len(tokens))]
        if call.image is not None:
            factor = 0.70 + 0.15 * _hash_unit("image", call.image)
            values = [v * factor for v in values]
        values = [round(v, 9) for v in values]
        mean = round(sum(values) / len(values), 9) if values else 0.0
        return ScoreResult(token_nlls=values, mean_nll=mean)


# =============================================================================
# Construction from CLI flags
# =============================================================================

def make_chat_backend(mode: str, cache_path: Path | None = None,
                      base_url: str | None = None,
                      record: bool = False) -> ChatBackend:
    if mode not in BACKEND_MODES:
        raise ConfigError(f"unknown backend mode {mode!r}; pick one of {BACKEND_MODES}")
    if mode == "replay":
        if cache_path is None:
            raise ConfigError("replay mode needs a cache file")
        return ReplayChatBackend(ReplayCache(cache_path))
    backend: ChatBackend
    if mode == "mock":
        backend = MockChatBackend()
    else:
        if not base_url:
            raise ConfigError("live mode needs --backend-url")
        backend = LiveChatBackend(base_url)
    if record:
        if cache_path is None:
            raise ConfigError("recording needs a cache file")
        backend = RecordingChatBackend(backend, ReplayCache(cache_path))
    return backend


def make_score_backend(mode: str, cache_path: Path | None = None,
                       base_url: str | None = None,
                       record: bool = False) -> ScoreBackend:
    if mode not in BACKEND_MODES:
        raise ConfigError(f"unknown backend mode {mode!r}; pick one of {BACKEND_MODES}")
    if mode == "replay":
        if cache_path is None:
            raise ConfigError("replay mode needs a cache file")
        return ReplayScoreBackend(ReplayCache(cache_path))
    backend: ScoreBackend
    if mode == "mock":
        backend = MockScoreBackend()
    else:
        if not base_url:
            raise ConfigError("live mode needs --backend-url")
        backend = LiveScoreBackend(base_url)
    if record:
        if cache_path is None:
            raise ConfigError("recording needs a cache file")
        backend = RecordingScoreBackend(backend, ReplayCache(cache_path))
    return backend
