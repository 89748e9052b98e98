"""Provider implementations and config parsing.

Provider configs are strings: "mock:..." selects a deterministic in-process
mock, anything starting with http:// or https:// selects an HTTP client.
Mocks count their calls and accept injected latency and scripted failures,
which is what the timing and cost-structure tests are built on. API keys are
held privately and never appear in reprs, logs, or error messages.
"""

from __future__ import annotations

import threading
import time
from typing import Callable

import httpx

from .errors import ProviderError, ProviderTimeout, TransientProviderError
from .generation import GenerationConfig
from .keywords import MockEmbedder

DEFAULT_MAX_IN_FLIGHT = 4


class MockCompletionProvider:
    """Scripted completion provider.

    reply may be a fixed string or a callable of the prompt; the default
    echoes the prompt length as "len=<n>". fail_times scripts that many
    failures (kind "timeout", "transient", or "client") before success.
    """

    def __init__(self, reply: str | Callable[[str], str] | None = None,
                 latency: float = 0.0, fail_times: int = 0,
                 failure: str = "timeout"):
        self.reply = reply
        self.latency = latency
        self.fail_times = fail_times
        self.failure = failure
        self.provider_id = "mock:"
        self.calls = 0
        self.prompts: list[str] = []

    def complete(self, prompt: str, config: GenerationConfig) -> str:
        self.calls += 1
        self.prompts.append(prompt)
        if self.latency:
            time.sleep(self.latency)
        if self.fail_times > 0:
            self.fail_times -= 1
            if self.failure == "timeout":
                raise ProviderTimeout("mock timeout", stage="generation")
            if self.failure == "transient":
                raise TransientProviderError("mock 500", stage="generation",
                                             status_code=500)
            raise ProviderError("mock 400", stage="generation", status_code=400)
        if callable(self.reply):
            return self.reply(prompt)
        if self.reply is not None:
            return self.reply
        return f"len={len(prompt)}"


class HttpCompletionProvider:
    """Completions-shaped HTTP provider: POST {model, prompt, temperature,
    max_tokens} and read choices[0].text. In-flight calls are capped."""

    def __init__(self, url: str, api_key: str | None = None,
                 max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
                 client: httpx.Client | None = None):
        self.url = url
        self._api_key = api_key
        self._semaphore = threading.Semaphore(max_in_flight)
        self._client = client or httpx.Client()
        self.provider_id = url
        self.calls = 0

    def __repr__(self) -> str:
        return f"HttpCompletionProvider(url={self.url!r})"

    def complete(self, prompt: str, config: GenerationConfig) -> str:
        self.calls += 1
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        body = {
            "model": config.model,
            "prompt": prompt,
            "temperature": config.temperature,
            "max_tokens": config.max_answer_tokens,
        }
        with self._semaphore:
            try:
                response = self._client.post(self.url, json=body, headers=headers,
                                             timeout=config.timeout)
            except httpx.TimeoutException as exc:
                raise ProviderTimeout(f"completion request timed out: {exc}",
                                      stage="generation") from exc
            except httpx.HTTPError as exc:
                raise TransientProviderError(f"completion request failed: {exc}",
                                             stage="generation") from exc
        if response.status_code >= 500:
            raise TransientProviderError(f"completion provider returned "
                                         f"{response.status_code}",
                                         stage="generation",
                                         status_code=response.status_code)
        if response.status_code >= 400:
            raise ProviderError(f"completion provider rejected the request "
                                f"({response.status_code}): {response.text[:200]}",
                                stage="generation", status_code=response.status_code)
        try:
            return response.json()["choices"][0]["text"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"malformed completion response: {exc}",
                                stage="generation") from exc


class HttpEmbedder:
    """Embedding HTTP provider: POST {"texts": [...]}, read {"vectors": [...]}.

    dimension is learned from the first response.
    """

    def __init__(self, url: str, api_key: str | None = None,
                 max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
                 client: httpx.Client | None = None, timeout: float = 30.0):
        self.url = url
        self._api_key = api_key
        self._semaphore = threading.Semaphore(max_in_flight)
        self._client = client or httpx.Client()
        self.timeout = timeout
        self.embedder_id = url
        self.dimension = 0
        self.calls = 0

    def __repr__(self) -> str:
        return f"HttpEmbedder(url={self.url!r})"

    def embed(self, text: str) -> list[float]:
        return self.embed_many([text])[0]

    def embed_many(self, texts: list[str]) -> list[list[float]]:
        self.calls += len(texts)
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        with self._semaphore:
            try:
                response = self._client.post(self.url, json={"texts": texts},
                                             headers=headers, timeout=self.timeout)
            except httpx.TimeoutException as exc:
                raise ProviderTimeout(f"embedding request timed out: {exc}",
                                      stage="embedding") from exc
            except httpx.HTTPError as exc:
                raise TransientProviderError(f"embedding request failed: {exc}",
                                             stage="embedding") from exc
        if response.status_code >= 500:
            raise TransientProviderError(f"embedding provider returned "
                                         f"{response.status_code}", stage="embedding",
                                         status_code=response.status_code)
        if response.status_code >= 400:
            raise ProviderError(f"embedding provider rejected the request "
                                f"({response.status_code})", stage="embedding",
                                status_code=response.status_code)
        try:
            vectors = [[float(v) for v in vec] for vec in response.json()["vectors"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(f"malformed embedding response: {exc}",
                                stage="embedding") from exc
        if len(vectors) != len(texts):
            raise ProviderError(f"embedding provider returned {len(vectors)} vectors "
                                f"for {len(texts)} texts", stage="embedding")
        if vectors and not self.dimension:
            self.dimension = len(vectors[0])
        return vectors


def embedder_from_config(spec: str, api_key: str | None = None):
    """"mock:<dimension>" or an http(s) URL."""
    if spec.startswith("mock:"):
        try:
            dimension = int(spec.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"mock embedder config needs a dimension, got {spec!r}") \
                from None
        return MockEmbedder(dimension)
    if spec.startswith(("http://", "https://")):
        return HttpEmbedder(spec, api_key=api_key)
    raise ValueError(f"unsupported embedder config: {spec!r}")


def completion_from_config(spec: str, api_key: str | None = None):
    """"mock:" (optionally "mock:<fixed reply>") or an http(s) URL."""
    if spec.startswith("mock:"):
        fixed = spec.split(":", 1)[1]
        return MockCompletionProvider(reply=fixed or None)
    if spec.startswith(("http://", "https://")):
        return HttpCompletionProvider(spec, api_key=api_key)
    raise ValueError(f"unsupported completion provider config: {spec!r}")
