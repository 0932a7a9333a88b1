"""Uniform model invocation.

This module turns a `ModelRequest` into a `ModelResponse` through one of two
backends:

- `LiveBackend` speaks the OpenAI-compatible chat protocol over HTTP
  (`POST {endpoint_url}/v1/chat/completions`), retrying transient failures
  with exponential backoff and optionally caching responses on disk.
- `SimulatedBackend` answers from a deterministic simulated world.

Cache entries are content addressed: one JSON file per request hash holding
the request and the response text. A cached response is returned bit for bit.
"""

import logging
import os
import tempfile
import threading
import time
from dataclasses import asdict, dataclass
from typing import Protocol

import urllib3
from urllib3.util import Retry

from promptforge.errors import (
    JSONDecodeError,
    ProtocolError,
    ResponseParseError,
    TransportError,
)
from promptforge.typing import BackendTag

from promptforge.constants import (
    API_KEY_ENV_VAR,
    DEFAULT_MAX_TOKENS,
    DEFAULT_PARALLELISM,
    DEFAULT_RETRY_BUDGET,
    DEFAULT_TEMPERATURE,
    DEFAULT_TIMEOUT,
)
from promptforge.path import resolve_path
from promptforge.restruct import (
    gen_hash,
    json_dump,
    json_dumps,
    json_load,
    json_loads,
)

__all__ = [
    "Backend",
    "BackendConfig",
    "LiveBackend",
    "ModelRequest",
    "ModelResponse",
    "ResponseCache",
    "SimWorldHandle",
    "SimulatedBackend",
    "cache_key",
    "clear_live_backends",
    "complete",
    "get_live_backend",
    "simulate_complete",
]

logger = logging.getLogger(__name__)

_RETRY_STATUSES = (429, 500, 502, 503, 504)


@dataclass(frozen=True)
class ModelRequest:
    system_text: str
    user_text: str
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")


@dataclass(frozen=True)
class ModelResponse:
    """Model output.

    `text` is empty only when `error` says why.
    """

    text: str
    backend_tag: BackendTag
    latency: float
    error: str | None = None

    def __post_init__(self) -> None:
        if not self.text and self.error is None:
            raise ValueError("Empty response text requires an error status")


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str
    model_name: str
    timeout: float = DEFAULT_TIMEOUT
    retry_budget: int = DEFAULT_RETRY_BUDGET
    cache_dir: str | None = None
    parallelism: int = DEFAULT_PARALLELISM
    backoff_factor: float = 0.5

    def __post_init__(self) -> None:
        if self.retry_budget < 0:
            raise ValueError(f"retry_budget must be >= 0, got {self.retry_budget}")
        if self.parallelism < 1:
            raise ValueError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")


class Backend(Protocol):
    """Anything that can answer a single-turn model request."""

    parallelism: int

    def complete(self, request: ModelRequest) -> ModelResponse:
        ...


def cache_key(request: ModelRequest, model_name: str) -> str:
    """Stable hash of everything that determines a response."""
    return gen_hash(
        [
            request.system_text,
            request.user_text,
            request.temperature,
            request.max_tokens,
            model_name,
        ]
    )


class ResponseCache:
    """Content-addressed, file-per-request response cache (thread-safe writes)."""

    def __init__(self, cache_dir: str) -> None:
        self.cache_dir = resolve_path(cache_dir)
        os.makedirs(self.cache_dir, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> str:
        return os.path.join(self.cache_dir, f"{key}.json")

    def get(self, key: str) -> str | None:
        path = self._path(key)
        if not os.path.isfile(path):
            return None
        try:
            entry = json_load(path)
        except JSONDecodeError:
            logger.warning(f"Ignoring corrupt cache entry {path}")
            return None
        return entry["response"]["text"]

    def put(self, key: str, request: ModelRequest, model_name: str, text: str) -> None:
        entry = {
            "key": key,
            "model_name": model_name,
            "request": asdict(request),
            "response": {"text": text},
        }
        with self._lock:
            # Write then rename so readers never see a partial file
            fd, tmp_path = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
            os.close(fd)
            try:
                json_dump(tmp_path, entry)
                os.replace(tmp_path, self._path(key))
            finally:
                if os.path.exists(tmp_path):
                    os.remove(tmp_path)


class LiveBackend:
    """OpenAI-compatible chat completions over HTTP.

    Args:
        config (BackendConfig): Endpoint, model, timeout, retry and cache settings.
        api_key (str | None, optional): Bearer credential. Defaults to the PROMPTFORGE_API_KEY
            environment variable.
    """

    def __init__(self, config: BackendConfig, api_key: str | None = None) -> None:
        self.config = config
        self.parallelism = config.parallelism
        self.cache = ResponseCache(config.cache_dir) if config.cache_dir else None
        self._api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV_VAR)
        self._url = config.endpoint_url.rstrip("/") + "/v1/chat/completions"
        self._pool = urllib3.PoolManager(maxsize=max(config.parallelism, 1))
        self._retries = Retry(
            total=config.retry_budget,
            backoff_factor=config.backoff_factor,
            status_forcelist=_RETRY_STATUSES,
            allowed_methods=frozenset({"POST"}),
            raise_on_status=False,
        )
        self._count_lock = threading.Lock()
        self.live_calls = 0

    def _payload(self, request: ModelRequest) -> dict:
        return {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": float(request.temperature),
            "max_tokens": request.max_tokens,
        }

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        return headers

    def complete(self, request: ModelRequest) -> ModelResponse:
        """Send one request, or answer it from the cache.

        Raises:
            TransportError: If the endpoint is unreachable or times out after all retries.
            ProtocolError: If the endpoint answers with a non-2xx status.
            ResponseParseError: If the body does not follow the chat completions schema.
        """
        started = time.perf_counter()
        key = cache_key(request, self.config.model_name)
        if self.cache is not None:
            cached = self.cache.get(key)
            if cached is not None:
                logger.debug(f"Cache hit {key[:12]}")
                return ModelResponse(
                    text=cached,
                    backend_tag="cache",
                    latency=time.perf_counter() - started,
                    error=None if cached else "empty content",
                )

        with self._count_lock:
            self.live_calls += 1
        try:
            resp = self._pool.request(
                "POST",
                self._url,
                body=json_dumps(self._payload(request)).encode("utf-8"),
                headers=self._headers(),
                timeout=urllib3.Timeout(total=self.config.timeout),
                retries=self._retries,
            )
        except urllib3.exceptions.HTTPError as err:
            raise TransportError(f"{self._url}: {err}") from err

        if not 200 <= resp.status < 300:
            body = resp.data.decode("utf-8", errors="replace")[:200]
            raise ProtocolError(resp.status, body)

        text = _parse_chat_completion(resp.data)
        if self.cache is not None:
            self.cache.put(key, request, self.config.model_name, text)
        return ModelResponse(
            text=text,
            backend_tag="live",
            latency=time.perf_counter() - started,
            error=None if text else "empty content",
        )


def _parse_chat_completion(data: bytes) -> str:
    try:
        body = json_loads(data.decode("utf-8"))
    except (JSONDecodeError, UnicodeDecodeError) as err:
        raise ResponseParseError(f"Response is not JSON: {err}") from err
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as err:
        raise ResponseParseError(f"Missing choices[0].message.content: {err!r}") from err
    if content is None:
        return ""
    if not isinstance(content, str):
        raise ResponseParseError(f"Content is {type(content).__name__}, expected string")
    return content


_global_live_backends: dict[BackendConfig, LiveBackend] = {}
_global_live_backends_lock = threading.Lock()


def get_live_backend(config: BackendConfig) -> LiveBackend:
    """Get the shared live backend for a configuration (thread-safe)."""
    with _global_live_backends_lock:
        if config not in _global_live_backends:
            _global_live_backends[config] = LiveBackend(config)
        return _global_live_backends[config]


def clear_live_backends() -> bool:
    """Drop all shared live backends.

    Returns:
        bool: Whether any backends were cleared.
    """
    with _global_live_backends_lock:
        had_backends = bool(_global_live_backends)
        _global_live_backends.clear()
    return had_backends


def complete(request: ModelRequest, config: BackendConfig) -> ModelResponse:
    """Answer a request through the shared live backend for `config`."""
    return get_live_backend(config).complete(request)


class SimWorldHandle(Protocol):
    def respond(self, system_text: str, user_text: str) -> str:
        ...


def simulate_complete(request: ModelRequest, world: SimWorldHandle) -> ModelResponse:
    """Answer a request from a simulated world.

    Raises:
        UnknownRoleError: If the request carries no role marker the world implements.
    """
    started = time.perf_counter()
    text = world.respond(request.system_text, request.user_text)
    return ModelResponse(
        text=text,
        backend_tag="simulated",
        latency=time.perf_counter() - started,
        error=None if text else "empty content",
    )


class SimulatedBackend:
    """Backend adapter around a simulated world. Calls run sequentially."""

    def __init__(self, world: SimWorldHandle) -> None:
        self.world = world
        self.parallelism = 1

    def complete(self, request: ModelRequest) -> ModelResponse:
        return simulate_complete(request, self.world)
