"""Minimal OpenAI-compatible chat-completion client with bounded retries."""

from __future__ import annotations

import logging
import os
import threading
import time
from typing import Any, Callable

import httpx

from ..errors import AuthError, GatewayError

log = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_KEY_ENV = "CRMARL_API_KEY"


class ChatGateway:
    """POSTs ``{base_url}/chat/completions``.

    The API key is read from the environment variable named by ``key_env``
    at call time; it never lives in config files. Transport errors, 429 and
    5xx responses are retried with exponential backoff.
    """

    def __init__(self, base_url: str | None = None, model: str = "gpt-4o-mini",
                 key_env: str = DEFAULT_KEY_ENV, max_retries: int = 3, backoff: float = 0.5,
                 timeout: float = 60.0, max_concurrency: int = 4,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.base_url = (base_url or os.environ.get("CRMARL_BASE_URL") or DEFAULT_BASE_URL).rstrip("/")
        self.model = model
        self.key_env = key_env
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._slots = threading.Semaphore(max_concurrency)
        self.last_attempts = 0

    def api_key(self) -> str:
        key = os.environ.get(self.key_env, "").strip()
        if not key:
            raise AuthError(f"environment variable {self.key_env} is not set")
        return key

    def complete(self, prompt: str | list[dict[str, str]], temperature: float = 0.0,
                 seed: int | None = None) -> str:
        key = self.api_key()
        messages = [{"role": "user", "content": prompt}] if isinstance(prompt, str) else prompt
        body: dict[str, Any] = {"model": self.model, "messages": messages, "temperature": temperature}
        if seed is not None:
            body["seed"] = seed
        url = f"{self.base_url}/chat/completions"
        headers = {"Authorization": f"Bearer {key}"}
        attempts = 0
        while True:
            attempts += 1
            self.last_attempts = attempts
            try:
                with self._slots:
                    log.debug("chat request attempt=%d body=%s", attempts, body)
                    resp = self._client.post(url, json=body, headers=headers)
            except httpx.TransportError as exc:
                err = GatewayError("transport", str(exc), retriable=True)
            else:
                log.debug("chat response status=%d text=%s", resp.status_code, resp.text[:2000])
                if resp.status_code == 200:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise GatewayError("protocol", f"malformed completion: {exc}") from exc
                if resp.status_code in (401, 403):
                    raise AuthError(f"HTTP {resp.status_code}")
                if resp.status_code == 429:
                    err = GatewayError("rate-limit", "HTTP 429", retriable=True)
                elif resp.status_code >= 500:
                    err = GatewayError("server", f"HTTP {resp.status_code}", retriable=True)
                else:
                    raise GatewayError("client", f"HTTP {resp.status_code}: {resp.text[:200]}")
            if attempts > self.max_retries:
                raise err
            delay = self.backoff * 2 ** (attempts - 1)
            log.warning("chat completion failed (%s), retrying in %.2fs", err, delay)
            self.sleep(delay)

    def close(self) -> None:
        self._client.close()


def complete(gateway: ChatGateway, rendered_prompt: str, temperature: float = 0.0,
             seed: int | None = None) -> str:
    return gateway.complete(rendered_prompt, temperature, seed)
