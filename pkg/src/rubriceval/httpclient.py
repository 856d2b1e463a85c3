"""Small HTTP JSON client with bounded retries and optional rate limiting.

Shared by the judge and image-generation clients. Retries cover transient
transport faults (connection errors, timeouts, HTTP 429/5xx) with
exponential backoff; other HTTP errors fail immediately since retrying a
4xx cannot help.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import requests

from .errors import TransportError


@dataclass
class TokenBucket:
    """Classic token bucket: at most `capacity` bursts, refilled at `rate`/s."""

    rate: float
    capacity: float

    def __post_init__(self):
        self._tokens = self.capacity
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(
                    self.capacity, self._tokens + (now - self._last) * self.rate
                )
                self._last = now
                if self._tokens >= 1:
                    self._tokens -= 1
                    return
                wait = (1 - self._tokens) / self.rate
            time.sleep(wait)


RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class HttpJsonClient:
    def __init__(
        self,
        headers: dict | None = None,
        max_retries: int = 3,
        timeout: float = 60.0,
        backoff: float = 0.5,
        rate_limit: TokenBucket | None = None,
        session=None,
    ):
        self.headers = dict(headers or {})
        self.max_retries = max_retries
        self.timeout = timeout
        self.backoff = backoff
        self.rate_limit = rate_limit
        self.session = session if session is not None else requests.Session()

    def post_json(self, url: str, payload: dict) -> dict:
        """POST payload as JSON; returns the decoded JSON response body."""
        last_error = None
        for attempt in range(self.max_retries + 1):
            if self.rate_limit is not None:
                self.rate_limit.acquire()
            if attempt > 0:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                response = self.session.post(
                    url, json=payload, headers=self.headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = f"connection failure: {exc}"
                continue
            if response.status_code in RETRYABLE_STATUS:
                last_error = f"HTTP {response.status_code}"
                continue
            if response.status_code >= 400:
                raise TransportError(
                    f"POST {url} failed with HTTP {response.status_code}: "
                    f"{response.text[:200]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise TransportError(f"POST {url} returned non-JSON body: {exc}")
        raise TransportError(
            f"POST {url} failed after {self.max_retries + 1} attempts ({last_error})"
        )

    def get_bytes(self, url: str) -> bytes:
        """GET a binary resource (e.g. an image the service returned by URL)."""
        last_error = None
        for attempt in range(self.max_retries + 1):
            if self.rate_limit is not None:
                self.rate_limit.acquire()
            if attempt > 0:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                response = self.session.get(
                    url, headers=self.headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = f"connection failure: {exc}"
                continue
            if response.status_code in RETRYABLE_STATUS:
                last_error = f"HTTP {response.status_code}"
                continue
            if response.status_code >= 400:
                raise TransportError(
                    f"GET {url} failed with HTTP {response.status_code}"
                )
            return response.content
        raise TransportError(
            f"GET {url} failed after {self.max_retries + 1} attempts ({last_error})"
        )
