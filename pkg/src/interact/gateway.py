"""
HTTP client for the model gateway.

One JSON protocol, four verbs:
    POST /generate {prompt, nucleus_p} -> {text}
    POST /answer   {prompt}            -> {text}
    POST /embed    {texts: [...]}      -> {vectors: [[...]]}
    POST /score    {prompt}            -> {logprob_true}
Errors are non-2xx responses carrying {error}.
"""

import logging
import math
import threading
from typing import Any, Dict, List, Optional, Sequence

import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from ..config.schema import GatewayConfig
from ..errors import GatewayError, ProtocolError

logger = logging.getLogger(__name__)

RETRY_STATUSES = (429, 500, 502, 503, 504)


def build_session(config: GatewayConfig) -> requests.Session:
    session = requests.Session()
    retries = Retry(
        total=config.retries,
        connect=config.retries,
        read=config.retries,
        status=config.retries,
        backoff_factor=config.backoff_factor,
        status_forcelist=RETRY_STATUSES,
        allowed_methods=frozenset({"POST"}),
        raise_on_status=False,
    )
    adapter = HTTPAdapter(max_retries=retries, pool_maxsize=max(config.max_in_flight, 1))
    session.mount("http://", adapter)
    session.mount("https://", adapter)
    session.headers.update({"Accept": "application/json"})
    return session


class GatewayClient:
    """Thread-safe gateway client with bounded in-flight requests."""

    def __init__(self, config: GatewayConfig, session: Optional[requests.Session] = None):
        self.config = config
        self.session = session or build_session(config)
        self._slots = threading.BoundedSemaphore(config.max_in_flight)

    @property
    def max_attempts(self) -> int:
        return self.config.retries + 1

    def _post(self, verb: str, payload: Dict[str, Any]) -> Dict[str, Any]:
        url = f"{self.config.url.rstrip('/')}/{verb}"
        with self._slots:
            try:
                response = self.session.post(url, json=payload, timeout=self.config.timeout_ms / 1000.0)
            except requests.RequestException as e:
                raise GatewayError(f"{verb}: transport failure: {e}", attempts=self.max_attempts) from e

        if not response.ok:
            try:
                message = response.json().get("error", response.text)
            except ValueError:
                message = response.text
            history = getattr(getattr(response.raw, "retries", None), "history", ())
            raise GatewayError(
                f"{verb}: HTTP {response.status_code}: {message}",
                attempts=len(history) + 1,
                status=response.status_code,
            )
        try:
            body = response.json()
        except ValueError as e:
            raise ProtocolError(f"{verb}: response is not JSON") from e
        if not isinstance(body, dict):
            raise ProtocolError(f"{verb}: response must be a JSON object")
        return body

    def _field(self, verb: str, body: Dict[str, Any], key: str) -> Any:
        if key not in body:
            raise ProtocolError(f"{verb}: response lacks {key!r}")
        return body[key]

    def generate(self, prompt: str, nucleus_p: float) -> str:
        text = self._field("generate", self._post("generate", {"prompt": prompt, "nucleus_p": nucleus_p}), "text")
        if not isinstance(text, str):
            raise ProtocolError("generate: 'text' must be a string")
        return text

    def answer(self, prompt: str) -> str:
        text = self._field("answer", self._post("answer", {"prompt": prompt}), "text")
        if not isinstance(text, str):
            raise ProtocolError("answer: 'text' must be a string")
        return text

    def embed(self, texts: Sequence[str]) -> List[List[float]]:
        vectors = self._field("embed", self._post("embed", {"texts": list(texts)}), "vectors")
        if not isinstance(vectors, list) or not all(isinstance(v, list) for v in vectors):
            raise ProtocolError("embed: 'vectors' must be a list of lists")
        return vectors

    def score(self, prompt: str) -> float:
        """log p(true); a non-numeric, non-finite or positive value is a protocol error."""
        value = self._field("score", self._post("score", {"prompt": prompt}), "logprob_true")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ProtocolError(f"score: 'logprob_true' must be a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value) or value > 0.0:
            raise ProtocolError(f"score: 'logprob_true' must be a finite value <= 0, got {value!r}")
        return value
