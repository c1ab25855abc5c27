"""Entailment scorer contract plus the two implementations.

The contract is a single operation: ``entail_batch`` maps (premise,
hypothesis) pairs to scores in [0, 1], preserving order and length.

`LexicalScorer` is the dependency-free default: token-overlap containment,
deterministic, runs anywhere.  It stands in for a neural scorer while
keeping the signal's shape — steps grounded in their evidence score higher
than ungrounded ones.  `RemoteScorer` talks to an HTTP scoring service for
model-based entailment.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import requests

Pair = tuple[str, str]


@runtime_checkable
class EntailmentScorer(Protocol):
    def entail_batch(self, pairs: Sequence[Pair]) -> list[float]:
        """One score in [0,1] per pair, in input order."""
        ...


class ScorerError(Exception):
    """Base class for scorer failures."""


class ScorerUnavailableError(ScorerError):
    """The remote service could not be reached after exhausting retries."""


class ScorerProtocolError(ScorerError):
    """The remote service answered, but the reply violates the wire contract."""


def lexical_entail(premise: str, hypothesis: str) -> float:
    """Fraction of hypothesis tokens covered by premise tokens (multisets).

    Uses the same normalization as answer scoring, so "15; 12" ⊨ "team a had
    15 wins" scores 1/5.  Empty hypothesis scores 0.
    """
    from .rewards import normalize_answer_tokens

    hyp = normalize_answer_tokens(hypothesis)
    hyp_total = sum(hyp.values())
    if hyp_total == 0:
        return 0.0
    prem = normalize_answer_tokens(premise)
    overlap = sum((hyp & prem).values())
    return overlap / hyp_total


class LexicalScorer:
    def entail_batch(self, pairs: Sequence[Pair]) -> list[float]:
        return [lexical_entail(premise, hypothesis) for premise, hypothesis in pairs]


@dataclass(frozen=True)
class ScorerConfig:
    kind: str = "lexical"
    endpoint: str = "http://127.0.0.1:8400"
    batch_size: int = 32
    timeout: float = 30.0
    retries: int = 2
    max_inflight: int = 4

    def __post_init__(self) -> None:
        if self.kind not in ("lexical", "remote"):
            raise ValueError(f"unknown scorer kind: {self.kind!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.max_inflight < 1:
            raise ValueError("max_inflight must be >= 1")


class RemoteScorer:
    """HTTP client for the scoring service wire protocol.

    POST /score with ``{"pairs": [{"premise", "hypothesis"}, ...]}``; the
    service answers ``{"entailment": [...]}``.  Requests are chunked to
    ``batch_size``; transient transport failures retry with exponential
    backoff; contract violations (wrong length, out-of-range score) raise
    immediately since retrying cannot fix a broken peer.
    """

    def __init__(self, config: ScorerConfig):
        if config.kind != "remote":
            raise ValueError("RemoteScorer requires a config with kind='remote'")
        self.config = config
        self._gate = threading.Semaphore(config.max_inflight)

    def entail_batch(self, pairs: Sequence[Pair]) -> list[float]:
        scores: list[float] = []
        for start in range(0, len(pairs), self.config.batch_size):
            chunk = pairs[start : start + self.config.batch_size]
            scores.extend(self._score_chunk(chunk))
        return scores

    def _score_chunk(self, chunk: Sequence[Pair]) -> list[float]:
        body = {
            "pairs": [{"premise": p, "hypothesis": h} for p, h in chunk]
        }
        url = self.config.endpoint.rstrip("/") + "/score"
        last_error: Exception | None = None
        for attempt in range(self.config.retries + 1):
            if attempt:
                time.sleep(0.25 * 2 ** (attempt - 1))
            try:
                with self._gate:
                    response = requests.post(url, json=body, timeout=self.config.timeout)
                response.raise_for_status()
                payload = response.json()
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
                continue
            return _validate_scores(payload, expected=len(chunk))
        raise ScorerUnavailableError(
            f"scoring service at {url} unreachable after "
            f"{self.config.retries + 1} attempts: {last_error}"
        )

    def check_health(self) -> str:
        """Return the model identifier reported by the service, or raise."""
        url = self.config.endpoint.rstrip("/") + "/healthz"
        try:
            response = requests.get(url, timeout=self.config.timeout)
            response.raise_for_status()
            payload = response.json()
        except (requests.RequestException, ValueError) as exc:
            raise ScorerUnavailableError(f"health check failed for {url}: {exc}")
        model = payload.get("model") if isinstance(payload, dict) else None
        if not isinstance(model, str):
            raise ScorerProtocolError(f"health reply missing model identifier: {payload!r}")
        return model


def _validate_scores(payload: object, expected: int) -> list[float]:
    if not isinstance(payload, dict) or "entailment" not in payload:
        raise ScorerProtocolError(f"reply missing 'entailment' field: {payload!r}")
    raw = payload["entailment"]
    if not isinstance(raw, list) or len(raw) != expected:
        got = len(raw) if isinstance(raw, list) else type(raw).__name__
        raise ScorerProtocolError(f"expected {expected} scores, got {got}")
    scores: list[float] = []
    for i, value in enumerate(raw):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ScorerProtocolError(f"score {i} is not a number: {value!r}")
        if not 0.0 <= value <= 1.0:
            raise ScorerProtocolError(f"score {i} out of range [0,1]: {value!r}")
        scores.append(float(value))
    return scores


def make_scorer(config: ScorerConfig) -> EntailmentScorer:
    if config.kind == "lexical":
        return LexicalScorer()
    return RemoteScorer(config)
