"""Scoring backends: a real cross-encoder and an offline stub.

Model ids prefixed `stub:` select `StubBackend`, which needs no weights,
no downloads, and scores deterministically across processes — char-trigram
coverage of the hypothesis by the premise, smoothed and given a tiny
hash-derived jitter so it behaves like an opaque model rather than a
transparent overlap ratio.  Anything else loads a sequence-classification
checkpoint and returns the softmax probability of its entailment label.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, Sequence, runtime_checkable

Pair = tuple[str, str]

STUB_PREFIX = "stub:"


@runtime_checkable
class Backend(Protocol):
    model: str
    max_length: int
    labels: tuple[str, ...]
    entailment_index: int

    def score(self, pairs: Sequence[Pair]) -> list[float]: ...


def _trigrams(text: str) -> set[str]:
    norm = " ".join(text.casefold().split())
    padded = f"##{norm}##"
    return {padded[i : i + 3] for i in range(len(padded) - 2)}


def _stub_pair(premise: str, hypothesis: str) -> float:
    prem, hyp = _trigrams(premise), _trigrams(hypothesis)
    coverage = len(hyp & prem) / len(hyp)
    digest = hashlib.blake2b(
        f"{premise}\x1f{hypothesis}".encode(), digest_size=4
    ).digest()
    jitter = (int.from_bytes(digest, "big") / 0xFFFFFFFF - 0.5) * 0.04
    return min(1.0, max(0.0, 0.12 + 0.88 * coverage**1.5 + jitter))


class StubBackend:
    max_length = 512
    labels = ("contradiction", "entailment", "neutral")
    entailment_index = 1

    def __init__(self, model: str) -> None:
        self.model = model

    def score(self, pairs: Sequence[Pair]) -> list[float]:
        return [_stub_pair(p, h) for p, h in pairs]


class CrossEncoderBackend:
    """Sequence-classification checkpoint scored pair-by-pair batches.

    Evaluation mode only; no sampling anywhere, so identical requests give
    identical scores within one process.
    """

    def __init__(self, model: str, device: str = "cpu", chunk: int = 32) -> None:
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self._torch = torch
        self.model = model
        self._device = device
        self._chunk = chunk
        self._tokenizer = AutoTokenizer.from_pretrained(model)
        self._model = AutoModelForSequenceClassification.from_pretrained(model)
        self._model.to(device)
        self._model.eval()

        label2id = {
            name.lower(): idx for name, idx in self._model.config.label2id.items()
        }
        if "entailment" not in label2id:
            raise ValueError(
                f"model {model!r} has no 'entailment' label (labels: {sorted(label2id)})"
            )
        self.entailment_index = int(label2id["entailment"])
        self.labels = tuple(
            name for name, _ in sorted(label2id.items(), key=lambda kv: kv[1])
        )
        max_len = int(self._tokenizer.model_max_length)
        if max_len > 1_000_000:  # some tokenizers report a sentinel
            max_len = int(self._model.config.max_position_embeddings)
        self.max_length = max_len

    def score(self, pairs: Sequence[Pair]) -> list[float]:
        torch = self._torch
        scores: list[float] = []
        with torch.inference_mode():
            for start in range(0, len(pairs), self._chunk):
                batch = pairs[start : start + self._chunk]
                enc = self._tokenizer(
                    [p for p, _ in batch],
                    [h for _, h in batch],
                    padding=True,
                    truncation=True,
                    max_length=self.max_length,
                    return_tensors="pt",
                ).to(self._device)
                probs = torch.softmax(self._model(**enc).logits, dim=-1)
                col = probs[:, self.entailment_index]
                scores.extend(float(min(1.0, max(0.0, v))) for v in col.tolist())
        return scores


def make_backend(model: str, device: str = "cpu") -> Backend:
    if model.startswith(STUB_PREFIX):
        return StubBackend(model)
    return CrossEncoderBackend(model, device=device)
