"""Text encoders behind one interface.

The hashed character n-gram encoder is the default backend: deterministic
across platforms, dependency-free, and sufficient to exercise every
consumer of the wire contract. Naming a checkpoint in the configuration
selects the transformer backend instead, which needs torch, transformers,
and the weights locally available.
"""

import hashlib
import unicodedata
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .config import HASH_BACKEND, ServiceConfig


@dataclass
class EncodeResult:
    vectors: np.ndarray
    truncated: int


class Encoder(Protocol):
    dim: int
    max_tokens: int
    model_id: str

    def encode(self, texts: Sequence[str]) -> EncodeResult: ...


def _normalize(text: str) -> str:
    return unicodedata.normalize("NFC", " ".join(text.split()).lower())


def _ngram_vector(text: str, dim: int) -> np.ndarray:
    padded = f"^{text}$"
    vec = np.zeros(dim)
    for i in range(len(padded) - 2):
        digest = hashlib.blake2b(padded[i : i + 3].encode("utf-8"), digest_size=8).digest()
        bucket = int.from_bytes(digest[:4], "little") % dim
        vec[bucket] += 1.0 if digest[4] & 1 else -1.0
    if not np.any(vec):
        vec[0] = 1.0  # signs cancelled; keep the vector usable
    return vec


class HashedNgramEncoder:
    """Signed 3-gram hashing with two pooling modes.

    "cls" hashes the whole normalized text as one sequence, standing in
    for a sequence-level summary vector; "mean" averages per-word vectors.
    Both coincide for single-word texts.
    """

    def __init__(self, dim: int, pooling: str, max_tokens: int):
        self.dim = dim
        self.pooling = pooling
        self.max_tokens = max_tokens
        self.model_id = f"{HASH_BACKEND}-{dim}-{pooling}"

    def encode(self, texts: Sequence[str]) -> EncodeResult:
        rows = np.zeros((len(texts), self.dim))
        truncated = 0
        for i, text in enumerate(texts):
            words = _normalize(text).split()
            if len(words) > self.max_tokens:
                words = words[: self.max_tokens]
                truncated += 1
            if self.pooling == "cls":
                rows[i] = _ngram_vector(" ".join(words), self.dim)
            else:
                rows[i] = np.mean([_ngram_vector(w, self.dim) for w in words], axis=0)
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return EncodeResult(rows / norms, truncated)


class TransformerEncoder:
    """Inference-only wrapper around a Hugging Face encoder checkpoint."""

    def __init__(self, model_name: str, pooling: str, max_tokens: int):
        import torch
        from transformers import AutoModel, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name)
        self.model.eval()
        self.pooling = pooling
        self.max_tokens = int(min(max_tokens, self.tokenizer.model_max_length))
        self.dim = int(self.model.config.hidden_size)
        self.model_id = model_name

    def encode(self, texts: Sequence[str]) -> EncodeResult:
        torch = self._torch
        truncated = sum(
            1
            for t in texts
            if len(self.tokenizer(t, truncation=False)["input_ids"]) > self.max_tokens
        )
        batch = self.tokenizer(
            list(texts), padding=True, truncation=True,
            max_length=self.max_tokens, return_tensors="pt",
        )
        with torch.no_grad():
            hidden = self.model(**batch).last_hidden_state
        if self.pooling == "cls":
            pooled = hidden[:, 0, :]
        else:
            mask = batch["attention_mask"].unsqueeze(-1)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
        arr = pooled.cpu().numpy().astype(float)
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return EncodeResult(arr / norms, truncated)


def build_encoder(cfg: ServiceConfig) -> Encoder:
    if cfg.model == HASH_BACKEND:
        return HashedNgramEncoder(cfg.dim, cfg.pooling, cfg.max_tokens)
    return TransformerEncoder(cfg.model, cfg.pooling, cfg.max_tokens)
