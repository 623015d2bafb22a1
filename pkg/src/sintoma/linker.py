"""Two-stage entity linking against the alias knowledge base.

Stage one matches the normalized mention surface exactly. Stage two
embeds the mention and scores every KB record by cosine similarity,
optionally combining three views of the mention (full text, leading
window, trailing window) into one score. Candidate alias vectors are
never windowed; only the mention side is.

The scan is exact (no approximate index): the KB is small enough that a
dense matrix product beats index maintenance, and exactness lets tests
compare against a brute-force oracle.
"""

from __future__ import annotations

import hashlib
import math
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import (
    DimensionMismatch,
    EmbedderError,
    EmptyMention,
    EmptyStore,
    EmptyText,
    EmptyValidation,
    ParseError,
    ZeroVector,
)
from .kb import KnowledgeBase, exact_lookup, normalize_surface
from .spans import Mention, NO_CODE

_STORE_MAGIC = b"EMB1"
_NORM_TOLERANCE = 1e-6

LINK_METHODS = ("exact", "cosine", "cosine_window", "abstain")


# --- embedders ----------------------------------------------------------------


class Embedder(Protocol):
    provider_id: str

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


def embed_stub(texts: Sequence[str], dim: int = 256) -> np.ndarray:
    """Deterministic fallback embedder: hashed character 3-grams.

    Each text is lowercased, padded with ``^`` and ``$`` markers, and its
    character 3-grams are counted into ``dim`` buckets chosen by a keyed
    64-bit blake2b hash, so vectors are identical across platforms and
    runs. Rows are L2-normalized.
    """
    if dim < 16:
        raise ValueError(f"dim must be >= 16, got {dim}")
    out = np.zeros((len(texts), dim))
    for row, text in enumerate(texts):
        if not text:
            raise EmptyText(f"cannot embed empty text at position {row}")
        padded = "^" + text.lower() + "$"
        for i in range(len(padded) - 2):
            gram = padded[i : i + 3]
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
            out[row, int.from_bytes(digest, "little") % dim] += 1.0
    return out / np.linalg.norm(out, axis=1, keepdims=True)


@dataclass
class StubEmbedder:
    """Offline embedder wrapping :func:`embed_stub`."""

    dim: int = 256
    provider_id: str = field(init=False)

    def __post_init__(self):
        self.provider_id = f"stub-3gram-{self.dim}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return embed_stub(texts, self.dim)


class ServiceEmbedder:
    """Client for the /embed wire contract.

    POSTs ``{"texts": [...]}`` and expects ``{"dim": N, "vectors": [...]}``
    in input order. Transient failures (connection errors, 5xx, 503 while
    the model loads) are retried; responses are checked for shape and a
    stable dim across calls, then defensively renormalized.
    """

    def __init__(
        self,
        url: str,
        *,
        timeout: float = 30.0,
        max_retries: int = 3,
        session: requests.Session | None = None,
    ):
        if not url:
            raise ValueError("service url must be non-empty")
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries
        self.provider_id = f"service:{self.url}"
        self._session = session or requests.Session()
        self._dim: int | None = None

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise EmptyText("no texts to embed")
        payload = {"texts": list(texts)}
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            if attempt:
                time.sleep(0.5 * attempt)
            try:
                resp = self._session.post(
                    self.url + "/embed", json=payload, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code >= 500 or resp.status_code == 503:
                last_error = EmbedderError(f"service returned {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise EmbedderError(
                    f"embedding service rejected request ({resp.status_code}): {resp.text[:200]}"
                )
            return self._parse(resp.json(), len(texts))
        raise EmbedderError(
            f"embedding service unreachable after {self.max_retries} attempts: {last_error}"
        )

    def _parse(self, body: dict, expected_rows: int) -> np.ndarray:
        try:
            dim, vectors = int(body["dim"]), body["vectors"]
        except (KeyError, TypeError, ValueError) as exc:
            raise EmbedderError(f"malformed service response: {exc}") from exc
        if self._dim is None:
            self._dim = dim
        elif dim != self._dim:
            raise EmbedderError(f"service dim changed from {self._dim} to {dim}")
        arr = np.asarray(vectors, dtype=float)
        if arr.shape != (expected_rows, dim):
            raise EmbedderError(
                f"service returned shape {arr.shape}, expected ({expected_rows}, {dim})"
            )
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise EmbedderError("service returned a zero vector")
        return arr / norms


# --- embedding store -----------------------------------------------------------


class EmbeddingStore:
    """Unit-norm vectors aligned one-to-one with a KB's record list."""

    __slots__ = ("dim", "vectors", "provider_id")

    def __init__(self, dim: int, vectors: np.ndarray, provider_id: str):
        vectors = np.asarray(vectors, dtype=float)
        if dim < 1:
            raise ValueError("dim must be positive")
        if vectors.ndim != 2 or vectors.shape[1] != dim:
            raise DimensionMismatch(f"vectors shape {vectors.shape} incompatible with dim {dim}")
        if not np.isfinite(vectors).all():
            raise ValueError("vectors contain non-finite values")
        if len(vectors):
            norms = np.linalg.norm(vectors, axis=1)
            worst = float(np.max(np.abs(norms - 1.0)))
            if worst > _NORM_TOLERANCE:
                raise ZeroVector(f"store rows must be unit-norm (worst deviation {worst:g})")
        self.dim = dim
        self.vectors = vectors
        self.provider_id = provider_id

    def __len__(self) -> int:
        return len(self.vectors)


def save_store(store: EmbeddingStore, path: str | Path) -> None:
    """Write the binary embedding format (magic ``EMB1``).

    Layout: dim and count as unsigned 32-bit little-endian, then one
    record per row of (row index u32, dim float32 values).
    """
    parts = [_STORE_MAGIC, struct.pack("<II", store.dim, len(store.vectors))]
    rows = store.vectors.astype("<f4")
    for i in range(len(rows)):
        parts.append(struct.pack("<I", i))
        parts.append(rows[i].tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_store(path: str | Path, provider_id: str = "file") -> EmbeddingStore:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != _STORE_MAGIC:
        raise ParseError("bad magic (not an embedding file)", path=str(path))
    dim, count = struct.unpack("<II", data[4:12])
    record = 4 + 4 * dim
    if len(data) != 12 + count * record:
        raise ParseError(
            f"size mismatch: {len(data)} bytes for {count} records of dim {dim}",
            path=str(path),
        )
    vectors = np.empty((count, dim))
    seen = np.zeros(count, dtype=bool)
    pos = 12
    for _ in range(count):
        (idx,) = struct.unpack("<I", data[pos : pos + 4])
        if idx >= count or seen[idx]:
            raise ParseError(f"record index {idx} out of range or repeated", path=str(path))
        seen[idx] = True
        vectors[idx] = np.frombuffer(data[pos + 4 : pos + record], dtype="<f4")
        pos += record
    try:
        return EmbeddingStore(dim, vectors, provider_id)
    except (ValueError, ZeroVector, DimensionMismatch) as exc:
        raise ParseError(f"invalid store contents: {exc}", path=str(path)) from exc


def write_store_tsv(store: EmbeddingStore, path: str | Path) -> None:
    """Human-readable debug dump: index column then one column per axis."""
    lines = ["\t".join(["index"] + [f"d{i}" for i in range(store.dim)])]
    for i, row in enumerate(store.vectors):
        lines.append("\t".join([str(i)] + [f"{v:.9g}" for v in row]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- similarity ----------------------------------------------------------------


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"cosine over shapes {a.shape} and {b.shape}")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


def nearest(query: np.ndarray, store: EmbeddingStore, k: int) -> list[tuple[int, float]]:
    """Exact top-k records by cosine, descending, ties to the lower index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not len(store):
        raise EmptyStore("cannot search an empty embedding store")
    query = np.asarray(query, dtype=float)
    if query.shape != (store.dim,):
        raise DimensionMismatch(f"query shape {query.shape}, store dim {store.dim}")
    nq = float(np.linalg.norm(query))
    if nq == 0.0:
        raise ZeroVector("query has zero norm")
    scores = store.vectors @ (query / nq)
    order = np.argsort(-scores, kind="stable")[:k]
    return [(int(i), float(scores[i])) for i in order]


# --- sliding-window scoring ----------------------------------------------------


@dataclass(frozen=True)
class WindowWeights:
    """Coefficients for combining full/leading/trailing mention views."""

    w_full: float = 0.75
    w_first: float = 0.17
    w_last: float = 0.08
    window_fraction: float = 0.75

    def __post_init__(self):
        for name in ("w_full", "w_first", "w_last"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        total = self.w_full + self.w_first + self.w_last
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"window weights must sum to 1, got {total!r}")
        if not 0.0 < self.window_fraction <= 1.0:
            raise ValueError("window_fraction must be in (0, 1]")

    @classmethod
    def normalized(
        cls, w_full: float, w_first: float, w_last: float, window_fraction: float = 0.75
    ) -> "WindowWeights":
        total = w_full + w_first + w_last
        if total <= 0:
            raise ValueError("weights must have a positive sum")
        return cls(w_full / total, w_first / total, w_last / total, window_fraction)


@dataclass(frozen=True)
class LinkerConfig:
    use_sliding_window: bool = False
    weights: WindowWeights = WindowWeights()
    abstain_threshold: float | None = None
    top_k: int = 5

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.abstain_threshold is not None and not -1.0 <= self.abstain_threshold <= 1.0:
            raise ValueError("abstain_threshold must be in [-1, 1]")


@dataclass(frozen=True)
class LinkPrediction:
    mention: Mention
    code: str
    score: float
    matched_alias: str
    method: str

    def __post_init__(self):
        if self.method not in LINK_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.code:
            raise ValueError("predicted code must be non-empty")
        if self.method == "exact" and self.score != 1.0:
            raise ValueError("exact matches score 1.0 by convention")


def window_views(mention_tokens: Sequence[str], fraction: float) -> tuple[str, str, str]:
    """Full, leading, and trailing views of a tokenized mention.

    Window length is ``max(1, ceil(fraction * n))`` tokens (a tiny slack
    keeps float noise from bumping exact products like 0.75 * 4 across the
    ceiling). Views are the window tokens joined by single spaces.
    """
    tokens = list(mention_tokens)
    if not tokens:
        raise EmptyMention("mention has no tokens")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    n = len(tokens)
    w = max(1, math.ceil(fraction * n - 1e-12))
    return " ".join(tokens), " ".join(tokens[:w]), " ".join(tokens[n - w :])


def score_sliding(
    mention_views: tuple[np.ndarray, np.ndarray, np.ndarray],
    candidate: np.ndarray,
    w: WindowWeights,
) -> float:
    """Linear combination of the three view-to-candidate cosines."""
    v_full, v_first, v_last = mention_views
    return (
        w.w_full * cosine(v_full, candidate)
        + w.w_first * cosine(v_first, candidate)
        + w.w_last * cosine(v_last, candidate)
    )


# --- linking -------------------------------------------------------------------


def _check_alignment(kb: KnowledgeBase, store: EmbeddingStore) -> None:
    if len(store) != len(kb.records):
        raise DimensionMismatch(
            f"store has {len(store)} rows but KB has {len(kb.records)} records"
        )


def _resolve_exact(kb: KnowledgeBase, codes: Sequence[str]) -> str:
    """Ambiguity rule: most aliases wins, then lexicographically smallest."""
    return sorted(codes, key=lambda c: (-kb.code_alias_count[c], c))[0]


def _alias_for(kb: KnowledgeBase, normalized: str, code: str) -> str:
    for rec in kb.records:
        if rec.code == code and rec.normalized_surface == normalized:
            return rec.surface
    return normalized


def _cosine_rows(store: EmbeddingStore, query: np.ndarray) -> np.ndarray:
    nq = float(np.linalg.norm(query))
    if nq == 0.0:
        raise ZeroVector("embedded mention has zero norm")
    return store.vectors @ (query / nq)


def _embed_views(
    embedder: Embedder, mention: Mention, views: Sequence[str]
) -> np.ndarray:
    try:
        vecs = np.asarray(embedder.embed(list(views)), dtype=float)
    except (DimensionMismatch, ZeroVector, EmptyText, EmbedderError, OSError) as exc:
        raise EmbedderError(
            f"embedding failed for mention {mention.doc_id}"
            f"[{mention.start}:{mention.end}] {mention.text!r}: {exc}"
        ) from exc
    if vecs.ndim != 2 or vecs.shape[0] != len(views):
        raise EmbedderError(f"embedder returned shape {vecs.shape} for {len(views)} texts")
    return vecs


def _score_mention(
    mention: Mention,
    kb: KnowledgeBase,
    store: EmbeddingStore,
    view_vectors: np.ndarray,
    cfg: LinkerConfig,
) -> LinkPrediction:
    if view_vectors.shape[1] != store.dim:
        raise DimensionMismatch(
            f"embedder dim {view_vectors.shape[1]} differs from store dim {store.dim}"
        )
    if cfg.use_sliding_window:
        w = cfg.weights
        scores = (
            w.w_full * _cosine_rows(store, view_vectors[0])
            + w.w_first * _cosine_rows(store, view_vectors[1])
            + w.w_last * _cosine_rows(store, view_vectors[2])
        )
        method = "cosine_window"
    else:
        scores = _cosine_rows(store, view_vectors[0])
        method = "cosine"
    best = int(np.argmax(scores))
    best_score = float(scores[best])
    record = kb.records[best]
    if cfg.abstain_threshold is not None and best_score < cfg.abstain_threshold:
        return LinkPrediction(mention, NO_CODE, best_score, record.surface, "abstain")
    return LinkPrediction(mention, record.code, best_score, record.surface, method)


def _mention_views(mention: Mention, cfg: LinkerConfig) -> list[str]:
    tokens = normalize_surface(mention.text).split()
    if not tokens:
        raise EmptyMention(
            f"mention {mention.doc_id}[{mention.start}:{mention.end}] "
            "is empty after normalization"
        )
    full, first, last = window_views(tokens, cfg.weights.window_fraction)
    return [full, first, last] if cfg.use_sliding_window else [full]


def link(
    mention: Mention,
    kb: KnowledgeBase,
    store: EmbeddingStore,
    embedder: Embedder,
    cfg: LinkerConfig = LinkerConfig(),
) -> LinkPrediction:
    """Link one mention: exact surface match first, cosine scan second.

    An unambiguous exact match wins outright; ambiguous exact matches go
    to the code with the most aliases (ties to the smallest code string).
    Otherwise the mention (normalized) is embedded and every KB record is
    scored; with ``cfg.abstain_threshold`` set, a best score below it
    yields ``NO_CODE``.
    """
    _check_alignment(kb, store)
    codes = exact_lookup(kb, mention.text)
    if codes:
        chosen = codes[0] if len(codes) == 1 else _resolve_exact(kb, codes)
        alias = _alias_for(kb, normalize_surface(mention.text), chosen)
        return LinkPrediction(mention, chosen, 1.0, alias, "exact")
    if not len(store):
        raise EmptyStore("cannot cosine-link against an empty KB")
    views = _mention_views(mention, cfg)
    vecs = _embed_views(embedder, mention, views)
    return _score_mention(mention, kb, store, vecs, cfg)


def link_batch(
    mentions: Sequence[Mention],
    kb: KnowledgeBase,
    store: EmbeddingStore,
    embedder: Embedder,
    cfg: LinkerConfig = LinkerConfig(),
    batch_size: int = 256,
) -> list[LinkPrediction]:
    """Link many mentions with batched embedding calls.

    Produces exactly what per-mention :func:`link` would, but groups the
    stage-two embedding requests so a remote embedder sees few large
    batches instead of one request per mention.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    _check_alignment(kb, store)
    surface_of = {(r.normalized_surface, r.code): r.surface for r in kb.records}
    results: list[LinkPrediction | None] = [None] * len(mentions)
    pending: list[tuple[int, list[str]]] = []
    for i, mention in enumerate(mentions):
        codes = exact_lookup(kb, mention.text)
        if codes:
            chosen = codes[0] if len(codes) == 1 else _resolve_exact(kb, codes)
            norm = normalize_surface(mention.text)
            results[i] = LinkPrediction(
                mention, chosen, 1.0, surface_of.get((norm, chosen), norm), "exact"
            )
        else:
            if not len(store):
                raise EmptyStore("cannot cosine-link against an empty KB")
            pending.append((i, _mention_views(mention, cfg)))

    per_mention = 3 if cfg.use_sliding_window else 1
    group = max(1, batch_size // per_mention)
    for g0 in range(0, len(pending), group):
        chunk = pending[g0 : g0 + group]
        texts = [v for _, views in chunk for v in views]
        vecs = _embed_views(embedder, mentions[chunk[0][0]], texts)
        for j, (i, _) in enumerate(chunk):
            rows = vecs[j * per_mention : (j + 1) * per_mention]
            results[i] = _score_mention(mentions[i], kb, store, rows, cfg)
    return [r for r in results if r is not None]


# --- grid search ---------------------------------------------------------------


def simplex_grid(step: float) -> list[tuple[float, float, float]]:
    """All nonnegative weight triples with the given spacing summing to 1.

    Ordered by descending w_full, then descending w_first, so a
    first-strictly-better scan over the grid realizes the documented
    tie-break. ``step`` must divide 1 evenly.
    """
    if not 0.0 < step <= 1.0:
        raise ValueError("step must be in (0, 1]")
    m = round(1.0 / step)
    if abs(m * step - 1.0) > 1e-9:
        raise ValueError(f"step {step!r} does not divide 1")
    return [
        (i / m, j / m, (m - i - j) / m)
        for i in range(m, -1, -1)
        for j in range(m - i, -1, -1)
    ]


def grid_search_weights(
    validation: Sequence[tuple[Mention, str]],
    kb: KnowledgeBase,
    store: EmbeddingStore,
    embedder: Embedder,
    step: float = 0.01,
    *,
    window_fraction: float = 0.75,
) -> tuple[WindowWeights, float]:
    """Exhaustive simplex search for the window coefficients.

    Every grid point is scored by linking accuracy over the validation
    pairs; the three view-to-record cosine rows per mention are computed
    once and reused across all points. Exact-surface matches resolve
    before the cosine stage and contribute the same correctness at every
    grid point. Ties go to larger ``w_full``, then larger ``w_first``.
    """
    if not validation:
        raise EmptyValidation("grid search needs at least one validation pair")
    _check_alignment(kb, store)

    exact_correct = 0
    cached: list[tuple[np.ndarray, np.ndarray, np.ndarray, str]] = []
    probe_cfg = LinkerConfig(
        use_sliding_window=True,
        weights=WindowWeights(1.0, 0.0, 0.0, window_fraction),
    )
    for mention, gold in validation:
        codes = exact_lookup(kb, mention.text)
        if codes:
            chosen = codes[0] if len(codes) == 1 else _resolve_exact(kb, codes)
            exact_correct += chosen == gold
            continue
        if not len(store):
            raise EmptyStore("cannot cosine-link against an empty KB")
        views = _mention_views(mention, probe_cfg)
        vecs = _embed_views(embedder, mention, views)
        if vecs.shape[1] != store.dim:
            raise DimensionMismatch(
                f"embedder dim {vecs.shape[1]} differs from store dim {store.dim}"
            )
        cached.append(
            (
                _cosine_rows(store, vecs[0]),
                _cosine_rows(store, vecs[1]),
                _cosine_rows(store, vecs[2]),
                gold,
            )
        )

    total = len(validation)
    best_point: tuple[float, float, float] | None = None
    best_acc = -1.0
    for point in simplex_grid(step):
        wf, w1, wl = point
        correct = exact_correct
        for cf, c1, cl, gold in cached:
            scores = wf * cf + w1 * c1 + wl * cl
            correct += kb.records[int(np.argmax(scores))].code == gold
        acc = correct / total
        if acc > best_acc:
            best_acc, best_point = acc, point
    assert best_point is not None
    weights = WindowWeights(*best_point, window_fraction=window_fraction)
    return weights, best_acc
