"""Linear-chain CRF over IOB2 labels with exact inference and training.

The score of a label path ``y`` for a ``T``-token sentence is

    start[y_1] + sum_t emissions[t, y_t]
    + sum_t transitions[y_t, y_{t+1}] + end[y_T]

Inference is exact dynamic programming: the forward algorithm for the
log-partition, Viterbi for the best path. Emissions come from a linear
model over sparse hashed token features, which stands in for a transformer
encoder; ``EmissionMatrix`` arrays are the interchange point for anyone
plugging in real encoder scores (see :func:`save_emissions`).

All sums over paths run in log space using the max-shift identity, so
partition values stay finite for any finite parameters.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, InvalidTagSequence, ParseError
from .spans import Mention, O_TAG, TaggedSentence, decode_iob2, encode_iob2, is_valid_iob2
from .textseg import Sentence

NEG_INF = float("-inf")

#: Sparse feature vector: sorted (feature index, value) pairs.
FeatureVector = tuple[tuple[int, float], ...]


# --- model -------------------------------------------------------------------


@dataclass
class TrainConfig:
    learning_rate: float = 0.5
    l2_penalty: float = 1e-4
    epochs: int = 20
    seed: int = 0
    constrain_iob2: bool = True
    batch_size: int = 8
    feature_dim: int = 2**18

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be nonnegative")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size < 1 or self.feature_dim < 1:
            raise ValueError("batch_size and feature_dim must be positive")


@dataclass
class CrfModel:
    """Transition scores plus a linear emission model over hashed features.

    ``emission_weights`` is kept dense in memory, shape
    ``(feature_dim, L)`` with zeros implicit; persistence stores only the
    nonzero triples.
    """

    labels: tuple[str, ...]
    transitions: np.ndarray
    start_scores: np.ndarray
    end_scores: np.ndarray
    emission_weights: np.ndarray
    feature_dim: int
    label_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        validate_label_set(self.labels)
        L = len(self.labels)
        if self.transitions.shape != (L, L):
            raise DimensionMismatch(f"transitions shape {self.transitions.shape}, want ({L}, {L})")
        if self.start_scores.shape != (L,) or self.end_scores.shape != (L,):
            raise DimensionMismatch("start/end score vectors must have length L")
        if self.emission_weights.shape != (self.feature_dim, L):
            raise DimensionMismatch(
                f"emission weights shape {self.emission_weights.shape}, "
                f"want ({self.feature_dim}, {L})"
            )
        for name, arr in (
            ("transitions", self.transitions),
            ("start_scores", self.start_scores),
            ("end_scores", self.end_scores),
            ("emission_weights", self.emission_weights),
        ):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")
        self.label_index = {lab: i for i, lab in enumerate(self.labels)}

    @classmethod
    def create(cls, labels: Sequence[str], feature_dim: int) -> "CrfModel":
        L = len(labels)
        return cls(
            labels=tuple(labels),
            transitions=np.zeros((L, L)),
            start_scores=np.zeros(L),
            end_scores=np.zeros(L),
            emission_weights=np.zeros((feature_dim, L)),
            feature_dim=feature_dim,
        )

    @property
    def num_labels(self) -> int:
        return len(self.labels)


def validate_label_set(labels: Sequence[str]) -> None:
    """Check IOB2 label-set structure: O present, every I-t has its B-t."""
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate labels")
    if O_TAG not in labels:
        raise ValueError("label set must contain O")
    for lab in labels:
        if lab == O_TAG:
            continue
        if len(lab) < 3 or lab[1] != "-" or lab[0] not in "BI":
            raise ValueError(f"malformed label {lab!r}")
        if lab[0] == "I" and "B" + lab[1:] not in labels:
            raise ValueError(f"{lab!r} without matching B- label")


def labels_for_types(entity_types: Sequence[str]) -> tuple[str, ...]:
    """Build the ordered label set O, B-t, I-t for the given entity types."""
    out = [O_TAG]
    for t in sorted(set(entity_types)):
        out += ["B-" + t, "I-" + t]
    return tuple(out)


# --- features ---------------------------------------------------------------

_BOUNDARY_PREV = "<s>"
_BOUNDARY_NEXT = "</s>"


def _hash_feature(feature: str, feature_dim: int) -> int:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % feature_dim


def _shape_class(token: str) -> str:
    out = []
    for ch in token:
        if ch.isupper():
            c = "X"
        elif ch.islower():
            c = "x"
        elif ch.isdigit():
            c = "d"
        else:
            c = "p"
        if not out or out[-1] != c:
            out.append(c)
    return "".join(out)


def featurize(sentence: Sentence, position: int, feature_dim: int) -> FeatureVector:
    """Hashed features for one token position.

    Emits the lowercased token, its character 3-grams (with boundary
    markers), its shape class, and the lowercased neighbor tokens at
    distance one (boundary sentinels at the sentence edges). Values are
    occurrence counts; indices land in ``[0, feature_dim)``.
    """
    tokens = sentence.tokens
    if not 0 <= position < len(tokens):
        raise IndexError(f"position {position} out of range for {len(tokens)} tokens")
    low = tokens[position].text.lower()
    feats = [f"w={low}", f"shape={_shape_class(tokens[position].text)}"]
    prev_tok = tokens[position - 1].text.lower() if position > 0 else _BOUNDARY_PREV
    next_tok = tokens[position + 1].text.lower() if position + 1 < len(tokens) else _BOUNDARY_NEXT
    feats.append(f"p={prev_tok}")
    feats.append(f"n={next_tok}")
    padded = "^" + low + "$"
    for i in range(max(1, len(padded) - 2)):
        feats.append(f"g={padded[i:i + 3]}")

    counts: dict[int, float] = {}
    for f in feats:
        idx = _hash_feature(f, feature_dim)
        counts[idx] = counts.get(idx, 0.0) + 1.0
    return tuple(sorted(counts.items()))


def sentence_features(sentence: Sentence, feature_dim: int) -> list[FeatureVector]:
    return [featurize(sentence, t, feature_dim) for t in range(len(sentence.tokens))]


def emissions_from_features(model: CrfModel, feats: Sequence[FeatureVector]) -> np.ndarray:
    """Emission score matrix (T, L) for precomputed sparse features."""
    T, L = len(feats), model.num_labels
    em = np.zeros((T, L))
    W = model.emission_weights
    for t, fv in enumerate(feats):
        for idx, val in fv:
            em[t] += val * W[idx]
    return em


# --- exact inference ---------------------------------------------------------


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m_safe), axis=axis)) + np.squeeze(m_safe, axis=axis)
    return np.where(np.isfinite(np.squeeze(m, axis=axis)), out, NEG_INF)


def _check_emissions(emissions: np.ndarray, model: CrfModel) -> np.ndarray:
    emissions = np.asarray(emissions, dtype=float)
    if emissions.ndim != 2:
        raise DimensionMismatch(f"emissions must be 2-D, got shape {emissions.shape}")
    T, L = emissions.shape
    if T < 1:
        raise DimensionMismatch("need at least one token")
    if L != model.num_labels:
        raise DimensionMismatch(f"emissions have {L} labels, model has {model.num_labels}")
    if not np.isfinite(emissions).all():
        raise ValueError("emissions contain non-finite values")
    return emissions


def _forward(emissions: np.ndarray, model: CrfModel) -> tuple[np.ndarray, float]:
    T, _ = emissions.shape
    alpha = np.empty_like(emissions)
    alpha[0] = model.start_scores + emissions[0]
    for t in range(1, T):
        alpha[t] = _logsumexp(alpha[t - 1][:, None] + model.transitions, axis=0) + emissions[t]
    log_z = float(_logsumexp((alpha[T - 1] + model.end_scores)[None, :], axis=1)[0])
    return alpha, log_z


def _backward(emissions: np.ndarray, model: CrfModel) -> np.ndarray:
    T, _ = emissions.shape
    beta = np.empty_like(emissions)
    beta[T - 1] = model.end_scores
    for t in range(T - 2, -1, -1):
        beta[t] = _logsumexp(
            model.transitions + (emissions[t + 1] + beta[t + 1])[None, :], axis=1
        )
    return beta


def log_forward(emissions: np.ndarray, model: CrfModel) -> float:
    """Log-partition: log of the sum of exp(path score) over all L^T paths."""
    emissions = _check_emissions(emissions, model)
    _, log_z = _forward(emissions, model)
    return log_z


def iob2_constraint_masks(labels: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Additive masks (0 allowed, -inf forbidden) enforcing IOB2 structure.

    Returns ``(start_mask, transition_mask)``: paths may not begin with an
    I- label, and I-t may only follow B-t or I-t.
    """
    L = len(labels)
    start = np.zeros(L)
    trans = np.zeros((L, L))
    for j, lab in enumerate(labels):
        if not lab.startswith("I-"):
            continue
        start[j] = NEG_INF
        etype = lab[2:]
        for i, prev in enumerate(labels):
            if prev != "B-" + etype and prev != lab:
                trans[i, j] = NEG_INF
    return start, trans


def viterbi(
    emissions: np.ndarray,
    model: CrfModel,
    constrain_iob2: bool = True,
) -> tuple[list[str], float]:
    """Best label path and its score.

    Ties break toward the lowest label index at every backpointer, which
    makes decoding deterministic. With ``constrain_iob2`` the returned
    sequence is always strictly IOB2-valid.
    """
    emissions = _check_emissions(emissions, model)
    T, L = emissions.shape
    if constrain_iob2:
        start_mask, trans_mask = iob2_constraint_masks(model.labels)
    else:
        start_mask, trans_mask = np.zeros(L), np.zeros((L, L))
    trans = model.transitions + trans_mask

    delta = model.start_scores + start_mask + emissions[0]
    backptr = np.empty((T, L), dtype=np.intp)
    for t in range(1, T):
        scores = delta[:, None] + trans
        backptr[t] = np.argmax(scores, axis=0)
        delta = scores[backptr[t], np.arange(L)] + emissions[t]
    final = delta + model.end_scores
    best = int(np.argmax(final))
    path = [best]
    for t in range(T - 1, 0, -1):
        path.append(int(backptr[t, path[-1]]))
    path.reverse()
    return [model.labels[i] for i in path], float(final[best])


# --- training ----------------------------------------------------------------


@dataclass
class CrfGradients:
    """Dense gradient of the per-sentence objective, one array per group."""

    transitions: np.ndarray
    start_scores: np.ndarray
    end_scores: np.ndarray
    emission_weights: np.ndarray


def _gold_indices(model: CrfModel, gold_tags: Sequence[str]) -> list[int]:
    if not is_valid_iob2(gold_tags):
        raise InvalidTagSequence(f"gold tags not IOB2-valid: {list(gold_tags)}")
    try:
        return [model.label_index[t] for t in gold_tags]
    except KeyError as exc:
        raise InvalidTagSequence(f"unknown label {exc.args[0]!r}") from None


def _path_score(emissions: np.ndarray, model: CrfModel, path: Sequence[int]) -> float:
    score = model.start_scores[path[0]] + emissions[0, path[0]]
    for t in range(1, len(path)):
        score += model.transitions[path[t - 1], path[t]] + emissions[t, path[t]]
    return float(score + model.end_scores[path[-1]])


def _l2_value(model: CrfModel, l2: float) -> float:
    if l2 == 0.0:
        return 0.0
    return 0.5 * l2 * (
        float(np.sum(model.transitions**2))
        + float(np.sum(model.start_scores**2))
        + float(np.sum(model.end_scores**2))
        + float(np.sum(model.emission_weights**2))
    )


def _sentence_nll_and_expectations(
    model: CrfModel,
    emissions: np.ndarray,
    gold: Sequence[int],
) -> tuple[float, np.ndarray, np.ndarray]:
    """Data NLL plus node marginals (T, L) and summed edge marginals (L, L)."""
    T, L = emissions.shape
    alpha, log_z = _forward(emissions, model)
    beta = _backward(emissions, model)
    gamma = np.exp(alpha + beta - log_z)
    xi_sum = np.zeros((L, L))
    for t in range(T - 1):
        xi_sum += np.exp(
            alpha[t][:, None]
            + model.transitions
            + (emissions[t + 1] + beta[t + 1])[None, :]
            - log_z
        )
    nll = log_z - _path_score(emissions, model, gold)
    return nll, gamma, xi_sum


def nll_and_gradient(
    model: CrfModel,
    sentence: Sentence,
    gold_tags: Sequence[str],
    l2: float = 0.0,
) -> tuple[float, CrfGradients]:
    """Negative log-likelihood of the gold path and its exact gradient.

    The objective is ``log Z - score(gold) + (l2/2) * ||theta||^2``;
    gradients are forward-backward expected feature counts minus empirical
    counts, plus the ridge term. The emission gradient is returned dense
    (``feature_dim`` rows), which is fine at test scale; the trainer
    accumulates sparsely instead.
    """
    feats = sentence_features(sentence, model.feature_dim)
    emissions = emissions_from_features(model, feats)
    gold = _gold_indices(model, gold_tags)
    nll, gamma, xi_sum = _sentence_nll_and_expectations(model, emissions, gold)

    T, L = emissions.shape
    g_trans = xi_sum.copy()
    for t in range(T - 1):
        g_trans[gold[t], gold[t + 1]] -= 1.0
    g_start = gamma[0].copy()
    g_start[gold[0]] -= 1.0
    g_end = gamma[T - 1].copy()
    g_end[gold[T - 1]] -= 1.0

    err = gamma.copy()
    err[np.arange(T), gold] -= 1.0
    g_em = np.zeros_like(model.emission_weights)
    for t, fv in enumerate(feats):
        for idx, val in fv:
            g_em[idx] += val * err[t]

    if l2 > 0.0:
        g_trans += l2 * model.transitions
        g_start += l2 * model.start_scores
        g_end += l2 * model.end_scores
        g_em += l2 * model.emission_weights
    return nll + _l2_value(model, l2), CrfGradients(g_trans, g_start, g_end, g_em)


def dataset_nll(model: CrfModel, dataset: Sequence[TaggedSentence], l2: float = 0.0) -> float:
    """Mean per-sentence objective over a tagged dataset."""
    if not dataset:
        raise EmptyDataset("dataset is empty")
    total = 0.0
    for ts in dataset:
        feats = sentence_features(ts.sentence, model.feature_dim)
        emissions = emissions_from_features(model, feats)
        gold = _gold_indices(model, encode_iob2(ts.sentence, ts.mentions))
        _, log_z = _forward(emissions, model)
        total += log_z - _path_score(emissions, model, gold)
    return total / len(dataset) + _l2_value(model, l2)


def train(
    dataset: Sequence[TaggedSentence],
    cfg: TrainConfig,
    epoch_callback: Callable[[int, float], None] | None = None,
) -> CrfModel:
    """Fit a CRF by mini-batch gradient descent.

    Deterministic given ``cfg.seed``: parameters start at zero (the
    objective is convex, so initialization only affects the path taken)
    and the seed drives batch shuffling alone. ``epoch_callback`` receives
    ``(epoch, mean objective over that epoch's batches)`` when given.
    Sentences with zero tokens are rejected; gold tags must be IOB2-valid.
    """
    if not dataset:
        raise EmptyDataset("training requires at least one tagged sentence")
    types = sorted({m.entity_type for ts in dataset for m in ts.mentions})
    model = CrfModel.create(labels_for_types(types), cfg.feature_dim)

    feats_all: list[list[FeatureVector]] = []
    gold_all: list[list[int]] = []
    for ts in dataset:
        if not ts.sentence.tokens:
            raise EmptyDataset(f"sentence with no tokens in {ts.sentence.doc_id}")
        feats_all.append(sentence_features(ts.sentence, cfg.feature_dim))
        gold_all.append(_gold_indices(model, encode_iob2(ts.sentence, ts.mentions)))

    n = len(dataset)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    lr, l2 = cfg.learning_rate, cfg.l2_penalty
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_nll = 0.0
        for b0 in range(0, n, cfg.batch_size):
            batch = order[b0 : b0 + cfg.batch_size]
            B = len(batch)
            g_trans = np.zeros_like(model.transitions)
            g_start = np.zeros_like(model.start_scores)
            g_end = np.zeros_like(model.end_scores)
            w_acc: dict[int, np.ndarray] = {}
            for si in batch:
                feats, gold = feats_all[si], gold_all[si]
                emissions = emissions_from_features(model, feats)
                nll, gamma, xi_sum = _sentence_nll_and_expectations(model, emissions, gold)
                epoch_nll += nll
                T = len(gold)
                g_trans += xi_sum
                for t in range(T - 1):
                    g_trans[gold[t], gold[t + 1]] -= 1.0
                g_start += gamma[0]
                g_start[gold[0]] -= 1.0
                g_end += gamma[T - 1]
                g_end[gold[T - 1]] -= 1.0
                err = gamma
                err[np.arange(T), gold] -= 1.0
                for t, fv in enumerate(feats):
                    for idx, val in fv:
                        acc = w_acc.get(idx)
                        if acc is None:
                            acc = w_acc[idx] = np.zeros(model.num_labels)
                        acc += val * err[t]

            step = lr / B
            decay = 1.0 - lr * l2
            model.transitions = model.transitions * decay - step * g_trans
            model.start_scores = model.start_scores * decay - step * g_start
            model.end_scores = model.end_scores * decay - step * g_end
            if l2 > 0.0:
                model.emission_weights *= decay
            if w_acc:
                idxs = sorted(w_acc)
                model.emission_weights[idxs] -= step * np.stack([w_acc[i] for i in idxs])
        if epoch_callback is not None:
            epoch_callback(epoch, epoch_nll / n + _l2_value(model, l2))
    return model


def tag(
    model: CrfModel,
    sentences: Sequence[Sentence],
    constrain_iob2: bool = True,
) -> list[Mention]:
    """Predict mentions: featurize, decode, convert tag runs to spans.

    Mention offsets are absolute document offsets inherited from the
    sentence tokens.
    """
    predicted: list[Mention] = []
    for sent in sentences:
        if not sent.tokens:
            continue
        feats = sentence_features(sent, model.feature_dim)
        emissions = emissions_from_features(model, feats)
        labels, _ = viterbi(emissions, model, constrain_iob2=constrain_iob2)
        predicted.extend(decode_iob2(labels, sent))
    return predicted


def decode_emissions(
    model: CrfModel,
    sentences: Sequence[Sentence],
    emissions_list: Sequence[np.ndarray],
    constrain_iob2: bool = True,
) -> list[Mention]:
    """Decode externally produced emission matrices (one per sentence)."""
    if len(sentences) != len(emissions_list):
        raise DimensionMismatch(
            f"{len(sentences)} sentences but {len(emissions_list)} emission matrices"
        )
    predicted: list[Mention] = []
    for sent, em in zip(sentences, emissions_list):
        em = _check_emissions(em, model)
        if em.shape[0] != len(sent.tokens):
            raise DimensionMismatch(
                f"emissions for {sent.doc_id} have {em.shape[0]} rows, "
                f"sentence has {len(sent.tokens)} tokens"
            )
        labels, _ = viterbi(em, model, constrain_iob2=constrain_iob2)
        predicted.extend(decode_iob2(labels, sent))
    return predicted


# --- persistence -------------------------------------------------------------

_MODEL_MAGIC = b"CRF1"
_EMISSIONS_MAGIC = b"EMS1"


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ParseError("truncated file", path=self.path)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64s(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(float)

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def save_model(model: CrfModel, path: str | Path) -> None:
    """Write the versioned binary model format (magic ``CRF1``).

    Dense matrices are row-major float64 little-endian; emission weights
    are stored as nonzero (feature index, label index, weight) triples; a
    CRC-32 of everything preceding trails the file.
    """
    parts = [_MODEL_MAGIC, struct.pack("<I", model.num_labels)]
    parts += [_pack_str(lab) for lab in model.labels]
    parts.append(struct.pack("<Q", model.feature_dim))
    for arr in (model.transitions, model.start_scores, model.end_scores):
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    rows, cols = np.nonzero(model.emission_weights)
    parts.append(struct.pack("<Q", len(rows)))
    weights = model.emission_weights[rows, cols]
    for r, c, w in zip(rows, cols, weights):
        parts.append(struct.pack("<QId", int(r), int(c), float(w)))
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body + struct.pack("<I", zlib.crc32(body)))


def load_model(path: str | Path) -> CrfModel:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise ParseError("file too short", path=str(path))
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise ParseError("checksum mismatch", path=str(path))
    r = _Reader(body, str(path))
    if r.take(4) != _MODEL_MAGIC:
        raise ParseError("bad magic (not a CRF model file)", path=str(path))
    L = r.u32()
    labels = tuple(r.string() for _ in range(L))
    feature_dim = r.u64()
    transitions = r.f64s(L * L).reshape(L, L)
    start = r.f64s(L)
    end = r.f64s(L)
    weights = np.zeros((feature_dim, L))
    for _ in range(r.u64()):
        idx, lab = r.u64(), r.u32()
        (w,) = struct.unpack("<d", r.take(8))
        if idx >= feature_dim or lab >= L:
            raise ParseError(f"weight index ({idx}, {lab}) out of range", path=str(path))
        weights[idx, lab] = w
    if r.pos != len(body):
        raise ParseError("trailing bytes after model payload", path=str(path))
    return CrfModel(labels, transitions, start, end, weights, feature_dim)


def save_emissions(
    path: str | Path,
    labels: Sequence[str],
    emissions_list: Sequence[np.ndarray],
) -> None:
    """Write per-sentence T x L emission matrices (magic ``EMS1``)."""
    L = len(labels)
    parts = [_EMISSIONS_MAGIC, struct.pack("<I", L)]
    parts += [_pack_str(lab) for lab in labels]
    parts.append(struct.pack("<I", len(emissions_list)))
    for em in emissions_list:
        em = np.asarray(em, dtype=float)
        if em.ndim != 2 or em.shape[1] != L:
            raise DimensionMismatch(f"emissions shape {em.shape} incompatible with {L} labels")
        parts.append(struct.pack("<I", em.shape[0]))
        parts.append(np.ascontiguousarray(em, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_emissions(path: str | Path) -> tuple[tuple[str, ...], list[np.ndarray]]:
    r = _Reader(Path(path).read_bytes(), str(path))
    if r.take(4) != _EMISSIONS_MAGIC:
        raise ParseError("bad magic (not an emissions file)", path=str(path))
    L = r.u32()
    labels = tuple(r.string() for _ in range(L))
    out = []
    for _ in range(r.u32()):
        T = r.u32()
        out.append(r.f64s(T * L).reshape(T, L))
    if r.pos != len(r.data):
        raise ParseError("trailing bytes after emissions payload", path=str(path))
    return labels, out
