"""Training-set augmentation by synonym replacement.

Each selected annotated mention whose code has a lexicon synonym is
rewritten into a new standalone example sentence, with every character
offset downstream of the replacement shifted by the length difference.
Original sentences are always kept.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import IoError, ParseError, SintomaError
from .spans import Mention, TaggedSentence, encode_iob2
from .textseg import Sentence, tokenize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynonymLexicon:
    """Code → ordered tuple of synonym surfaces, deduplicated."""

    entries: dict[str, tuple[str, ...]]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "SynonymLexicon":
        entries: dict[str, list[str]] = {}
        seen: set[tuple[str, str]] = set()
        for code, synonym in pairs:
            code, synonym = code.strip(), synonym.strip()
            if not code or not synonym:
                continue
            if (code, synonym) in seen:
                continue
            seen.add((code, synonym))
            entries.setdefault(code, []).append(synonym)
        return cls({c: tuple(s) for c, s in entries.items()})

    def synonyms_for(self, code: str) -> tuple[str, ...]:
        return self.entries.get(code, ())

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class AugmentPlan:
    replacement_probability: float = 1.0
    max_new_sentences: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.replacement_probability <= 1.0:
            raise ValueError("replacement_probability must be in [0, 1]")
        if self.max_new_sentences is not None and self.max_new_sentences < 0:
            raise ValueError("max_new_sentences must be nonnegative")


def read_lexicon(path: str | Path) -> SynonymLexicon:
    """Load a tab-separated synonym lexicon with header columns code, synonym."""
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoError(f"cannot read lexicon {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader, None)
        if header is None:
            return SynonymLexicon({})
        positions = {name.strip(): i for i, name in enumerate(header)}
        missing = [c for c in ("code", "synonym") if c not in positions]
        if missing:
            raise ParseError(f"missing columns {missing} in header", path=str(path), line=1)
        code_i, syn_i = positions["code"], positions["synonym"]
        pairs = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) <= max(code_i, syn_i):
                raise ParseError(
                    f"expected at least {max(code_i, syn_i) + 1} columns, got {len(row)}",
                    path=str(path),
                    line=lineno,
                )
            pairs.append((row[code_i], row[syn_i]))
    return SynonymLexicon.from_pairs(pairs)


def _rebased(sentence: Sentence, mentions: Sequence[Mention]) -> list[Mention]:
    """Shift mentions to sentence-local offsets (sentence start becomes 0)."""
    base = sentence.start
    return [
        Mention(m.doc_id, m.start - base, m.end - base, m.text, m.entity_type, m.code)
        for m in mentions
    ]


def _substituted(
    ts: TaggedSentence,
    target: int,
    replacement: str,
    new_doc_id: str,
) -> TaggedSentence:
    """New standalone sentence with one mention's text swapped out.

    Offsets are sentence-local in the result; mentions after the target
    shift by the replacement length delta.
    """
    sent = ts.sentence
    local = _rebased(sent, ts.mentions)
    tgt = local[target]
    delta = len(replacement) - (tgt.end - tgt.start)
    text = sent.text[: tgt.start] + replacement + sent.text[tgt.end :]

    new_mentions = []
    for i, m in enumerate(local):
        if i == target:
            m = Mention(new_doc_id, m.start, m.end + delta, replacement, m.entity_type, m.code)
        else:
            shift = delta if m.start >= tgt.end else 0
            m = Mention(
                new_doc_id, m.start + shift, m.end + shift, m.text, m.entity_type, m.code
            )
        new_mentions.append(m)
    new_sentence = Sentence(
        doc_id=new_doc_id, start=0, end=len(text), text=text, tokens=tuple(tokenize(text))
    )
    return TaggedSentence(new_sentence, tuple(new_mentions))


def synonym_replace(
    dataset: Sequence[TaggedSentence],
    lexicon: SynonymLexicon,
    plan: AugmentPlan,
) -> list[TaggedSentence]:
    """Emit extra example sentences with mentions swapped for synonyms.

    For every mention selected by a Bernoulli draw at
    ``plan.replacement_probability`` whose code has at least one synonym
    differing from the current surface, one new sentence is produced with
    that single mention substituted. Originals come first in the output,
    new sentences after, in (sentence, mention) order. Selection draws use
    a per-sentence generator derived from ``plan.seed`` and the sentence
    index, so results do not depend on execution order. Candidates whose
    rewritten annotations fail IOB2 encoding are skipped with a warning.
    """
    out = list(dataset)
    budget = plan.max_new_sentences
    emitted = 0
    for si, ts in enumerate(dataset):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=plan.seed, spawn_key=(si,)))
        )
        counter = 0
        for mi, mention in enumerate(ts.mentions):
            selected = rng.random() < plan.replacement_probability
            if not selected or mention.code is None:
                continue
            options = [s for s in lexicon.synonyms_for(mention.code) if s != mention.text]
            if not options:
                continue
            if budget is not None and emitted >= budget:
                return out
            replacement = options[int(rng.integers(len(options)))]
            new_doc_id = f"{ts.sentence.doc_id}#aug{si}.{counter}"
            candidate = _substituted(ts, mi, replacement, new_doc_id)
            try:
                encode_iob2(candidate.sentence, candidate.mentions, strict_boundaries=True)
            except SintomaError as exc:
                logger.warning("skipping augmentation for %s: %s", new_doc_id, exc)
                continue
            out.append(candidate)
            emitted += 1
            counter += 1
    return out
