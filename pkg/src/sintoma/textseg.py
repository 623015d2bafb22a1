"""Sentence splitting and tokenization with exact character offsets.

All offsets in this package are Unicode scalar-value positions (Python
``str`` indices), never bytes: Spanish clinical text is accent-heavy and
byte offsets are ambiguous across encodings.

The splitter is rule-based: a sentence break occurs after ``. ? !`` when
followed by whitespace and an uppercase letter or digit, unless the word
carrying the terminator is a known abbreviation. Sentences whose token
count exceeds the configured budget are chunked greedily at token
boundaries so every emitted unit fits a fixed-size model window.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import IoError

# Spanish clinical abbreviations that commonly precede capitalized words.
DEFAULT_ABBREVIATIONS = frozenset(
    {
        "Dr.", "Dra.", "Sr.", "Sra.", "Srta.", "Prof.", "etc.", "Fig.",
        "fig.", "pág.", "págs.", "núm.", "No.", "no.", "vs.", "aprox.",
        "art.", "cap.", "Ud.", "Uds.", "EE.UU.",
    }
)

# A token is a maximal run of word characters or a single non-word,
# non-space character (punctuation stands alone).
_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

_TERMINATORS = ".?!"


@dataclass(frozen=True)
class Document:
    """One raw clinical document."""

    doc_id: str
    text: str

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"token span must be non-empty: ({self.start}, {self.end})")


@dataclass(frozen=True)
class Sentence:
    """A sentence (or sub-sentence chunk) with its tokens.

    ``text`` is the exact document slice ``doc.text[start:end]``; keeping it
    on the sentence lets downstream stages slice mention surfaces without
    holding the whole document.
    """

    doc_id: str
    start: int
    end: int
    text: str
    tokens: tuple[Token, ...]


@dataclass(frozen=True)
class SegmenterConfig:
    max_tokens: int = 512
    abbreviation_list: frozenset[str] = DEFAULT_ABBREVIATIONS

    def __post_init__(self):
        if self.max_tokens < 2:
            raise ValueError(f"max_tokens must be >= 2, got {self.max_tokens}")


def tokenize(sentence_text: str, base_offset: int = 0) -> list[Token]:
    """Split text into word and single-character punctuation tokens.

    Offsets are absolute: ``base_offset`` is added to every span so tokens
    can be created from a sentence slice while addressing the document.
    """
    return [
        Token(m.group(), base_offset + m.start(), base_offset + m.end())
        for m in _TOKEN_RE.finditer(sentence_text)
    ]


def _is_abbreviation(text: str, term_pos: int, abbreviations: frozenset[str]) -> bool:
    # The candidate is the maximal non-whitespace run ending at the
    # terminator (inclusive), e.g. "Dr." in "el Dr. García".
    start = term_pos
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start : term_pos + 1] in abbreviations


def _break_positions(text: str, abbreviations: frozenset[str]) -> list[int]:
    """Indices one past a sentence terminator where a break applies."""
    breaks = []
    for i, ch in enumerate(text):
        if ch not in _TERMINATORS:
            continue
        j = i + 1
        if j >= len(text) or not text[j].isspace():
            continue
        while j < len(text) and text[j].isspace():
            j += 1
        if j >= len(text):
            continue
        nxt = text[j]
        if not (nxt.isupper() or nxt.isdigit()):
            continue
        if _is_abbreviation(text, i, abbreviations):
            continue
        breaks.append(i + 1)
    return breaks


def _trimmed_span(text: str, start: int, end: int) -> tuple[int, int]:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    return start, end


def split_sentences(doc: Document, cfg: SegmenterConfig = SegmenterConfig()) -> list[Sentence]:
    """Split a document into sentences of at most ``cfg.max_tokens`` tokens.

    Sentence spans are trimmed of surrounding whitespace; together they
    cover every non-whitespace character of the document in order, so
    rejoining spans with the skipped whitespace reconstructs the text.
    Oversized sentences are chunked greedily at token boundaries.
    """
    text = doc.text
    sentences: list[Sentence] = []
    segment_start = 0
    for brk in _break_positions(text, cfg.abbreviation_list) + [len(text)]:
        start, end = _trimmed_span(text, segment_start, brk)
        segment_start = brk
        if start == end:
            continue
        tokens = tokenize(text[start:end], start)
        if not tokens:
            continue
        for chunk_start in range(0, len(tokens), cfg.max_tokens):
            chunk = tuple(tokens[chunk_start : chunk_start + cfg.max_tokens])
            c_start, c_end = chunk[0].start, chunk[-1].end
            sentences.append(
                Sentence(doc.doc_id, c_start, c_end, text[c_start:c_end], chunk)
            )
    return sentences


@dataclass
class CorpusStats:
    """Ingestion sanity-check counters over a parsed corpus."""

    documents: int = 0
    sentences: int = 0
    tokens: int = 0
    entities: int = 0
    unique_entity_texts: int = 0
    unique_codes: int = 0
    no_code_mentions: int = 0
    nested_mentions: int = 0
    # Both over-budget counts use this package's tokenizer; external
    # subword tokenizers will measure differently.
    documents_over_budget: int = 0
    chunked_sentences: int = 0

    def lines(self) -> list[str]:
        return [
            f"documents\t{self.documents}",
            f"sentences\t{self.sentences}",
            f"tokens\t{self.tokens}",
            f"entities\t{self.entities}",
            f"unique_entity_texts\t{self.unique_entity_texts}",
            f"unique_codes\t{self.unique_codes}",
            f"no_code_mentions\t{self.no_code_mentions}",
            f"nested_mentions\t{self.nested_mentions}",
            f"documents_over_budget\t{self.documents_over_budget}",
            f"chunked_sentences\t{self.chunked_sentences}",
        ]


def corpus_stats(
    documents: Sequence[Document],
    annotations: Iterable = (),
    cfg: SegmenterConfig = SegmenterConfig(),
) -> CorpusStats:
    """Count documents, sentences, tokens, and annotation facts.

    ``annotations`` is any iterable of mention objects carrying ``text``,
    ``code``, ``start``/``end``, and ``doc_id`` attributes (see
    :mod:`sintoma.spans`); pass nothing for corpus-only stats.
    """
    from .spans import NO_CODE  # local import to avoid a cycle

    stats = CorpusStats(documents=len(documents))
    for doc in documents:
        whole = tokenize(doc.text)
        if len(whole) > cfg.max_tokens:
            stats.documents_over_budget += 1
        # Count raw rule-based sentences before chunking to see how many
        # exceed the budget on their own.
        raw_cfg = SegmenterConfig(max_tokens=10**9, abbreviation_list=cfg.abbreviation_list)
        raw = split_sentences(doc, raw_cfg)
        stats.chunked_sentences += sum(1 for s in raw if len(s.tokens) > cfg.max_tokens)
        sents = split_sentences(doc, cfg)
        stats.sentences += len(sents)
        stats.tokens += sum(len(s.tokens) for s in sents)

    mentions = list(annotations)
    stats.entities = len(mentions)
    stats.unique_entity_texts = len({m.text for m in mentions})
    stats.unique_codes = len(
        {m.code for m in mentions if m.code is not None and m.code != NO_CODE}
    )
    stats.no_code_mentions = sum(1 for m in mentions if m.code == NO_CODE)

    by_doc: dict[str, list] = {}
    for m in mentions:
        by_doc.setdefault(m.doc_id, []).append(m)
    for doc_mentions in by_doc.values():
        spans = sorted((m.start, m.end) for m in doc_mentions)
        for i, (s1, e1) in enumerate(spans):
            for s2, e2 in spans[i + 1 :]:
                if s2 >= e1:
                    break
                if (s1 <= s2 and e2 <= e1) or (s2 <= s1 and e1 <= e2):
                    stats.nested_mentions += 1
    return stats


def read_corpus_dir(path: str | Path) -> list[Document]:
    """Load a corpus directory: one UTF-8 ``.txt`` file per document.

    The filename stem is the document id. Files are returned sorted by id
    so downstream runs are deterministic.
    """
    p = Path(path)
    if not p.is_dir():
        raise IoError(f"corpus directory not found: {p}")
    docs = []
    for f in sorted(p.glob("*.txt")):
        docs.append(Document(doc_id=f.stem, text=f.read_text(encoding="utf-8")))
    return docs


def read_abbreviations(path: str | Path) -> frozenset[str]:
    """Load an abbreviation list, one entry per line, UTF-8."""
    p = Path(path)
    if not p.is_file():
        raise IoError(f"abbreviation list not found: {p}")
    entries = {line.strip() for line in p.read_text(encoding="utf-8").splitlines()}
    return frozenset(e for e in entries if e)
