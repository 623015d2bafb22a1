"""Dataset serialization (JSON lines) and corpus-to-dataset assembly.

A dataset is a list of tagged sentences. On disk each line is one
sentence object with absolute character offsets; tokens are not stored
because the tokenizer is deterministic over the sentence text.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Sequence

from .errors import IoError, ParseError
from .spans import Mention, TaggedSentence, resolve_nesting
from .textseg import Document, SegmenterConfig, Sentence, split_sentences, tokenize

logger = logging.getLogger(__name__)


def _sentence_to_obj(ts: TaggedSentence) -> dict:
    s = ts.sentence
    return {
        "doc_id": s.doc_id,
        "start": s.start,
        "end": s.end,
        "text": s.text,
        "mentions": [
            {
                "start": m.start,
                "end": m.end,
                "text": m.text,
                "entity_type": m.entity_type,
                "code": m.code,
            }
            for m in ts.mentions
        ],
    }


def _sentence_from_obj(obj: dict, path: str, line: int) -> TaggedSentence:
    try:
        text = obj["text"]
        start, end = int(obj["start"]), int(obj["end"])
        doc_id = obj["doc_id"]
        sentence = Sentence(
            doc_id=doc_id,
            start=start,
            end=end,
            text=text,
            tokens=tuple(tokenize(text, start)),
        )
        mentions = tuple(
            Mention(
                doc_id=doc_id,
                start=int(m["start"]),
                end=int(m["end"]),
                text=m["text"],
                entity_type=m.get("entity_type", "SINTOMA"),
                code=m.get("code"),
            )
            for m in obj["mentions"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad sentence object: {exc}", path=path, line=line) from exc
    return TaggedSentence(sentence, mentions)


def write_dataset(path: str | Path, dataset: Sequence[TaggedSentence]) -> None:
    """Write one JSON object per line, byte-stable across runs."""
    lines = [
        json.dumps(_sentence_to_obj(ts), ensure_ascii=False, sort_keys=True,
                   separators=(",", ":"))
        for ts in dataset
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_dataset(path: str | Path) -> list[TaggedSentence]:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read dataset {path}: {exc}") from exc
    out = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON: {exc}", path=str(path), line=lineno) from exc
        out.append(_sentence_from_obj(obj, str(path), lineno))
    return out


def assemble_dataset(
    documents: Sequence[Document],
    annotations: Sequence[Mention],
    cfg: SegmenterConfig = SegmenterConfig(),
) -> list[TaggedSentence]:
    """Split documents and attach each annotation to its sentence.

    Nested annotations are resolved first (outermost wins). Mentions that
    cross a sentence boundary or fall in a document without text are
    dropped with a warning; NER training cannot use a span the segmenter
    split in half, and silently keeping it would corrupt the tag sequence.
    """
    by_doc: dict[str, list[Mention]] = {}
    known_docs = {d.doc_id for d in documents}
    for m in annotations:
        if m.doc_id not in known_docs:
            logger.warning("annotation for unknown document %s dropped", m.doc_id)
            continue
        by_doc.setdefault(m.doc_id, []).append(m)

    dataset: list[TaggedSentence] = []
    for doc in documents:
        mentions, dropped = resolve_nesting(by_doc.get(doc.doc_id, []))
        for inner in dropped:
            logger.warning(
                "nested mention %s[%d:%d] %r dropped (outer span kept)",
                inner.doc_id, inner.start, inner.end, inner.text,
            )
        remaining = sorted(mentions, key=lambda m: (m.start, m.end))
        for sentence in split_sentences(doc, cfg):
            inside = [
                m for m in remaining if m.start >= sentence.start and m.end <= sentence.end
            ]
            dataset.append(TaggedSentence(sentence, tuple(inside)))
            remaining = [m for m in remaining if m not in inside]
        for m in remaining:
            logger.warning(
                "mention %s[%d:%d] %r crosses sentence boundaries, dropped",
                m.doc_id, m.start, m.end, m.text,
            )
    return dataset
