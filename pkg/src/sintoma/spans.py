"""Character-span mention annotations and per-token IOB2 tag sequences.

IOB2: every mention starts with ``B-<type>``, continues with ``I-<type>``,
and all other tokens are ``O``. Encoding requires non-overlapping,
token-aligned mentions; :func:`resolve_nesting` produces such a set from
raw annotations, and decoding offers a tolerant mode that repairs invalid
tag runs instead of failing.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    InvalidTagSequence,
    MisalignedMention,
    OverlappingMentions,
    ParseError,
)
from .textseg import Sentence

logger = logging.getLogger(__name__)

#: Sentinel code for mentions that have no assignable concept code.
NO_CODE = "NO_CODE"

O_TAG = "O"


@dataclass(frozen=True)
class Mention:
    """A typed character span, optionally normalized to a concept code."""

    doc_id: str
    start: int
    end: int
    text: str
    entity_type: str = "SINTOMA"
    code: str | None = None

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"mention span must be non-empty: ({self.start}, {self.end})")
        if not self.entity_type:
            raise ValueError("entity_type must be non-empty")

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def key(self) -> tuple[str, int, int, str]:
        """Identity used by strict-span evaluation."""
        return (self.doc_id, self.start, self.end, self.entity_type)


@dataclass(frozen=True)
class TaggedSentence:
    """A sentence paired with its (non-overlapping) gold mentions."""

    sentence: Sentence
    mentions: tuple[Mention, ...]


def is_valid_iob2(labels: Sequence[str]) -> bool:
    prev = O_TAG
    for lab in labels:
        if lab == O_TAG:
            prev = lab
            continue
        if len(lab) < 3 or lab[1] != "-" or lab[0] not in "BI":
            return False
        if lab[0] == "I" and prev != "B" + lab[1:] and prev != lab:
            return False
        prev = lab
    return True


def encode_iob2(
    sentence: Sentence,
    mentions: Sequence[Mention],
    *,
    strict_boundaries: bool = False,
) -> list[str]:
    """Tag each sentence token with O / B-<type> / I-<type>.

    Mentions must be non-overlapping (run :func:`resolve_nesting` first)
    and lie within the sentence span. A mention boundary strictly inside a
    token is expanded to the full token and logged, or raises
    :class:`MisalignedMention` when ``strict_boundaries`` is set.
    """
    ordered = sorted(mentions, key=lambda m: (m.start, m.end))
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise OverlappingMentions(f"{a.span} overlaps {b.span} in {sentence.doc_id}")

    tags = [O_TAG] * len(sentence.tokens)
    for m in ordered:
        if m.start < sentence.start or m.end > sentence.end:
            raise MisalignedMention(
                f"mention {m.span} outside sentence ({sentence.start}, {sentence.end})"
            )
        covered = [
            i
            for i, t in enumerate(sentence.tokens)
            if t.start < m.end and m.start < t.end
        ]
        if not covered:
            raise MisalignedMention(
                f"mention {m.span} covers no token in {sentence.doc_id}"
            )
        first, last = sentence.tokens[covered[0]], sentence.tokens[covered[-1]]
        if m.start != first.start or m.end != last.end:
            if strict_boundaries:
                raise MisalignedMention(
                    f"mention {m.span} not token-aligned "
                    f"(tokens span ({first.start}, {last.end}))"
                )
            logger.warning(
                "expanding misaligned mention %s %r to token boundaries (%d, %d)",
                m.span,
                m.text,
                first.start,
                last.end,
            )
        tags[covered[0]] = "B-" + m.entity_type
        for i in covered[1:]:
            tags[i] = "I-" + m.entity_type
    return tags


def decode_iob2(
    tags: Sequence[str],
    sentence: Sentence,
    *,
    strict: bool = False,
) -> list[Mention]:
    """Recover mentions from a tag sequence.

    In tolerant mode (default) an ``I-`` tag that does not continue a same
    type run is treated as ``B-``; strict mode raises
    :class:`InvalidTagSequence` instead. Mention text is sliced from the
    sentence, so offset fidelity is guaranteed by construction.
    """
    if len(tags) != len(sentence.tokens):
        raise InvalidTagSequence(
            f"{len(tags)} tags for {len(sentence.tokens)} tokens in {sentence.doc_id}"
        )
    if strict and not is_valid_iob2(tags):
        raise InvalidTagSequence(f"invalid IOB2 sequence: {list(tags)}")

    mentions: list[Mention] = []
    run_start: int | None = None
    run_type = ""

    def flush(last_idx: int):
        nonlocal run_start
        if run_start is None:
            return
        first_tok = sentence.tokens[run_start]
        last_tok = sentence.tokens[last_idx]
        text = sentence.text[first_tok.start - sentence.start : last_tok.end - sentence.start]
        mentions.append(
            Mention(sentence.doc_id, first_tok.start, last_tok.end, text, run_type)
        )
        run_start = None

    for i, lab in enumerate(tags):
        if lab == O_TAG:
            flush(i - 1)
            continue
        kind, _, etype = lab.partition("-")
        if kind == "B" or run_start is None or etype != run_type:
            flush(i - 1)
            run_start, run_type = i, etype
    flush(len(tags) - 1)
    return mentions


def resolve_nesting(mentions: Sequence[Mention]) -> tuple[list[Mention], list[Mention]]:
    """Reduce raw annotations to a non-overlapping set.

    Longer mentions win (so containment keeps the outermost); equal
    lengths tie-break on earlier start. Returns ``(kept, dropped)``, both
    sorted by span.
    """
    order = sorted(mentions, key=lambda m: (-(m.end - m.start), m.start, m.end, m.entity_type))
    kept: list[Mention] = []
    dropped: list[Mention] = []
    for m in order:
        if any(m.start < k.end and k.start < m.end for k in kept):
            dropped.append(m)
        else:
            kept.append(m)
    key = lambda m: (m.doc_id, m.start, m.end)
    return sorted(kept, key=key), sorted(dropped, key=key)


# --- annotation file I/O (shared-task layout) -------------------------------

_REQUIRED_COLUMNS = ("filename", "label", "start_span", "end_span", "text")


def read_annotations(path: str | Path) -> list[Mention]:
    """Read a tab-separated annotation file.

    Expected header columns: ``filename label start_span end_span text``
    plus an optional ``code`` column; extra columns are ignored. One
    mention per row, UTF-8.
    """
    p = Path(path)
    mentions = []
    with open(p, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty annotation file", path=str(p)) from None
        cols = {name: i for i, name in enumerate(header)}
        missing = [c for c in _REQUIRED_COLUMNS if c not in cols]
        if missing:
            raise ParseError(f"missing columns {missing}", path=str(p), line=1)
        code_col = cols.get("code")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell for cell in row):
                continue
            try:
                start = int(row[cols["start_span"]])
                end = int(row[cols["end_span"]])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"bad span: {exc}", path=str(p), line=lineno) from None
            code = None
            if code_col is not None and code_col < len(row) and row[code_col]:
                code = row[code_col]
            try:
                mentions.append(
                    Mention(
                        doc_id=row[cols["filename"]],
                        start=start,
                        end=end,
                        text=row[cols["text"]],
                        entity_type=row[cols["label"]],
                        code=code,
                    )
                )
            except (ValueError, IndexError) as exc:
                raise ParseError(str(exc), path=str(p), line=lineno) from None
    return mentions


def write_annotations(
    path: str | Path,
    mentions: Iterable[Mention],
    *,
    with_code: bool = False,
    extra_columns: dict[str, list[str]] | None = None,
) -> None:
    """Write mentions in the tab-separated shared-task layout.

    ``extra_columns`` maps column name to per-row values (aligned with the
    mention order) for outputs that carry scores or methods alongside.
    """
    mentions = list(mentions)
    extra = extra_columns or {}
    for name, values in extra.items():
        if len(values) != len(mentions):
            raise ValueError(f"extra column {name!r} has {len(values)} values for {len(mentions)} rows")
    header = list(_REQUIRED_COLUMNS) + (["code"] if with_code else []) + list(extra)
    rows = sorted(
        ((m, [extra[name][i] for name in extra]) for i, m in enumerate(mentions)),
        key=lambda pair: (pair[0].doc_id, pair[0].start, pair[0].end),
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(header) + "\n")
        for m, extras in rows:
            row = [m.doc_id, m.entity_type, str(m.start), str(m.end), m.text]
            if with_code:
                row.append(m.code if m.code is not None else "")
            row.extend(extras)
            fh.write("\t".join(row) + "\n")
