"""Alias knowledge base: build, normalize, deduplicate, augment, query.

The KB is assembled from any mix of alias sources (gazetteer, training
mentions, synonym lexicon, augmentation) and holds one record per
(normalized surface, code) pair. Lookups go through the same surface
normalization as ingestion, so a mention matches an alias whenever the
two collapse to the same string.
"""

from __future__ import annotations

import csv
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DegenerateAlias, IoError, ParseError

SOURCES = ("gazetteer", "train", "umls", "augmentation")

#: Separator used by composite (multi-concept) codes, which are excluded.
COMPOSITE_SEPARATOR = "+"

_KB_DUMP_COLUMNS = ("surface", "code", "source", "normalized_surface")


def normalize_surface(s: str) -> str:
    """Canonical alias form: NFC, lowercased, whitespace collapsed.

    Diacritics are preserved ("médico" and "medico" stay distinct). The
    trailing NFC pass makes the function idempotent even for inputs whose
    lowercase form re-decomposes.
    """
    s = unicodedata.normalize("NFC", s).lower()
    s = " ".join(s.split())
    return unicodedata.normalize("NFC", s)


@dataclass(frozen=True)
class AliasRecord:
    surface: str
    code: str
    source: str
    normalized_surface: str = field(default="", compare=True)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown alias source {self.source!r}, expected one of {SOURCES}")
        if not self.code or self.code != self.code.strip():
            raise DegenerateAlias(f"bad code {self.code!r} for surface {self.surface!r}")
        if "\t" in self.surface or "\n" in self.surface or "\r" in self.surface:
            raise DegenerateAlias(f"surface contains tab/newline: {self.surface!r}")
        if not self.normalized_surface:
            object.__setattr__(self, "normalized_surface", normalize_surface(self.surface))
        if not self.normalized_surface:
            raise DegenerateAlias(f"surface {self.surface!r} is empty after normalization")


@dataclass(frozen=True)
class KbAugmentConfig:
    rarity_threshold: int = 5
    generated_per_concept: int = 5
    seed: int = 0
    edit_ops: tuple[str, ...] = ("insert_char", "delete_char")

    def __post_init__(self):
        if self.rarity_threshold <= 0 or self.generated_per_concept <= 0:
            raise ValueError("rarity_threshold and generated_per_concept must be positive")
        if not self.edit_ops:
            raise ValueError("edit_ops must not be empty")
        for op in self.edit_ops:
            if op not in ("insert_char", "delete_char"):
                raise ValueError(f"unknown edit op {op!r}")


class KnowledgeBase:
    """Immutable deduplicated alias store with an exact-match index.

    ``records`` is sorted by (surface, code); ``exact_index`` maps each
    normalized surface to its codes in sorted order; ``code_alias_count``
    counts records per code. Instances are safe for concurrent readers.
    """

    __slots__ = ("records", "exact_index", "code_alias_count", "_record_index")

    def __init__(self, records: Sequence[AliasRecord]):
        ordered = sorted(records, key=lambda r: (r.surface, r.code))
        index: dict[str, list[str]] = {}
        counts: dict[str, int] = {}
        seen: set[tuple[str, str]] = set()
        for rec in ordered:
            key = (rec.normalized_surface, rec.code)
            if key in seen:
                raise DegenerateAlias(
                    f"duplicate record for ({rec.normalized_surface!r}, {rec.code!r})"
                )
            seen.add(key)
            index.setdefault(rec.normalized_surface, []).append(rec.code)
            counts[rec.code] = counts.get(rec.code, 0) + 1
        self.records: tuple[AliasRecord, ...] = tuple(ordered)
        self.exact_index: dict[str, tuple[str, ...]] = {
            surf: tuple(sorted(codes)) for surf, codes in index.items()
        }
        self.code_alias_count: dict[str, int] = counts

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, KnowledgeBase) and self.records == other.records

    def __hash__(self):
        return hash(self.records)


def build(sources: Sequence[tuple[Iterable[tuple[str, str]], str]]) -> KnowledgeBase:
    """Assemble a KB from (alias stream, source tag) pairs.

    Streams yield (surface, code) pairs. Records are deduplicated on
    (normalized surface, code) keeping the first-seen source; composite
    codes joined with "+" are excluded outright. The result is ordered by
    (surface, code) regardless of input order within a stream.
    """
    seen: set[tuple[str, str]] = set()
    records: list[AliasRecord] = []
    for stream, source in sources:
        for surface, code in stream:
            code = code.strip()
            if COMPOSITE_SEPARATOR in code:
                continue
            rec = AliasRecord(surface=surface, code=code, source=source)
            key = (rec.normalized_surface, rec.code)
            if key in seen:
                continue
            seen.add(key)
            records.append(rec)
    return KnowledgeBase(records)


def exact_lookup(kb: KnowledgeBase, mention_text: str) -> tuple[str, ...]:
    """Codes whose normalized alias equals the normalized mention, sorted."""
    return kb.exact_index.get(normalize_surface(mention_text), ())


def _edit_candidates(alias: str, ops: Sequence[str]) -> list[str]:
    """All single-edit variants of an alias, for exhaustive fallback."""
    out = []
    if "delete_char" in ops and len(alias) > 1:
        out += [alias[:i] + alias[i + 1 :] for i in range(len(alias))]
    if "insert_char" in ops:
        alphabet = sorted(set(alias))
        out += [
            alias[:i] + ch + alias[i:]
            for i in range(len(alias) + 1)
            for ch in alphabet
        ]
    return out


_MAX_RANDOM_DRAWS = 200


def augment_rare(kb: KnowledgeBase, cfg: KbAugmentConfig) -> KnowledgeBase:
    """Add synthetic aliases for concepts with few records.

    Every code whose alias count is below ``rarity_threshold`` gains
    exactly ``generated_per_concept`` records (source ``augmentation``),
    each produced from a uniformly chosen existing alias of that code by
    one random character insertion (a letter drawn from the alias's own
    characters) or deletion. Draws that collide with an existing
    (normalized surface, code) pair, would delete the only character, or
    normalize to the empty string are retried; after too many rejected
    draws the full candidate set is enumerated and a uniform pick is made
    from whatever remains. Deterministic given ``cfg.seed``; codes at or
    above the threshold are untouched.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    taken = {(r.normalized_surface, r.code) for r in kb.records}
    by_code: dict[str, list[str]] = {}
    for rec in kb.records:
        by_code.setdefault(rec.code, []).append(rec.surface)

    new_records: list[AliasRecord] = []
    rare = sorted(c for c, n in kb.code_alias_count.items() if n < cfg.rarity_threshold)
    for code in rare:
        aliases = by_code[code]
        for _ in range(cfg.generated_per_concept):
            surface = _draw_edited_alias(rng, aliases, code, cfg.edit_ops, taken)
            rec = AliasRecord(surface=surface, code=code, source="augmentation")
            taken.add((rec.normalized_surface, rec.code))
            new_records.append(rec)
    return KnowledgeBase(list(kb.records) + new_records)


def _draw_edited_alias(
    rng: np.random.Generator,
    aliases: Sequence[str],
    code: str,
    ops: Sequence[str],
    taken: set[tuple[str, str]],
) -> str:
    def usable(cand: str) -> bool:
        norm = normalize_surface(cand)
        return bool(norm) and (norm, code) not in taken

    for _ in range(_MAX_RANDOM_DRAWS):
        alias = aliases[int(rng.integers(len(aliases)))]
        op = ops[int(rng.integers(len(ops)))] if len(ops) > 1 else ops[0]
        if op == "delete_char":
            if len(alias) == 1:
                continue
            pos = int(rng.integers(len(alias)))
            cand = alias[:pos] + alias[pos + 1 :]
        else:
            alphabet = sorted(set(alias))
            pos = int(rng.integers(len(alias) + 1))
            cand = alias[:pos] + alphabet[int(rng.integers(len(alphabet)))] + alias[pos:]
        if usable(cand):
            return cand

    # Rejection sampling stalled: enumerate every candidate instead.
    pool = sorted({c for a in aliases for c in _edit_candidates(a, ops) if usable(c)})
    if not pool:
        raise DegenerateAlias(f"no single-edit alias available for code {code!r}")
    return pool[int(rng.integers(len(pool)))]


# --- file formats -------------------------------------------------------------


def read_gazetteer(path: str | Path) -> Iterator[tuple[str, str]]:
    """Yield (surface, code) pairs from a tab-separated gazetteer.

    Requires a header row naming at least ``code`` and ``term``; any other
    columns are ignored.
    """
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoError(f"cannot read gazetteer {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader, None)
        if header is None:
            return
        positions = {name.strip(): i for i, name in enumerate(header)}
        missing = [c for c in ("code", "term") if c not in positions]
        if missing:
            raise ParseError(f"missing columns {missing} in header", path=str(path), line=1)
        code_i, term_i = positions["code"], positions["term"]
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) <= max(code_i, term_i):
                raise ParseError(
                    f"expected at least {max(code_i, term_i) + 1} columns, got {len(row)}",
                    path=str(path),
                    line=lineno,
                )
            yield row[term_i], row[code_i]


def write_kb(kb: KnowledgeBase, path: str | Path) -> None:
    """Dump the KB as TSV (surface, code, source, normalized_surface).

    The dump is byte-identical across runs for equal KBs and round-trips
    losslessly through :func:`read_kb`.
    """
    lines = ["\t".join(_KB_DUMP_COLUMNS)]
    lines += [
        f"{r.surface}\t{r.code}\t{r.source}\t{r.normalized_surface}" for r in kb.records
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_kb(path: str | Path) -> KnowledgeBase:
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoError(f"cannot read KB dump {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != _KB_DUMP_COLUMNS:
            raise ParseError(
                f"expected header {list(_KB_DUMP_COLUMNS)}", path=str(path), line=1
            )
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(_KB_DUMP_COLUMNS):
                raise ParseError(
                    f"expected {len(_KB_DUMP_COLUMNS)} columns, got {len(row)}",
                    path=str(path),
                    line=lineno,
                )
            surface, code, source, norm = row
            try:
                rec = AliasRecord(surface=surface, code=code, source=source)
            except (ValueError, DegenerateAlias) as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from exc
            if rec.normalized_surface != norm:
                raise ParseError(
                    f"normalized_surface column {norm!r} does not match "
                    f"normalize_surface({surface!r}) = {rec.normalized_surface!r}",
                    path=str(path),
                    line=lineno,
                )
            records.append(rec)
    return KnowledgeBase(records)
