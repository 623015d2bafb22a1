"""Shared-task metrics: strict-span NER scores and linking accuracy.

NER uses micro-averaged precision/recall/F1 with exact span matching on
(document, start, end, entity type); there is no partial-overlap credit.
Degenerate denominators yield 0 rather than errors so empty prediction
runs still report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import MissingPrediction
from .linker import LinkPrediction
from .spans import Mention, NO_CODE


@dataclass(frozen=True)
class NerMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    duplicate_predictions_removed: int = 0

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, duplicates: int = 0) -> "NerMetrics":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(tp, fp, fn, precision, recall, f1, duplicates)


def ner_metrics(gold: Sequence[Mention], predicted: Sequence[Mention]) -> NerMetrics:
    """Micro P/R/F1 with exact (doc_id, start, end, entity_type) matching.

    Duplicate predicted spans are collapsed before counting and the number
    removed is carried on the result; each gold mention can match at most
    one prediction.
    """
    gold_keys = {m.key() for m in gold}
    pred_keys = set()
    duplicates = 0
    for m in predicted:
        k = m.key()
        if k in pred_keys:
            duplicates += 1
        else:
            pred_keys.add(k)
    tp = len(gold_keys & pred_keys)
    return NerMetrics.from_counts(
        tp, len(pred_keys) - tp, len(gold_keys) - tp, duplicates
    )


@dataclass(frozen=True)
class LinkingReport:
    total: int
    correct: int
    accuracy: float
    include_no_code: bool
    method_counts: dict[str, int] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [
            f"evaluated mentions: {self.total}"
            + ("" if self.include_no_code else " (gold NO_CODE excluded)"),
            f"correct: {self.correct}",
            f"accuracy: {self.accuracy:.3f}",
        ]
        for method in sorted(self.method_counts):
            out.append(f"method {method}: {self.method_counts[method]}")
        return out


def linking_accuracy(
    gold: Sequence[tuple[Mention, str | None]],
    predictions: Sequence[LinkPrediction],
    include_no_code: bool = True,
) -> LinkingReport:
    """Top-1 accuracy of predicted codes against gold codes.

    Predictions are matched to gold mentions by span key and must cover
    every gold mention. A ``None`` gold code is treated as the NO_CODE
    sentinel. With ``include_no_code`` false, gold NO_CODE mentions leave
    the denominator entirely; with it true they count and are correct only
    when the prediction is NO_CODE too.
    """
    by_key: dict[tuple, LinkPrediction] = {}
    for pred in predictions:
        by_key.setdefault(pred.mention.key(), pred)

    uncovered = [m for m, _ in gold if m.key() not in by_key]
    if uncovered:
        raise MissingPrediction(uncovered)

    total = correct = 0
    method_counts: dict[str, int] = {}
    for mention, gold_code in gold:
        gold_code = NO_CODE if gold_code is None else gold_code
        if not include_no_code and gold_code == NO_CODE:
            continue
        pred = by_key[mention.key()]
        total += 1
        correct += pred.code == gold_code
        method_counts[pred.method] = method_counts.get(pred.method, 0) + 1
    accuracy = correct / total if total else 0.0
    return LinkingReport(total, correct, accuracy, include_no_code, method_counts)


# --- report tables -------------------------------------------------------------


class ExperimentReport:
    """Deterministic comparison table over named metric sets.

    Columns appear in first-seen order across runs; per-column maxima are
    starred in the human-readable rendering.
    """

    def __init__(self, runs: Sequence[tuple[str, Mapping[str, float]]]):
        self.names: list[str] = []
        self.columns: list[str] = []
        self.rows: list[dict[str, float]] = []
        for name, metrics in runs:
            self.names.append(name)
            row = dict(metrics)
            self.rows.append(row)
            for col in row:
                if col not in self.columns:
                    self.columns.append(col)

    def _maxima(self) -> dict[str, float]:
        out = {}
        for col in self.columns:
            values = [row[col] for row in self.rows if col in row]
            if values:
                out[col] = max(values)
        return out

    def tsv(self) -> str:
        lines = ["\t".join(["run"] + self.columns)]
        for name, row in zip(self.names, self.rows):
            cells = [name] + [
                f"{row[col]:.6g}" if col in row else "" for col in self.columns
            ]
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"

    def pretty(self) -> str:
        maxima = self._maxima()
        header = ["run"] + self.columns
        body = []
        for name, row in zip(self.names, self.rows):
            cells = [name]
            for col in self.columns:
                if col not in row:
                    cells.append("")
                    continue
                mark = "*" if row[col] == maxima[col] else ""
                cells.append(f"{row[col]:.3f}{mark}")
            body.append(cells)
        widths = [
            max(len(r[i]) for r in [header] + body) for i in range(len(header))
        ]
        def fmt(cells: list[str]) -> str:
            return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
        rule = "  ".join("-" * w for w in widths)
        return "\n".join([fmt(header), rule] + [fmt(c) for c in body]) + "\n"


def experiment_report(runs: Sequence[tuple[str, Mapping[str, float]]]) -> ExperimentReport:
    return ExperimentReport(runs)
