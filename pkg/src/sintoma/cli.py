"""Command-line pipeline: segmentation, training, tagging, KB, linking.

One executable with subcommands, configured by an optional TOML file
plus per-command flags (flags win). Every stage is deterministic given
its config and inputs: rerunning a subcommand on the same data produces
byte-identical outputs.

Exit codes: 0 success, 2 configuration or usage errors, 1 runtime
failures (bad data, missing services, I/O).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import augment as augment_mod
from . import crf, dataio, kb as kb_mod, linker, metrics, spans, textseg
from .errors import ConfigError, SintomaError

ENV_EMBED_URL = "SINTOMA_EMBED_URL"

_SCHEMA: dict[str, set[str]] = {
    "paths": {
        "corpus_dir", "annotations", "gazetteer", "lexicon", "abbreviations",
        "model", "embeddings", "kb", "dataset",
    },
    "segmenter": {"max_tokens"},
    "train": {
        "learning_rate", "l2_penalty", "epochs", "seed", "constrain_iob2",
        "batch_size", "feature_dim",
    },
    "augment": {"replacement_probability", "max_new_sentences", "seed"},
    "kb_augment": {"rarity_threshold", "generated_per_concept", "seed", "edit_ops"},
    "linker": {
        "use_sliding_window", "w_full", "w_first", "w_last", "window_fraction",
        "abstain_threshold", "top_k",
    },
    "embed": {"provider", "dim", "url", "batch_size"},
}


class RunConfig:
    """Parsed configuration file with schema validation.

    Sections and keys outside the documented schema are rejected rather
    than ignored, so a typo cannot silently fall back to a default.
    """

    def __init__(self, sections: dict | None = None):
        self.sections = sections or {}
        for section, keys in self.sections.items():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            if not isinstance(keys, dict):
                raise ConfigError(f"config section [{section}] must be a table")
            for key in keys:
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"unknown config key {section}.{key}")

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            with open(p, "rb") as fh:
                return cls(tomllib.load(fh))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from exc

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def path(self, key: str, override: str | None) -> Path | None:
        value = override if override is not None else self.get("paths", key)
        return Path(value) if value is not None else None


def _require(value: Path | None, what: str, flag: str) -> Path:
    if value is None:
        raise ConfigError(f"{what} not set: pass {flag} or add it to [paths] in the config")
    return value


def _require_input(path: Path, what: str) -> Path:
    if not path.exists():
        raise ConfigError(f"{what} does not exist: {path}")
    return path


def _pick(flag, cfg: RunConfig, section: str, key: str, default):
    if flag is not None:
        return flag
    return cfg.get(section, key, default)


def _segmenter_config(cfg: RunConfig, args) -> textseg.SegmenterConfig:
    max_tokens = _pick(getattr(args, "max_tokens", None), cfg, "segmenter", "max_tokens", 512)
    abbrev_path = cfg.path("abbreviations", getattr(args, "abbreviations", None))
    abbreviations = (
        textseg.read_abbreviations(_require_input(abbrev_path, "abbreviation list"))
        if abbrev_path is not None
        else textseg.DEFAULT_ABBREVIATIONS
    )
    try:
        return textseg.SegmenterConfig(max_tokens=int(max_tokens), abbreviation_list=abbreviations)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _linker_config(cfg: RunConfig, args) -> linker.LinkerConfig:
    def flag(name):
        return getattr(args, name, None)

    try:
        weights = linker.WindowWeights(
            w_full=float(_pick(flag("w_full"), cfg, "linker", "w_full", 0.75)),
            w_first=float(_pick(flag("w_first"), cfg, "linker", "w_first", 0.17)),
            w_last=float(_pick(flag("w_last"), cfg, "linker", "w_last", 0.08)),
            window_fraction=float(
                _pick(flag("window_fraction"), cfg, "linker", "window_fraction", 0.75)
            ),
        )
        sliding = flag("sliding_window")
        if sliding is None:
            sliding = bool(cfg.get("linker", "use_sliding_window", False))
        abstain = _pick(flag("abstain_threshold"), cfg, "linker", "abstain_threshold", None)
        return linker.LinkerConfig(
            use_sliding_window=bool(sliding),
            weights=weights,
            abstain_threshold=float(abstain) if abstain is not None else None,
            top_k=int(_pick(flag("top_k"), cfg, "linker", "top_k", 5)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _embedder(
    cfg: RunConfig, args, default_dim: int = 256
) -> linker.StubEmbedder | linker.ServiceEmbedder:
    provider = _pick(getattr(args, "provider", None), cfg, "embed", "provider", "stub")
    if provider == "stub":
        dim = int(_pick(getattr(args, "dim", None), cfg, "embed", "dim", default_dim))
        try:
            return linker.StubEmbedder(dim=dim)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if provider == "service":
        url = _pick(getattr(args, "url", None), cfg, "embed", "url", None)
        url = url or os.environ.get(ENV_EMBED_URL)
        if not url:
            raise ConfigError(
                f"embedding service url not set: pass --url, set embed.url, "
                f"or export {ENV_EMBED_URL}"
            )
        return linker.ServiceEmbedder(url)
    raise ConfigError(f"unknown embed provider {provider!r} (expected stub or service)")


def _load_corpus(cfg: RunConfig, args) -> list[textseg.Document]:
    corpus_dir = _require(cfg.path("corpus_dir", args.corpus), "corpus directory", "--corpus")
    return textseg.read_corpus_dir(_require_input(corpus_dir, "corpus directory"))


def _load_annotations(cfg: RunConfig, args, flag_name: str = "annotations") -> list[spans.Mention]:
    path = _require(
        cfg.path("annotations", getattr(args, flag_name, None)),
        "annotation file",
        f"--{flag_name}",
    )
    return spans.read_annotations(_require_input(path, "annotation file"))


# --- subcommands ---------------------------------------------------------------


def cmd_split(cfg: RunConfig, args) -> int:
    documents = _load_corpus(cfg, args)
    seg = _segmenter_config(cfg, args)
    dataset = [
        spans.TaggedSentence(s, ()) for d in documents for s in textseg.split_sentences(d, seg)
    ]
    dataio.write_dataset(args.out, dataset)
    print(f"wrote {len(dataset)} sentences from {len(documents)} documents to {args.out}")
    return 0


def cmd_stats(cfg: RunConfig, args) -> int:
    documents = _load_corpus(cfg, args)
    annotations: list[spans.Mention] = []
    ann_path = cfg.path("annotations", args.annotations)
    if ann_path is not None:
        annotations = spans.read_annotations(_require_input(ann_path, "annotation file"))
    stats = textseg.corpus_stats(documents, annotations, _segmenter_config(cfg, args))
    for line in stats.lines():
        print(line)
    return 0


def cmd_augment(cfg: RunConfig, args) -> int:
    documents = _load_corpus(cfg, args)
    annotations = _load_annotations(cfg, args)
    lexicon_path = _require(cfg.path("lexicon", args.lexicon), "synonym lexicon", "--lexicon")
    lexicon = augment_mod.read_lexicon(_require_input(lexicon_path, "synonym lexicon"))
    try:
        plan = augment_mod.AugmentPlan(
            replacement_probability=float(
                _pick(args.probability, cfg, "augment", "replacement_probability", 1.0)
            ),
            max_new_sentences=_pick(
                args.max_new, cfg, "augment", "max_new_sentences", None
            ),
            seed=int(_pick(args.seed, cfg, "augment", "seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    dataset = dataio.assemble_dataset(documents, annotations, _segmenter_config(cfg, args))
    augmented = augment_mod.synonym_replace(dataset, lexicon, plan)
    dataio.write_dataset(args.out, augmented)
    print(
        f"wrote {len(augmented)} sentences to {args.out} "
        f"({len(dataset)} original, {len(augmented) - len(dataset)} augmented)"
    )
    return 0


def _train_config(cfg: RunConfig, args) -> crf.TrainConfig:
    constrain = args.constrain_iob2
    if constrain is None:
        constrain = bool(cfg.get("train", "constrain_iob2", True))
    try:
        return crf.TrainConfig(
            learning_rate=float(_pick(args.learning_rate, cfg, "train", "learning_rate", 0.5)),
            l2_penalty=float(_pick(args.l2_penalty, cfg, "train", "l2_penalty", 1e-4)),
            epochs=int(_pick(args.epochs, cfg, "train", "epochs", 20)),
            seed=int(_pick(args.seed, cfg, "train", "seed", 0)),
            constrain_iob2=constrain,
            batch_size=int(_pick(args.batch_size, cfg, "train", "batch_size", 8)),
            feature_dim=int(_pick(args.feature_dim, cfg, "train", "feature_dim", 2**18)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_train(cfg: RunConfig, args) -> int:
    dataset_path = cfg.path("dataset", args.dataset)
    if dataset_path is not None:
        dataset = dataio.read_dataset(_require_input(dataset_path, "dataset file"))
    else:
        documents = _load_corpus(cfg, args)
        annotations = _load_annotations(cfg, args)
        dataset = dataio.assemble_dataset(documents, annotations, _segmenter_config(cfg, args))
    train_cfg = _train_config(cfg, args)

    def report(epoch: int, objective: float) -> None:
        if not args.quiet:
            print(f"epoch {epoch + 1}/{train_cfg.epochs} objective {objective:.6f}")

    model = crf.train(dataset, train_cfg, epoch_callback=report)
    crf.save_model(model, args.model_out)
    print(
        f"trained on {len(dataset)} sentences, labels {list(model.labels)}, "
        f"saved to {args.model_out}"
    )
    return 0


def cmd_tag(cfg: RunConfig, args) -> int:
    documents = _load_corpus(cfg, args)
    model_path = _require(cfg.path("model", args.model), "model file", "--model")
    model = crf.load_model(_require_input(model_path, "model file"))
    seg = _segmenter_config(cfg, args)
    constrain = args.constrain_iob2
    if constrain is None:
        constrain = bool(cfg.get("train", "constrain_iob2", True))
    predicted: list[spans.Mention] = []
    for doc in documents:
        predicted.extend(crf.tag(model, textseg.split_sentences(doc, seg), constrain))
    spans.write_annotations(args.out, predicted)
    print(f"tagged {len(documents)} documents, {len(predicted)} mentions, wrote {args.out}")
    return 0


def cmd_build_kb(cfg: RunConfig, args) -> int:
    sources: list[tuple] = []
    gaz_path = cfg.path("gazetteer", args.gazetteer)
    if gaz_path is not None:
        sources.append(
            (kb_mod.read_gazetteer(_require_input(gaz_path, "gazetteer")), "gazetteer")
        )
    ann_path = cfg.path("annotations", args.annotations)
    if ann_path is not None:
        mentions = spans.read_annotations(_require_input(ann_path, "annotation file"))
        pairs = [(m.text, m.code if m.code is not None else spans.NO_CODE) for m in mentions]
        sources.append((pairs, "train"))
    lex_path = cfg.path("lexicon", args.lexicon)
    if lex_path is not None:
        lexicon = augment_mod.read_lexicon(_require_input(lex_path, "synonym lexicon"))
        pairs = [
            (synonym, code)
            for code in sorted(lexicon.entries)
            for synonym in lexicon.entries[code]
        ]
        sources.append((pairs, "umls"))
    if not sources:
        raise ConfigError("build-kb needs at least one of --gazetteer/--annotations/--lexicon")

    base = kb_mod.build(sources)
    print(f"built KB with {len(base)} records, {len(base.code_alias_count)} codes")
    result = base
    if args.augment_rare:
        try:
            aug_cfg = kb_mod.KbAugmentConfig(
                rarity_threshold=int(
                    _pick(args.rarity_threshold, cfg, "kb_augment", "rarity_threshold", 5)
                ),
                generated_per_concept=int(
                    _pick(
                        args.generated_per_concept,
                        cfg, "kb_augment", "generated_per_concept", 5,
                    )
                ),
                seed=int(_pick(args.seed, cfg, "kb_augment", "seed", 0)),
                edit_ops=tuple(
                    cfg.get("kb_augment", "edit_ops", ["insert_char", "delete_char"])
                ),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        result = kb_mod.augment_rare(base, aug_cfg)
        print(f"augmentation added {len(result) - len(base)} records")
    kb_mod.write_kb(result, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_embed(cfg: RunConfig, args) -> int:
    kb_path = _require(cfg.path("kb", args.kb), "KB dump", "--kb")
    base = kb_mod.read_kb(_require_input(kb_path, "KB dump"))
    embedder = _embedder(cfg, args)
    texts = [r.normalized_surface for r in base.records]
    batch = int(_pick(args.batch_size, cfg, "embed", "batch_size", 512))
    if batch < 1:
        raise ConfigError("embed.batch_size must be >= 1")
    chunks = [
        np.asarray(embedder.embed(texts[i : i + batch]), dtype=float)
        for i in range(0, len(texts), batch)
    ]
    if chunks:
        vectors = np.vstack(chunks)
        dim = vectors.shape[1]
    else:
        dim = getattr(embedder, "dim", None) or 256
        vectors = np.zeros((0, dim))
    store = linker.EmbeddingStore(dim, vectors, embedder.provider_id)
    linker.save_store(store, args.out)
    if args.tsv:
        linker.write_store_tsv(store, args.tsv)
    print(f"embedded {len(store)} aliases (dim {store.dim}) via {store.provider_id}, wrote {args.out}")
    return 0


def _load_kb_and_store(cfg: RunConfig, args) -> tuple[kb_mod.KnowledgeBase, linker.EmbeddingStore]:
    kb_path = _require(cfg.path("kb", args.kb), "KB dump", "--kb")
    base = kb_mod.read_kb(_require_input(kb_path, "KB dump"))
    emb_path = _require(cfg.path("embeddings", args.embeddings), "embedding file", "--embeddings")
    store = linker.load_store(_require_input(emb_path, "embedding file"))
    return base, store


def cmd_link(cfg: RunConfig, args) -> int:
    base, store = _load_kb_and_store(cfg, args)
    mentions = _load_annotations(cfg, args, "mentions")
    link_cfg = _linker_config(cfg, args)
    # an unspecified stub dim follows the loaded store
    embedder = _embedder(cfg, args, default_dim=store.dim)
    predictions = linker.link_batch(mentions, base, store, embedder, link_cfg)
    linked = [
        spans.Mention(p.mention.doc_id, p.mention.start, p.mention.end, p.mention.text,
                      p.mention.entity_type, p.code)
        for p in predictions
    ]
    spans.write_annotations(
        args.out,
        linked,
        with_code=True,
        extra_columns={
            "method": [p.method for p in predictions],
            "score": [f"{p.score:.9g}" for p in predictions],
        },
    )
    counts: dict[str, int] = {}
    for p in predictions:
        counts[p.method] = counts.get(p.method, 0) + 1
    summary = ", ".join(f"{m}={counts[m]}" for m in sorted(counts)) or "none"
    print(f"linked {len(predictions)} mentions ({summary}), wrote {args.out}")
    return 0


def cmd_gridsearch(cfg: RunConfig, args) -> int:
    base, store = _load_kb_and_store(cfg, args)
    mentions = _load_annotations(cfg, args, "validation")
    pairs = [(m, m.code if m.code is not None else spans.NO_CODE) for m in mentions]
    fraction = float(_pick(args.window_fraction, cfg, "linker", "window_fraction", 0.75))
    weights, accuracy = linker.grid_search_weights(
        pairs, base, store, _embedder(cfg, args, default_dim=store.dim),
        step=args.step, window_fraction=fraction,
    )
    print(
        f"best weights w_full={weights.w_full:.4g} w_first={weights.w_first:.4g} "
        f"w_last={weights.w_last:.4g} accuracy={accuracy:.3f}"
    )
    if args.out:
        Path(args.out).write_text(
            "w_full\tw_first\tw_last\twindow_fraction\taccuracy\n"
            f"{weights.w_full:.9g}\t{weights.w_first:.9g}\t{weights.w_last:.9g}"
            f"\t{weights.window_fraction:.9g}\t{accuracy:.9g}\n",
            encoding="utf-8",
        )
        print(f"wrote {args.out}")
    return 0


def cmd_eval_ner(cfg: RunConfig, args) -> int:
    gold = spans.read_annotations(_require_input(Path(args.gold), "gold annotations"))
    predicted = spans.read_annotations(_require_input(Path(args.pred), "predicted annotations"))
    m = metrics.ner_metrics(gold, predicted)
    print(f"tp {m.tp}  fp {m.fp}  fn {m.fn}")
    if m.duplicate_predictions_removed:
        print(f"duplicate predictions removed: {m.duplicate_predictions_removed}")
    print(f"precision {m.precision:.3f}")
    print(f"recall {m.recall:.3f}")
    print(f"f1 {m.f1:.3f}")
    return 0


def _read_link_predictions(path: Path) -> list[linker.LinkPrediction]:
    """Rebuild predictions from a linked annotation file.

    Uses the optional method/score columns when present; otherwise scores
    default to 0 and the method to cosine (exact when the convention's
    score column says 1).
    """
    mentions = spans.read_annotations(path)
    methods: dict[tuple, tuple[str, float]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader)
        cols = {name: i for i, name in enumerate(header)}
        if "method" in cols:
            for row in reader:
                if not row or all(not c for c in row):
                    continue
                key = (row[cols["filename"]], int(row[cols["start_span"]]),
                       int(row[cols["end_span"]]), row[cols["label"]])
                score = float(row[cols["score"]]) if "score" in cols and row[cols["score"]] else 0.0
                methods[key] = (row[cols["method"]], score)
    out = []
    for m in mentions:
        method, score = methods.get(m.key(), ("cosine", 0.0))
        if method == "exact":
            score = 1.0
        out.append(
            linker.LinkPrediction(
                mention=m,
                code=m.code if m.code is not None else spans.NO_CODE,
                score=score,
                matched_alias="",
                method=method,
            )
        )
    return out


def cmd_eval_el(cfg: RunConfig, args) -> int:
    gold_mentions = spans.read_annotations(_require_input(Path(args.gold), "gold annotations"))
    gold = [(m, m.code) for m in gold_mentions]
    predictions = _read_link_predictions(_require_input(Path(args.pred), "predicted annotations"))
    report = metrics.linking_accuracy(gold, predictions, include_no_code=args.include_no_code)
    for line in report.lines():
        print(line)
    return 0


# --- argument parsing ------------------------------------------------------------


def _add_segmenter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-tokens", type=int, dest="max_tokens", default=None,
                   help="token budget per sentence before chunking")
    p.add_argument("--abbreviations", default=None,
                   help="file with one abbreviation per line")


def _add_linker_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sliding-window", dest="sliding_window", action="store_true",
                   default=None, help="combine full/first/last mention views")
    p.add_argument("--w-full", type=float, dest="w_full", default=None)
    p.add_argument("--w-first", type=float, dest="w_first", default=None)
    p.add_argument("--w-last", type=float, dest="w_last", default=None)
    p.add_argument("--window-fraction", type=float, dest="window_fraction", default=None)
    p.add_argument("--abstain-threshold", type=float, dest="abstain_threshold", default=None)
    p.add_argument("--top-k", type=int, dest="top_k", default=None)


def _add_embedder_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--provider", choices=["stub", "service"], default=None)
    p.add_argument("--dim", type=int, default=None, help="stub embedder dimension")
    p.add_argument("--url", default=None,
                   help=f"embedding service base url (or ${ENV_EMBED_URL})")
    p.add_argument("--batch-size", type=int, dest="batch_size", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sintoma",
        description="Symptom mention recognition and concept linking pipeline.",
    )
    parser.add_argument("--config", default=None, help="TOML run configuration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="segment a corpus into sentences")
    p.add_argument("--corpus", default=None)
    p.add_argument("--out", required=True)
    _add_segmenter_flags(p)
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("stats", help="corpus and annotation statistics")
    p.add_argument("--corpus", default=None)
    p.add_argument("--annotations", default=None)
    _add_segmenter_flags(p)
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("augment", help="synonym-replacement training augmentation")
    p.add_argument("--corpus", default=None)
    p.add_argument("--annotations", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--probability", type=float, default=None)
    p.add_argument("--max-new", type=int, dest="max_new", default=None)
    p.add_argument("--seed", type=int, default=None)
    _add_segmenter_flags(p)
    p.set_defaults(handler=cmd_augment)

    p = sub.add_parser("train", help="train the CRF tagger")
    p.add_argument("--dataset", default=None, help="JSONL dataset (e.g. augment output)")
    p.add_argument("--corpus", default=None)
    p.add_argument("--annotations", default=None)
    p.add_argument("--model-out", dest="model_out", required=True)
    p.add_argument("--learning-rate", type=float, dest="learning_rate", default=None)
    p.add_argument("--l2-penalty", type=float, dest="l2_penalty", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--batch-size", type=int, dest="batch_size", default=None)
    p.add_argument("--feature-dim", type=int, dest="feature_dim", default=None)
    p.add_argument("--constrain-iob2", dest="constrain_iob2", action="store_true", default=None)
    p.add_argument("--no-constrain-iob2", dest="constrain_iob2", action="store_false")
    p.add_argument("--quiet", action="store_true")
    _add_segmenter_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("tag", help="predict mentions with a trained model")
    p.add_argument("--corpus", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--constrain-iob2", dest="constrain_iob2", action="store_true", default=None)
    p.add_argument("--no-constrain-iob2", dest="constrain_iob2", action="store_false")
    _add_segmenter_flags(p)
    p.set_defaults(handler=cmd_tag)

    p = sub.add_parser("build-kb", help="assemble the alias knowledge base")
    p.add_argument("--gazetteer", default=None)
    p.add_argument("--annotations", default=None, help="training annotations as alias source")
    p.add_argument("--lexicon", default=None, help="synonym lexicon as alias source")
    p.add_argument("--out", required=True)
    p.add_argument("--augment-rare", dest="augment_rare", action="store_true")
    p.add_argument("--rarity-threshold", type=int, dest="rarity_threshold", default=None)
    p.add_argument("--generated-per-concept", type=int, dest="generated_per_concept",
                   default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=cmd_build_kb)

    p = sub.add_parser("embed", help="embed KB aliases to a vector file")
    p.add_argument("--kb", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--tsv", default=None, help="also write a human-readable dump")
    _add_embedder_flags(p)
    p.set_defaults(handler=cmd_embed)

    p = sub.add_parser("link", help="link mentions to concept codes")
    p.add_argument("--kb", default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--mentions", default=None, help="annotation file to link")
    p.add_argument("--out", required=True)
    _add_linker_flags(p)
    _add_embedder_flags(p)
    p.set_defaults(handler=cmd_link)

    p = sub.add_parser("gridsearch", help="grid-search sliding-window weights")
    p.add_argument("--kb", default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--validation", default=None, help="annotation file with gold codes")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--window-fraction", type=float, dest="window_fraction", default=None)
    p.add_argument("--out", default=None)
    _add_embedder_flags(p)
    p.set_defaults(handler=cmd_gridsearch)

    p = sub.add_parser("eval-ner", help="strict-span NER metrics")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.set_defaults(handler=cmd_eval_ner)

    p = sub.add_parser("eval-el", help="entity-linking accuracy")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--include-no-code", dest="include_no_code", action="store_true",
                   default=True)
    p.add_argument("--exclude-no-code", dest="include_no_code", action="store_false")
    p.set_defaults(handler=cmd_eval_el)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        return args.handler(cfg, args)
    except ConfigError as exc:
        print(f"sintoma: config error: {exc}", file=sys.stderr)
        return 2
    except SintomaError as exc:
        print(f"sintoma: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"sintoma: i/o error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
