#!/usr/bin/env python3
"""Generate the synthetic Spanish mini-corpus fixture.

Produces a 20-document corpus with gold annotations, a gazetteer, and a
synonym lexicon under fixtures/minicorpus/. Every byte is a pure
function of the seed, so regenerating the fixture never dirties the
repository. Offsets are tracked during construction and re-verified
against the rendered text before anything is written.

Run from the repository root after installing the package:

    python3 scripts/gen_minicorpus.py
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from sintoma.spans import NO_CODE, Mention, write_annotations

SEED = 20240816

# code, surfaces usable inside sentences, gazetteer aliases, synonym lexicon entries
CONCEPTS = [
    ("386661006", ["fiebre", "fiebre alta", "febrícula"],
     ["fiebre", "fiebre alta", "hipertermia"], ["pirexia"]),
    ("49727002", ["tos seca", "tos persistente", "tos"],
     ["tos", "tos seca", "tos nocturna"], ["tos irritativa"]),
    ("29857009", ["dolor torácico", "dolor torácico opresivo"],
     ["dolor torácico", "dolor precordial"], ["dolor en el pecho"]),
    ("25064002", ["cefalea", "cefalea intensa", "dolor de cabeza"],
     ["cefalea", "dolor de cabeza"], ["cefalalgia"]),
    ("267036007", ["disnea", "dificultad respiratoria"],
     ["disnea", "dificultad para respirar"], ["falta de aire"]),
    ("422587007", ["náuseas"], ["náuseas", "nauseas"], ["ganas de vomitar"]),
    ("422400008", ["vómitos"], ["vómitos", "vomitos"], ["emesis"]),
    ("62315008", ["diarrea", "deposiciones líquidas"], ["diarrea"],
     ["deposiciones blandas"]),
    ("68962001", ["mialgias", "dolor muscular"],
     ["mialgia", "mialgias", "dolor muscular"], ["dolores musculares"]),
    ("57676002", ["artralgias"], ["artralgia", "artralgias"], ["dolor articular"]),
    ("271807003", ["exantema", "erupción cutánea"],
     ["exantema", "erupcion cutanea"], ["rash cutáneo"]),
    ("84229001", ["astenia", "cansancio"], ["astenia"], ["fatiga"]),
    ("404640003", ["mareo", "inestabilidad"], ["mareo", "mareos"],
     ["sensación de mareo"]),
    ("79890006", ["pérdida de apetito", "hiporexia"],
     ["anorexia", "perdida de apetito", "hiporexia"], ["falta de apetito"]),
    ("162397003", ["odinofagia", "dolor de garganta"], ["odinofagia"],
     ["dolor al tragar"]),
]

OPENINGS = [
    "Paciente de {age} años que acude por {m}.",
    "Varón de {age} años que consulta por {m}.",
    "Mujer de {age} años que refiere {m} de tres días de evolución.",
    "Paciente de {age} años derivado por {m}.",
]

MIDDLES = [
    "A la exploración presenta {m}.",
    "Refiere además {m} desde hace una semana.",
    "Niega {m}.",
    "En la anamnesis destaca {m} ocasional.",
    "Asocia {m} en los últimos días.",
]

ABBREV_MIDDLE = "Valorado por el Dr. Ortega, que objetiva {m}."

CLOSINGS = [
    "Se decide ingreso para estudio.",
    "Alta con tratamiento sintomático.",
    "Pendiente de resultados analíticos.",
    "Se remite a consultas externas.",
]


def fill(template: str, rng, concepts, offset: int, doc_id: str, **fields):
    """Render one sentence, returning its text and the mentions it carries."""
    mentions = []
    out = []
    pos = offset
    rest = template.format(m="{m}", **fields)
    while "{m}" in rest:
        before, rest = rest.split("{m}", 1)
        out.append(before)
        pos += len(before)
        code, surfaces, _, _ = concepts[rng.integers(len(concepts))]
        surface = surfaces[rng.integers(len(surfaces))]
        mentions.append(Mention(doc_id, pos, pos + len(surface), surface, code=code))
        out.append(surface)
        pos += len(surface)
    out.append(rest)
    return "".join(out), mentions


def build_document(index: int, rng):
    doc_id = f"caso-{index + 1:03d}"
    sentences = [OPENINGS[rng.integers(len(OPENINGS))]]
    n_middle = int(rng.integers(1, 4))
    for _ in range(n_middle):
        sentences.append(MIDDLES[rng.integers(len(MIDDLES))])
    if index == 1:
        sentences.insert(1, ABBREV_MIDDLE)
    sentences.append(CLOSINGS[rng.integers(len(CLOSINGS))])

    text = ""
    mentions = []
    age = int(rng.integers(18, 95))
    for i, template in enumerate(sentences):
        if i:
            text += " "
        rendered, found = fill(template, rng, CONCEPTS, len(text), doc_id, age=age)
        text += rendered
        mentions.extend(found)

    if index == 3:
        # one nested pair: the inner span duplicates the head of an outer one
        outer = next(m for m in mentions if " " in m.text)
        head = outer.text.split(" ")[0]
        mentions.append(
            Mention(doc_id, outer.start, outer.start + len(head), head, code=outer.code)
        )
    if index == 6:
        # one mention the terminology does not cover
        surface = "molestias inespecíficas"
        extra = f" Presenta {surface} desde el ingreso."
        start = len(text) + len(" Presenta ")
        mentions.append(
            Mention(doc_id, start, start + len(surface), surface, code=NO_CODE)
        )
        text += extra
    return doc_id, text, mentions


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parent.parent / "fixtures" / "minicorpus"),
    )
    args = parser.parse_args()
    root = Path(args.out)
    corpus_dir = root / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.Generator(np.random.PCG64(SEED))
    all_mentions = []
    for index in range(20):
        doc_id, text, mentions = build_document(index, rng)
        for m in mentions:
            assert text[m.start : m.end] == m.text, (doc_id, m)
        (corpus_dir / f"{doc_id}.txt").write_text(text, encoding="utf-8")
        all_mentions.extend(mentions)

    write_annotations(root / "annotations.tsv", all_mentions, with_code=True)

    gaz_lines = ["code\tterm"]
    for code, _, aliases, _ in CONCEPTS:
        for alias in aliases:
            gaz_lines.append(f"{code}\t{alias}")
    (root / "gazetteer.tsv").write_text("\n".join(gaz_lines) + "\n", encoding="utf-8")

    lex_lines = ["code\tsynonym"]
    for code, _, _, synonyms in CONCEPTS:
        for synonym in synonyms:
            lex_lines.append(f"{code}\t{synonym}")
    (root / "lexicon.tsv").write_text("\n".join(lex_lines) + "\n", encoding="utf-8")

    print(f"wrote 20 documents, {len(all_mentions)} mentions to {root}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
