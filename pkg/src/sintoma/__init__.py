"""Symptom mention recognition and concept linking for Spanish clinical text.

Two pipelines share this package:

* NER: sentence splitting and tokenization with exact character offsets,
  IOB2 tag encoding, and a linear-chain CRF over hashed token features.
* Linking: exact dictionary match against an alias knowledge base, then
  cosine-similarity search over alias embeddings with optional
  sliding-window score combination.

Shared-task style evaluation (strict-span micro P/R/F1, linking accuracy)
and a CLI tying the stages together live in :mod:`sintoma.metrics` and
:mod:`sintoma.cli`.
"""

__version__ = "0.1.0"
