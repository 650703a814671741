"""Multilingual web-register corpus tooling and a cross-lingual CNN classifier.

Subpackages and modules:

* :mod:`regcore.taxonomy` -- the register taxonomy (8 main registers plus
  sub-registers) and its canonical label order.
* :mod:`regcore.corpus` -- corpus file parsing, label handling, statistics.
* :mod:`regcore.dedup` -- n-gram overlap deduplication.
* :mod:`regcore.splits` -- deterministic stratified splitting and subsampling.
* :mod:`regcore.embeddings` -- aligned word-vector tables and doc encoding.
* :mod:`regcore.cnn` -- the multi-label CNN classifier (compiled inner loop
  with a NumPy fallback).
* :mod:`regcore.evaluation` -- multi-label metrics, confusion matrices,
  multi-run aggregation.
* :mod:`regcore.runner` -- experiment orchestration (grid search, seeded
  repetitions, learning curves, external-prediction evaluation).
* :mod:`regcore.cli` -- the ``regcore`` command line interface.
"""

__version__ = "0.1.0"
