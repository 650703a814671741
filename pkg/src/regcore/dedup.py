"""Greedy n-gram overlap deduplication over a corpus.

Documents are scanned in corpus order. Each document's token n-grams
(shingles, type counts) are compared against the union of shingles of all
previously kept documents; a document whose overlap ratio reaches the
threshold is dropped, otherwise it is kept and its shingles join the pool.
First-seen documents therefore always win.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus

Shingle = tuple[str, ...]


@dataclass(frozen=True)
class DedupConfig:
    n: int = 5
    threshold: float = 0.7

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n-gram length must be >= 1, got {self.n}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")


@dataclass
class DedupResult:
    kept: Corpus
    removed: list[tuple[str, float]]  # (doc id, overlap ratio)


def shingles(tokens: list[str], n: int) -> set[Shingle]:
    """All contiguous n-token windows of ``tokens`` as a set."""
    if n < 1:
        raise ValueError(f"n-gram length must be >= 1, got {n}")
    return {tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}


def overlap_ratio(doc_shingles: set[Shingle], seen: set[Shingle]) -> float:
    """Fraction of ``doc_shingles`` already in ``seen``; 0.0 for no shingles."""
    if not doc_shingles:
        return 0.0
    hits = sum(1 for s in doc_shingles if s in seen)
    return hits / len(doc_shingles)


def deduplicate(corpus: Corpus, config: DedupConfig | None = None) -> DedupResult:
    """Single deterministic pass in corpus order; see the module docstring.

    Documents shorter than ``n`` tokens have no shingles, get ratio 0, and
    are always kept.
    """
    config = config or DedupConfig()
    seen: set[Shingle] = set()
    kept_docs = []
    removed: list[tuple[str, float]] = []
    for doc in corpus.documents:
        doc_shingles = shingles(doc.tokens, config.n)
        ratio = overlap_ratio(doc_shingles, seen)
        if ratio >= config.threshold:
            removed.append((doc.id, ratio))
        else:
            kept_docs.append(doc)
            seen |= doc_shingles
    return DedupResult(kept=Corpus(corpus.language, kept_docs), removed=removed)


def write_removal_log(path, removed: list[tuple[str, float]]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("id\tratio\n")
        for doc_id, ratio in removed:
            fh.write(f"{doc_id}\t{ratio:.6f}\n")
