"""Deterministic stratified train/dev/test splitting and train subsampling.

Stratification is by the exact label combination: every distinct label set
(hybrids included, the empty set as its own stratum) forms one stratum, so
each part preserves the corpus-level proportion of every combination as
closely as integer counts allow. Within a stratum, documents are shuffled
with a seed-derived RNG and apportioned to the parts by largest remainder
(ties broken in part order: train, dev, test).
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .corpus import Corpus

PART_ORDER = ("train", "dev", "test")
DEFAULT_RATIOS = (0.5, 0.2, 0.3)

EMPTY_STRATUM_KEY = "∅"


@dataclass
class SplitAssignment:
    parts: dict[str, str]  # doc id -> part name
    seed: int
    ratios: tuple[float, ...]

    def ids_of(self, part: str) -> list[str]:
        return [doc_id for doc_id, p in self.parts.items() if p == part]

    def write_tsv(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("id\tpart\n")
            for doc_id, part in self.parts.items():
                fh.write(f"{doc_id}\t{part}\n")

    @classmethod
    def read_tsv(cls, path, seed: int = -1, ratios=()) -> "SplitAssignment":
        parts = {}
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        for line in lines[1:]:
            doc_id, part = line.split("\t")
            parts[doc_id] = part
        return cls(parts=parts, seed=seed, ratios=tuple(ratios))


def stratum_key(labels: frozenset[str]) -> str:
    """Stratification key: sorted codes joined, the empty-set symbol alone."""
    if not labels:
        return EMPTY_STRATUM_KEY
    return "+".join(sorted(labels))


def _stratum_rng(seed: int, key: str, salt: str = "") -> random.Random:
    # Independent, platform-stable stream per (seed, stratum); Python's
    # builtin hash() is salted per process, so derive from a digest instead.
    digest = hashlib.sha256(f"{salt}|{seed}|{key}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _exact_fractions(ratios) -> list[Fraction]:
    if any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be positive, got {tuple(ratios)}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {tuple(ratios)}")
    fracs = [Fraction(r).limit_denominator(10**9) for r in ratios]
    total = sum(fracs)
    return [f / total for f in fracs]


def largest_remainder(total: int, fractions: list[Fraction]) -> list[int]:
    """Apportion ``total`` into integer counts proportional to ``fractions``.

    Remaining units go to the largest fractional parts; ties break toward
    the earlier position.
    """
    quotas = [total * f for f in fractions]
    counts = [int(q) for q in quotas]  # floor (quotas are nonnegative)
    remainders = [q - c for q, c in zip(quotas, counts)]
    leftover = total - sum(counts)
    order = sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def stratified_split(
    corpus: Corpus, ratios=DEFAULT_RATIOS, seed: int = 0
) -> SplitAssignment:
    """Partition the corpus into train/dev/test; deterministic per seed."""
    if len(corpus.documents) == 0:
        raise ValueError("cannot split an empty corpus")
    if len(ratios) != len(PART_ORDER):
        raise ValueError(f"expected {len(PART_ORDER)} ratios, got {len(ratios)}")
    fracs = _exact_fractions(ratios)
    strata: dict[str, list[str]] = {}
    for doc in corpus.documents:
        strata.setdefault(stratum_key(doc.labels), []).append(doc.id)
    parts: dict[str, str] = {}
    for key in sorted(strata):
        ids = list(strata[key])
        _stratum_rng(seed, key, salt="split").shuffle(ids)
        counts = largest_remainder(len(ids), fracs)
        pos = 0
        for part, count in zip(PART_ORDER, counts):
            for doc_id in ids[pos : pos + count]:
                parts[doc_id] = part
            pos += count
    # report assignments in corpus order
    ordered = {doc.id: parts[doc.id] for doc in corpus.documents}
    return SplitAssignment(parts=ordered, seed=seed, ratios=tuple(ratios))


def apply_assignment(
    corpus: Corpus, assignment: SplitAssignment
) -> dict[str, Corpus]:
    """Materialize the three parts, preserving corpus document order."""
    buckets: dict[str, list] = {part: [] for part in PART_ORDER}
    for doc in corpus.documents:
        part = assignment.parts.get(doc.id)
        if part is None:
            raise ValueError(f"document {doc.id!r} missing from assignment")
        buckets[part].append(doc)
    return {part: Corpus(corpus.language, docs) for part, docs in buckets.items()}


def _subsample_ids(
    ids_by_stratum: dict[str, list[str]], size: int, seed: int
) -> set[str]:
    total = sum(len(v) for v in ids_by_stratum.values())
    if size > total:
        raise ValueError(f"subsample size {size} exceeds available {total} documents")
    keys = sorted(ids_by_stratum)
    shares = [Fraction(len(ids_by_stratum[k]), total) for k in keys]
    counts = largest_remainder(size, shares)
    chosen: set[str] = set()
    for key, count in zip(keys, counts):
        ids = list(ids_by_stratum[key])
        _stratum_rng(seed, key, salt="subsample").shuffle(ids)
        chosen.update(ids[:count])
    return chosen


def subsample_train(
    assignment: SplitAssignment, corpus: Corpus, size: int, seed: int
) -> Corpus:
    """Stratified-proportional subsample of the train part, seeded."""
    train_ids = {i for i, part in assignment.parts.items() if part == "train"}
    by_stratum: dict[str, list[str]] = {}
    for doc in corpus.documents:
        if doc.id in train_ids:
            by_stratum.setdefault(stratum_key(doc.labels), []).append(doc.id)
    chosen = _subsample_ids(by_stratum, size, seed)
    docs = [doc for doc in corpus.documents if doc.id in chosen]
    return Corpus(corpus.language, docs)


def subsample_corpus(corpus: Corpus, size: int, seed: int) -> Corpus:
    """Stratified-proportional subsample of a whole corpus (e.g. a train file)."""
    by_stratum: dict[str, list[str]] = {}
    for doc in corpus.documents:
        by_stratum.setdefault(stratum_key(doc.labels), []).append(doc.id)
    chosen = _subsample_ids(by_stratum, size, seed)
    docs = [doc for doc in corpus.documents if doc.id in chosen]
    return Corpus(corpus.language, docs)
