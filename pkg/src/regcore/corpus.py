"""Register-annotated corpora: parsing, validation, label handling, statistics.

Corpus file layout (the documented interchange format): UTF-8 text, one
document per line, exactly two tab-separated fields::

    LABELS<TAB>TEXT

``LABELS`` is a space-separated list of register codes and may be empty
(a document the annotators assigned no register). Document ids either come
from a sidecar file (one id per line) or are synthesized as
``<language>-<line_number>``.

Additional on-disk layouts can be plugged in with :func:`register_format`.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable

from .taxonomy import Taxonomy, TaxonomyError, default_taxonomy

SUPPORTED_LANGUAGES = ("en", "fi", "fr", "sv")

HYBRIDS_BUCKET = "Hybrids"
EMPTY_BUCKET = "Empty"
ALL_BUCKET = "All"


class CorpusParseError(ValueError):
    """Malformed corpus input; carries the 1-based line number."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class LabelValidationError(ValueError):
    """An unknown or out-of-place register code."""


@dataclass(eq=True)
class Document:
    """One web text with a language tag and a possibly-empty label set."""

    id: str
    language: str
    text: str
    labels: frozenset[str]

    @cached_property
    def tokens(self) -> list[str]:
        # Token = maximal run of non-whitespace characters; used for length
        # statistics and shingling.
        return self.text.split()

    @property
    def is_hybrid(self) -> bool:
        return len(self.labels) >= 2

    @property
    def is_empty_label(self) -> bool:
        return len(self.labels) == 0


@dataclass(eq=True)
class Corpus:
    language: str
    documents: list[Document]

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def doc_ids(self) -> list[str]:
        return [d.id for d in self.documents]


def parse_labels(
    labels_field: str, taxonomy: Taxonomy, lineno: int | None = None
) -> frozenset[str]:
    codes = labels_field.split()
    for code in codes:
        if not taxonomy.is_valid(code):
            raise LabelValidationError(
                f"unknown register code {code!r}"
                + (f" on line {lineno}" if lineno is not None else "")
            )
    return frozenset(codes)


def format_labels(labels: frozenset[str], taxonomy: Taxonomy) -> str:
    return " ".join(sorted(labels, key=taxonomy.sort_key))


def collapse_to_main(labels: Iterable[str], taxonomy: Taxonomy) -> frozenset[str]:
    """Replace every sub-register by its main register (idempotent)."""
    return frozenset(taxonomy.main_of(code) for code in labels)


def collapse_corpus(corpus: Corpus, taxonomy: Taxonomy | None = None) -> Corpus:
    taxonomy = taxonomy or default_taxonomy()
    docs = [
        Document(d.id, d.language, d.text, collapse_to_main(d.labels, taxonomy))
        for d in corpus.documents
    ]
    return Corpus(corpus.language, docs)


# --- pluggable on-disk formats -------------------------------------------

FormatParser = Callable[[Iterable[str], str, Taxonomy, "list[str] | None"], list[Document]]

_FORMATS: dict[str, FormatParser] = {}


def register_format(name: str, parser: FormatParser) -> None:
    """Adapter hook for corpus layouts other than the documented TSV one."""
    _FORMATS[name] = parser


def corpus_formats() -> tuple[str, ...]:
    return tuple(sorted(_FORMATS))


def _parse_tsv(
    lines: Iterable[str], language: str, taxonomy: Taxonomy, ids: list[str] | None
) -> list[Document]:
    docs: list[Document] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        fields = line.split("\t")
        if len(fields) != 2:
            raise CorpusParseError(
                f"expected 2 tab-separated fields, found {len(fields)}", lineno
            )
        labels_field, text = fields
        labels = parse_labels(labels_field, taxonomy, lineno)
        if ids is not None and lineno - 1 >= len(ids):
            raise CorpusParseError("id sidecar has fewer entries than documents", lineno)
        doc_id = ids[lineno - 1] if ids is not None else f"{language}-{lineno}"
        docs.append(Document(id=doc_id, language=language, text=text, labels=labels))
    return docs


register_format("tsv", _parse_tsv)


def _as_text_lines(source) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8").splitlines()
    if isinstance(source, bytes):
        return source.decode("utf-8").splitlines()
    if isinstance(source, io.TextIOBase):
        return source
    # binary file-like
    return io.TextIOWrapper(source, encoding="utf-8")


def parse_corpus(
    source,
    language: str,
    fmt: str = "tsv",
    taxonomy: Taxonomy | None = None,
    ids=None,
) -> Corpus:
    """Parse a corpus file (path, bytes, or file object) into a :class:`Corpus`.

    ``ids`` may be a sequence of document ids or the path of a sidecar file
    with one id per line; omitted, ids are synthesized from the line number.
    """
    taxonomy = taxonomy or default_taxonomy()
    try:
        parser = _FORMATS[fmt]
    except KeyError:
        raise CorpusParseError(
            f"unknown corpus format {fmt!r}; registered: {corpus_formats()}"
        ) from None
    id_list: list[str] | None = None
    if ids is not None:
        if isinstance(ids, (str, Path)):
            id_list = Path(ids).read_text(encoding="utf-8").splitlines()
        else:
            id_list = list(ids)
    docs = parser(_as_text_lines(source), language, taxonomy, id_list)
    if id_list is not None and len(id_list) != len(docs):
        raise CorpusParseError(
            f"id sidecar has {len(id_list)} entries for {len(docs)} documents"
        )
    seen: set[str] = set()
    for doc in docs:
        if doc.id in seen:
            raise CorpusParseError(f"duplicate document id {doc.id!r}")
        seen.add(doc.id)
    return Corpus(language=language, documents=docs)


def serialize_corpus(corpus: Corpus, path, taxonomy: Taxonomy | None = None, ids_path=None) -> None:
    """Write a corpus in the TSV layout; inverse of :func:`parse_corpus`.

    Texts must not contain tabs or newlines (the layout cannot represent
    them); violating documents raise ``ValueError``.
    """
    taxonomy = taxonomy or default_taxonomy()
    lines = []
    for doc in corpus.documents:
        if "\t" in doc.text or "\n" in doc.text or "\r" in doc.text:
            raise ValueError(f"document {doc.id!r}: text contains tab/newline")
        lines.append(f"{format_labels(doc.labels, taxonomy)}\t{doc.text}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")
    if ids_path is not None:
        Path(ids_path).write_text(
            "".join(f"{doc.id}\n" for doc in corpus.documents), encoding="utf-8"
        )


# --- statistics -----------------------------------------------------------


@dataclass(frozen=True)
class CategoryStats:
    name: str
    count: int
    proportion: float
    mean_tokens: float | None
    std_tokens: float | None


@dataclass(frozen=True)
class StatsReport:
    """Document counts, proportions, and token-length moments per category.

    Categories are the 8 main registers (single-label documents only),
    ``Hybrids`` (two or more labels), and ``Empty`` (no label); they
    partition the corpus, so proportions sum to 1.
    """

    total: int
    categories: tuple[CategoryStats, ...]
    overall: CategoryStats

    def category(self, name: str) -> CategoryStats:
        for cat in self.categories:
            if cat.name == name:
                return cat
        raise KeyError(name)

    def as_tsv_rows(self) -> list[tuple[str, ...]]:
        rows = [("category", "count", "proportion", "mean_tokens", "std_tokens")]
        for cat in (*self.categories, self.overall):
            rows.append(
                (
                    cat.name,
                    str(cat.count),
                    f"{cat.proportion:.6f}",
                    "" if cat.mean_tokens is None else f"{cat.mean_tokens:.2f}",
                    "" if cat.std_tokens is None else f"{cat.std_tokens:.2f}",
                )
            )
        return rows

    def as_text(self) -> str:
        out = [f"{'category':<10}{'count':>8}{'%':>9}{'mean len':>11}{'std len':>11}"]
        for cat in (*self.categories, self.overall):
            mean = "-" if cat.mean_tokens is None else f"{cat.mean_tokens:.0f}"
            std = "-" if cat.std_tokens is None else f"{cat.std_tokens:.0f}"
            out.append(
                f"{cat.name:<10}{cat.count:>8}{100 * cat.proportion:>8.2f}%{mean:>11}{std:>11}"
            )
        return "\n".join(out)


def bucket_of(labels: frozenset[str], taxonomy: Taxonomy) -> str:
    """Statistics bucket for a main-level label set."""
    for code in labels:
        if not taxonomy.is_main(code):
            raise LabelValidationError(
                f"labels must be collapsed to main level, got {code!r}"
            )
    if len(labels) == 0:
        return EMPTY_BUCKET
    if len(labels) >= 2:
        return HYBRIDS_BUCKET
    return next(iter(labels))


def _moments(lengths: list[int]) -> tuple[float | None, float | None]:
    if not lengths:
        return None, None
    n = len(lengths)
    mean = sum(lengths) / n
    var = sum((x - mean) ** 2 for x in lengths) / n  # population variance
    return mean, math.sqrt(var)


def corpus_stats(corpus: Corpus, taxonomy: Taxonomy | None = None) -> StatsReport:
    """Per-category distribution and token-length statistics.

    Expects main-level labels (run :func:`collapse_corpus` first if the
    corpus still carries sub-register codes).
    """
    taxonomy = taxonomy or default_taxonomy()
    if len(corpus.documents) == 0:
        raise ValueError("cannot compute statistics of an empty corpus")
    names = [*taxonomy.label_order, HYBRIDS_BUCKET, EMPTY_BUCKET]
    lengths: dict[str, list[int]] = {name: [] for name in names}
    all_lengths: list[int] = []
    for doc in corpus.documents:
        n_tokens = len(doc.tokens)
        lengths[bucket_of(doc.labels, taxonomy)].append(n_tokens)
        all_lengths.append(n_tokens)
    total = len(corpus.documents)
    categories = []
    for name in names:
        bucket = lengths[name]
        mean, std = _moments(bucket)
        categories.append(
            CategoryStats(
                name=name,
                count=len(bucket),
                proportion=len(bucket) / total,
                mean_tokens=mean,
                std_tokens=std,
            )
        )
    mean, std = _moments(all_lengths)
    overall = CategoryStats(ALL_BUCKET, total, 1.0, mean, std)
    return StatsReport(total=total, categories=tuple(categories), overall=overall)


def iaa_f1(
    annotation_a: list[frozenset[str]], annotation_b: list[frozenset[str]]
) -> float:
    """Inter-annotator agreement as micro-averaged F1 over label sets.

    Symmetric in its arguments: micro-F1 depends only on the matched-label
    count and the two total label counts.
    """
    from .evaluation import micro_f1

    return micro_f1(annotation_a, annotation_b)
