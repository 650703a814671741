"""Aligned word-vector tables and document encoding for the CNN.

Vector files are the common plain-text layout: an optional ``<count> <dim>``
header line, then one ``word v1 ... vd`` line per word (ASCII spaces,
``\\n`` line ends, decimal floats). Tables from different languages that
were aligned into one space share their dimensionality, which is what makes
a classifier trained on one language applicable to another.

Row 0 is PAD and row 1 is UNK; both are all-zero so that padding positions
contribute nothing to convolution outputs.
"""

from __future__ import annotations

import hashlib
import io
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PAD_INDEX = 0
UNK_INDEX = 1
RESERVED_ROWS = 2


class VectorFormatError(ValueError):
    """Malformed vector file; carries the 1-based line number when known."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass
class EmbeddingTable:
    language: str
    dim: int
    vocab: dict[str, int] = field(repr=False)  # word -> row index (>= 2)
    matrix: np.ndarray = field(repr=False)  # (|V| + 2, dim) float32
    duplicates_skipped: int = 0

    def __post_init__(self):
        if self.matrix.shape != (len(self.vocab) + RESERVED_ROWS, self.dim):
            raise ValueError(
                f"matrix shape {self.matrix.shape} inconsistent with "
                f"|V|={len(self.vocab)}, dim={self.dim}"
            )

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    def index_of(self, word: str) -> int:
        return self.vocab.get(word, UNK_INDEX)


def _as_lines(source):
    if isinstance(source, (str, Path)):
        return io.open(source, "r", encoding="utf-8")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8")


def load_embeddings(
    source, expected_dim: int | None = None, language: str = ""
) -> EmbeddingTable:
    """Load a plain-text vector file into an :class:`EmbeddingTable`.

    Duplicate words keep their first occurrence (the skip count lands in
    ``duplicates_skipped``). Any row whose width disagrees with the header
    (or the first row, if there is no header) is an error, as is any
    non-numeric component.
    """
    fh = _as_lines(source)
    vocab: dict[str, int] = {}
    rows: list[np.ndarray] = []
    duplicates = 0
    dim: int | None = expected_dim
    header_checked = False
    lineno = 0
    for lineno, raw in enumerate(fh, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        fields = line.split()
        if not header_checked:
            header_checked = True
            if len(fields) == 2:
                try:
                    declared_count, declared_dim = int(fields[0]), int(fields[1])
                except ValueError:
                    pass
                else:
                    if expected_dim is not None and declared_dim != expected_dim:
                        raise VectorFormatError(
                            f"header dimension {declared_dim} != expected {expected_dim}",
                            lineno,
                        )
                    dim = declared_dim
                    continue
        word, values = fields[0], fields[1:]
        if dim is None:
            dim = len(values)
        if len(values) != dim:
            raise VectorFormatError(
                f"expected {dim} components, found {len(values)}", lineno
            )
        try:
            vec = np.array([float(v) for v in values], dtype=np.float32)
        except ValueError as exc:
            raise VectorFormatError(f"non-numeric component ({exc})", lineno) from None
        if word in vocab:
            duplicates += 1
            continue
        vocab[word] = len(rows) + RESERVED_ROWS
        rows.append(vec)
    if dim is None:
        raise VectorFormatError("empty vector file")
    matrix = np.zeros((len(rows) + RESERVED_ROWS, dim), dtype=np.float32)
    if rows:
        matrix[RESERVED_ROWS:] = np.stack(rows)
    return EmbeddingTable(
        language=language,
        dim=dim,
        vocab=vocab,
        matrix=matrix,
        duplicates_skipped=duplicates,
    )


def vector_file_info(path) -> tuple[int, int, str]:
    """(word count, dimension, sha256) of a vector file, for provenance."""
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    table = load_embeddings(path)
    return len(table.vocab), table.dim, digest


def _strip_outer_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip leading/trailing punctuation.

    Word-internal punctuation (apostrophes, hyphens) is preserved; tokens
    that are nothing but punctuation disappear.
    """
    tokens = []
    for raw in text.lower().split():
        token = _strip_outer_punct(raw)
        if token:
            tokens.append(token)
    return tokens


@dataclass
class EncodedDoc:
    indices: np.ndarray  # int32, length <= max_len
    length: int

    def __post_init__(self):
        if self.length != len(self.indices):
            raise ValueError("length field must match the index sequence")


def encode(tokens: list[str], table: EmbeddingTable, max_len: int) -> EncodedDoc:
    """Map tokens to table rows (UNK for out-of-vocabulary), truncating at
    the end so the first ``max_len`` tokens survive."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    kept = tokens[:max_len]
    indices = np.fromiter(
        (table.index_of(t) for t in kept), dtype=np.int32, count=len(kept)
    )
    return EncodedDoc(indices=indices, length=len(kept))


def pad_batch(docs: list[EncodedDoc], min_len: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad a batch with PAD to a common length of at least ``min_len``.

    Returns (indices ``B x P`` int32, lengths ``B`` int64); lengths keep the
    true pre-padding token counts.
    """
    if not docs:
        raise ValueError("empty batch")
    width = max(min_len, max(d.length for d in docs))
    indices = np.full((len(docs), width), PAD_INDEX, dtype=np.int32)
    lengths = np.empty(len(docs), dtype=np.int64)
    for i, doc in enumerate(docs):
        indices[i, : doc.length] = doc.indices
        lengths[i] = doc.length
    return indices, lengths
