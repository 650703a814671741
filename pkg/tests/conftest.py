import numpy as np
import pytest

from regcore.corpus import Corpus, Document
from regcore.embeddings import EmbeddingTable
from regcore.taxonomy import MAIN_ORDER, default_taxonomy


@pytest.fixture(scope="session")
def taxonomy():
    return default_taxonomy()


def make_doc(doc_id, labels, text="alpha beta gamma", lang="xx"):
    return Document(id=doc_id, language=lang, text=text, labels=frozenset(labels))


def make_corpus(spec, lang="xx"):
    """spec: list of (labels, text) or (labels, text, id) tuples."""
    docs = []
    for i, entry in enumerate(spec):
        labels, text = entry[0], entry[1]
        doc_id = entry[2] if len(entry) > 2 else f"{lang}-{i + 1}"
        docs.append(make_doc(doc_id, labels, text, lang))
    return Corpus(documents=docs, language=lang)


@pytest.fixture
def tiny_corpus():
    return make_corpus([
        ({"NA"}, "one two three"),
        ({"IN", "OP"}, "four five six seven"),
        (set(), "eight nine"),
        ({"SP"}, "ten"),
    ])


def random_table(rng, n_words=30, dim=8, lang="xx"):
    matrix = rng.normal(size=(n_words + 2, dim)).astype(np.float32)
    matrix[0] = 0.0
    matrix[1] = 0.0
    vocab = {f"w{i}": i + 2 for i in range(n_words)}
    return EmbeddingTable(language=lang, dim=dim, vocab=vocab, matrix=matrix)


def random_label_sets(rng, n, max_size=3):
    out = []
    for _ in range(n):
        size = int(rng.integers(0, max_size + 1))
        if size == 0:
            out.append(frozenset())
        else:
            picks = rng.choice(len(MAIN_ORDER), size=size, replace=False)
            out.append(frozenset(MAIN_ORDER[int(p)] for p in picks))
    return out
