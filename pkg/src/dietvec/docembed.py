"""DBOW paragraph vectors: each document vector predicts its own tokens.

Tokens are opaque identifiers (food-word ids for meals, meal-word ids for
diets); word order is ignored.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import sgns
from .nvec import read_nvec, write_nvec
from .textembed import EmbedConfig, EmbeddingError, Vocabulary, build_vocabulary

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TokenDocument:
    doc_id: str
    tokens: tuple[str, ...]


@dataclass
class DocVectorTable:
    doc_ids: list[str]
    vectors: np.ndarray
    vocab: Vocabulary
    output: np.ndarray
    config: EmbedConfig
    excluded: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._index = {d: i for i, d in enumerate(self.doc_ids)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __getitem__(self, doc_id: str) -> np.ndarray:
        return self.vectors[self._index[doc_id]]

    def __len__(self) -> int:
        return len(self.doc_ids)

    def save(self, directory: str | Path) -> None:
        """``docs.nvec`` (document vectors), ``tokens.nvec`` (output matrix) with a counts sidecar."""
        directory = Path(directory)
        write_nvec(directory / "docs.nvec", self.doc_ids, self.vectors)
        write_nvec(directory / "tokens.nvec", self.vocab.tokens, self.output)
        with open(directory / "tokens.nvec.counts", "w", encoding="utf-8", newline="\n") as fh:
            for tok, n in zip(self.vocab.tokens, self.vocab.counts):
                fh.write(f"{tok}\t{int(n)}\n")

    @classmethod
    def load(cls, directory: str | Path, config: EmbedConfig) -> DocVectorTable:
        directory = Path(directory)
        doc_ids, vectors = read_nvec(directory / "docs.nvec")
        tokens, output = read_nvec(directory / "tokens.nvec")
        counts = {}
        with open(directory / "tokens.nvec.counts", encoding="utf-8") as fh:
            for line in fh:
                tok, n = line.rstrip("\n").split("\t")
                counts[tok] = int(n)
        vocab = Vocabulary(tuple(tokens), np.array([counts[t] for t in tokens], dtype=np.int64))
        return cls(doc_ids, vectors, vocab, output, config)


def _as_documents(documents) -> list[TokenDocument]:
    out = []
    for doc in documents:
        if isinstance(doc, TokenDocument):
            out.append(doc)
        else:
            doc_id, tokens = doc
            out.append(TokenDocument(str(doc_id), tuple(str(t) for t in tokens)))
    return out


def train_dbow(documents: Sequence, config: EmbedConfig = EmbedConfig()) -> DocVectorTable:
    """Train one vector per document against a shared token output matrix.

    ``documents`` holds :class:`TokenDocument` objects or ``(doc_id, tokens)``
    pairs.  Documents left with no in-vocabulary token are excluded and listed
    in ``excluded``.
    """
    docs = _as_documents(documents)
    vocab = build_vocabulary((d.tokens for d in docs), config.min_count)
    if len(vocab) == 0:
        raise EmbeddingError("no trainable tokens")
    index = vocab.index
    kept, encoded, excluded = [], [], []
    for doc in docs:
        ids = [index[t] for t in doc.tokens if t in index]
        if ids:
            kept.append(doc.doc_id)
            encoded.append(ids)
        else:
            excluded.append(doc.doc_id)
            log.warning("document %s has no valid tokens; excluded", doc.doc_id)
    if len(kept) < 2:
        raise EmbeddingError("need at least 2 documents with valid tokens")

    tokens, offsets = sgns.flatten(encoded)
    rng = np.random.default_rng(config.rng_seed)
    docvecs = (rng.random((len(kept), config.dim)) - 0.5) / config.dim
    output = np.zeros((len(vocab), config.dim))
    n_chunks, bounds = sgns.chunking(len(kept), config.strict)
    kernel = sgns.dbow_serial if config.strict else sgns.dbow_parallel
    kernel(
        docvecs, output, tokens, offsets,
        sgns.keep_probabilities(vocab.counts, config.subsample),
        sgns.unigram_cdf(vocab.counts),
        config.epochs, config.alpha, config.alpha / 100.0, config.negative, True,
        sgns.chunk_states(config.rng_seed, n_chunks), bounds,
    )
    return DocVectorTable(kept, docvecs, vocab, output, config, excluded)


def infer_doc_vector(tokens: Sequence[str], model: DocVectorTable, seed: int | None = None
                     ) -> tuple[np.ndarray, bool]:
    """Fit a fresh document vector with the token matrix frozen.

    Returns ``(vector, unknown)``; ``unknown`` is true (and the vector zero)
    when no token is in the model's vocabulary.
    """
    index = model.vocab.index
    ids = [index[str(t)] for t in tokens if str(t) in index]
    if not ids:
        return np.zeros(model.dim), True
    config = model.config
    seed = config.rng_seed if seed is None else seed
    rng = np.random.default_rng(seed)
    vec = (rng.random((1, model.dim)) - 0.5) / model.dim
    flat, offsets = sgns.flatten([ids])
    sgns.dbow_serial(
        vec, model.output.copy(), flat, offsets,
        sgns.keep_probabilities(model.vocab.counts, config.subsample),
        sgns.unigram_cdf(model.vocab.counts),
        config.epochs, config.alpha, config.alpha / 100.0, config.negative, False,
        sgns.chunk_states(seed, 1), np.array([0, 1], dtype=np.int64),
    )
    return vec[0], False
