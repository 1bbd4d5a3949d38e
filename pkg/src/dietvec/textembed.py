"""Food-name tokenization and skip-gram word vectors.

Each food name is its own document and its window: every token predicts every
other token of the same name.  A name's vector is the mean of its
in-vocabulary token vectors.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import sgns
from .nvec import read_nvec, write_nvec

_SPLIT = re.compile(r"[^a-z0-9%]+")


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class EmbedConfig:
    dim: int = 100
    negative: int = 5
    epochs: int = 5
    alpha: float = 0.025
    min_count: int = 2
    subsample: float = 1e-4
    rng_seed: int = 0
    strict: bool = True

    def __post_init__(self):
        if self.dim < 1 or self.negative < 1 or self.epochs < 1:
            raise EmbeddingError("dim, negative and epochs must be >= 1")
        if not self.alpha > 0:
            raise EmbeddingError("alpha must be > 0")
        if self.min_count < 1 or self.subsample < 0:
            raise EmbeddingError("min_count must be >= 1 and subsample >= 0")

    def as_dict(self) -> dict:
        return asdict(self)


def tokenize(name: str) -> list[str]:
    """Lowercase and split on anything outside ``[a-z0-9%]``.

    >>> tokenize("2% Milk (Skim)")
    ['2%', 'milk', 'skim']
    """
    return [tok for tok in _SPLIT.split(name.lower()) if tok]


@dataclass(frozen=True, eq=False)
class Vocabulary:
    tokens: tuple[str, ...]
    counts: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.tokens == other.tokens and np.array_equal(self.counts, other.counts)

    @property
    def index(self) -> dict[str, int]:
        return {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def count_of(self, token: str) -> int:
        i = self.index.get(token)
        return 0 if i is None else int(self.counts[i])


def build_vocabulary(documents: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Tokens seen at least ``min_count`` times, most frequent first, ties lexicographic."""
    counts = Counter(tok for doc in documents for tok in doc)
    kept = sorted((tok for tok, n in counts.items() if n >= min_count),
                  key=lambda tok: (-counts[tok], tok))
    return Vocabulary(tuple(kept), np.array([counts[t] for t in kept], dtype=np.int64))


@dataclass
class WordVectorTable:
    vocab: Vocabulary
    vectors: np.ndarray  # |V| x d input vectors
    output: np.ndarray | None = None

    def __post_init__(self):
        self._index = self.vocab.index

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[self._index[token]]

    def save(self, path: str | Path) -> None:
        """NVEC matrix plus a ``.counts`` sidecar of ``token<TAB>count`` lines."""
        path = Path(path)
        write_nvec(path, self.vocab.tokens, self.vectors)
        with open(str(path) + ".counts", "w", encoding="utf-8", newline="\n") as fh:
            for tok, n in zip(self.vocab.tokens, self.vocab.counts):
                fh.write(f"{tok}\t{int(n)}\n")

    @classmethod
    def load(cls, path: str | Path) -> WordVectorTable:
        keys, vectors = read_nvec(path)
        counts = {}
        with open(str(path) + ".counts", encoding="utf-8") as fh:
            for line in fh:
                tok, n = line.rstrip("\n").split("\t")
                counts[tok] = int(n)
        vocab = Vocabulary(tuple(keys), np.array([counts[k] for k in keys], dtype=np.int64))
        return cls(vocab, vectors)


def train_word_vectors(documents: Sequence[Sequence[str]], config: EmbedConfig = EmbedConfig()
                       ) -> WordVectorTable:
    """Skip-gram with negative sampling over short token documents."""
    vocab = build_vocabulary(documents, config.min_count)
    if len(vocab) == 0:
        raise EmbeddingError("no trainable tokens")
    index = vocab.index
    encoded = [[index[t] for t in doc if t in index] for doc in documents]
    tokens, offsets = sgns.flatten(encoded)

    rng = np.random.default_rng(config.rng_seed)
    syn0 = (rng.random((len(vocab), config.dim)) - 0.5) / config.dim
    syn1 = np.zeros((len(vocab), config.dim))
    n_chunks, bounds = sgns.chunking(len(encoded), config.strict)
    kernel = sgns.skipgram_serial if config.strict else sgns.skipgram_parallel
    kernel(
        syn0, syn1, tokens, offsets,
        sgns.keep_probabilities(vocab.counts, config.subsample),
        sgns.unigram_cdf(vocab.counts),
        config.epochs, config.alpha, config.alpha / 100.0, config.negative,
        sgns.chunk_states(config.rng_seed, n_chunks), bounds,
    )
    return WordVectorTable(vocab, syn0, syn1)


def embed_name(tokens: Sequence[str], table: WordVectorTable) -> tuple[np.ndarray, bool]:
    """Mean of the in-vocabulary token vectors; ``(zeros, True)`` when none are known."""
    # summing in vocabulary order keeps the result bitwise permutation-invariant
    rows = sorted(table._index[t] for t in tokens if t in table)
    if not rows:
        return np.zeros(table.dim), True
    return table.vectors[rows].mean(axis=0), False
