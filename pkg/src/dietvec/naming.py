"""TF-IDF cluster names from unigram and bigram terms.

Each cluster's document is the multiset of terms from all of its members.  A
member contributes one or more token segments (a food name, or each name
term of the words it is made of); bigrams never span two segments.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .textembed import tokenize

log = logging.getLogger(__name__)

UNNAMED = "unnamed"
DISPLAY_TERMS = 2
REPORT_TERMS = 5


@dataclass(frozen=True)
class ClusterName:
    cluster_id: int
    terms: tuple[tuple[str, float], ...]

    @property
    def display(self) -> str:
        if not self.terms:
            return UNNAMED
        return "; ".join(term for term, _ in self.terms[:DISPLAY_TERMS])

    def top(self, n: int = REPORT_TERMS) -> tuple[tuple[str, float], ...]:
        return self.terms[:n]


def extract_ngrams(tokens: Sequence[str]) -> Counter:
    """Unigrams plus adjacent bigrams joined by a single space."""
    terms = Counter(tokens)
    terms.update(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    return terms


def cluster_document(segments: Iterable[Sequence[str]]) -> Counter:
    doc = Counter()
    for segment in segments:
        doc.update(extract_ngrams(segment))
    return doc


def tfidf_rank(documents: Sequence[Counter]) -> list[list[tuple[str, float]]]:
    """Raw tf times ``ln(N / df)`` per document, sorted by score then term.

    With a single document every idf is zero, so raw tf is used instead.
    """
    n_docs = len(documents)
    df = Counter()
    for doc in documents:
        df.update(doc.keys())
    ranked = []
    for doc in documents:
        if n_docs == 1:
            scores = {t: float(tf) for t, tf in doc.items()}
        else:
            scores = {t: tf * math.log(n_docs / df[t]) for t, tf in doc.items()}
        ranked.append(sorted(scores.items(), key=lambda item: (-item[1], item[0])))
    return ranked


def name_clusters(labels: Sequence[int], member_segments: Sequence[Sequence[Sequence[str]]],
                  n_clusters: int | None = None) -> list[ClusterName]:
    """Name every cluster by its TF-IDF-ranked terms.

    ``member_segments[i]`` holds the token segments of point ``i``.
    """
    if len(labels) != len(member_segments):
        raise ValueError("one segment list per labelled point required")
    k = n_clusters if n_clusters is not None else (max(labels) + 1 if len(labels) else 0)
    docs = [Counter() for _ in range(k)]
    for label, segments in zip(labels, member_segments):
        docs[int(label)].update(cluster_document(segments))
    names = []
    for j, ranked in enumerate(tfidf_rank(docs)):
        if not ranked:
            log.warning("cluster %d has an empty document; named %r", j, UNNAMED)
        names.append(ClusterName(j, tuple(ranked)))
    return names


def name_clusters_by_words(labels: Sequence[int], member_words: Sequence[Sequence[str]],
                           word_segments: dict[str, Sequence[Sequence[str]]],
                           n_clusters: int) -> list[ClusterName]:
    """Same as :func:`name_clusters` when each member is a list of lower-level
    words whose segments are given by ``word_segments``."""
    word_terms = {w: cluster_document(segs) for w, segs in word_segments.items()}
    tallies = [Counter() for _ in range(n_clusters)]
    for label, words in zip(labels, member_words):
        tallies[int(label)].update(words)
    docs = []
    for tally in tallies:
        doc = Counter()
        for word in sorted(tally):
            for term, n in word_terms[word].items():
                doc[term] += n * tally[word]
        docs.append(doc)
    names = []
    for j, ranked in enumerate(tfidf_rank(docs)):
        if not ranked:
            log.warning("cluster %d has an empty document; named %r", j, UNNAMED)
        names.append(ClusterName(j, tuple(ranked)))
    return names


def display_segments(display: str) -> list[list[str]]:
    """Token segments of a display name, one per term; empty for unnamed words."""
    if display == UNNAMED:
        return []
    return [tokenize(term) for term in display.split("; ") if tokenize(term)]


def write_names(path: str | Path, names: Sequence[ClusterName], limit: int | None = None) -> None:
    """CSV of ``cluster_id, rank, term, score, name``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cluster_id", "rank", "term", "score", "name"])
        for name in names:
            terms = name.terms if limit is None else name.terms[:limit]
            for rank, (term, score) in enumerate(terms, start=1):
                writer.writerow([name.cluster_id, rank, term, repr(score), name.display])


def read_names(path: str | Path, n_clusters: int | None = None) -> list[ClusterName]:
    rows: dict[int, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.setdefault(int(row["cluster_id"]), []).append((row["term"], float(row["score"])))
    k = n_clusters if n_clusters is not None else (max(rows) + 1 if rows else 0)
    return [ClusterName(j, tuple(rows.get(j, ()))) for j in range(k)]
