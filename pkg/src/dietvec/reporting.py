"""Plot-ready cluster reports: nutrient profiles, meal-word top terms, diet macro ratios."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import NUTRIENT_FIELDS, FoodEntry, FoodLogEntry
from .naming import REPORT_TERMS, ClusterName

ATWATER = {"fat": 9.0, "carbs": 4.0, "protein": 4.0}
QUANTILES = (10, 50, 90)


@dataclass(frozen=True)
class MacroRatio:
    fat: float
    carbs: float
    protein: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.fat, self.carbs, self.protein)


@dataclass(frozen=True)
class ClusterProfile:
    cluster_id: int
    name: str
    members: int
    nutrients: np.ndarray


def macro_ratio(entries: Iterable[FoodLogEntry], foods: Mapping[str, FoodEntry]) -> MacroRatio | None:
    """Mean over days of each day's fat/carb/protein energy shares.

    Energy uses 9/4/4 kcal per gram on portion-scaled grams; a missing macro
    counts as zero unless all three are missing, in which case the entry is
    skipped.  Returns ``None`` when no day has usable macro energy.
    """
    daily: dict = defaultdict(lambda: np.zeros(3))
    factors = np.array([ATWATER["fat"], ATWATER["carbs"], ATWATER["protein"]])
    for entry in entries:
        n = foods[entry.food_id].nutrients
        grams = (n.fat, n.carbs, n.protein)
        if all(g is None for g in grams):
            continue
        energy = factors * np.array([0.0 if g is None else g for g in grams]) * entry.portions
        daily[entry.date] += energy
    shares = [e / e.sum() for _, e in sorted(daily.items()) if e.sum() > 0]
    if not shares:
        return None
    mean = np.mean(shares, axis=0)
    return MacroRatio(*(float(v) for v in mean))


def user_macro_ratios(logs: Iterable[FoodLogEntry], foods: Mapping[str, FoodEntry]
                      ) -> tuple[dict[str, MacroRatio], list[str]]:
    """Macro ratio per user plus the users that had no usable entries."""
    by_user: dict[str, list[FoodLogEntry]] = defaultdict(list)
    for entry in logs:
        by_user[entry.user_id].append(entry)
    ratios, excluded = {}, []
    for user, entries in by_user.items():
        ratio = macro_ratio(entries, foods)
        if ratio is None:
            excluded.append(user)
        else:
            ratios[user] = ratio
    return ratios, excluded


def _shifted_mean(rows: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # mean taken around the first row, so identical rows reproduce it exactly
    ref = rows[0]
    return ref + (weights[:, None] * (rows - ref)).sum(axis=0) / weights.sum()


def cluster_nutrient_profile(labels: Sequence[int], nutrients: np.ndarray, names: Sequence[ClusterName],
                             weights: np.ndarray | None = None) -> list[ClusterProfile]:
    """Weighted mean nutrient block per food word, largest clusters first."""
    labels = np.asarray(labels)
    nutrients = np.asarray(nutrients, dtype=float)
    weights = np.ones(len(labels)) if weights is None else np.asarray(weights, dtype=float)
    profiles = []
    for name in names:
        idx = np.flatnonzero(labels == name.cluster_id)
        if idx.size == 0:
            continue
        profiles.append(ClusterProfile(name.cluster_id, name.display, int(idx.size),
                                       _shifted_mean(nutrients[idx], weights[idx])))
    profiles.sort(key=lambda p: (-p.members, p.cluster_id))
    return profiles


def diet_macro_report(diet_words: Mapping[str, int], ratios: Mapping[str, MacroRatio]):
    """Member triples per diet word plus p10/p50/p90 per macro.

    Returns ``(rows, summary)``: rows are ``(diet_word, user, fat, carbs,
    protein)``; summary maps diet word to ``{macro: (p10, p50, p90)}``.
    """
    rows = []
    grouped: dict[int, list[tuple[float, float, float]]] = defaultdict(list)
    for user in sorted(diet_words, key=lambda u: (diet_words[u], u)):
        if user not in ratios:
            continue
        triple = ratios[user].as_tuple()
        rows.append((diet_words[user], user, *triple))
        grouped[diet_words[user]].append(triple)
    summary = {}
    for word in sorted(grouped):
        values = np.array(grouped[word])
        summary[word] = {
            macro: tuple(float(q) for q in np.percentile(values[:, j], QUANTILES))
            for j, macro in enumerate(("fat", "carbs", "protein"))
        }
    return rows, summary


def meal_word_report(meal_names: Sequence[ClusterName], n: int = REPORT_TERMS):
    """Top ``n`` food-word terms per meal word as ``(meal_word, rank, term, score)``."""
    return [
        (name.cluster_id, rank, term, score)
        for name in meal_names
        for rank, (term, score) in enumerate(name.top(n), start=1)
    ]


def _writer(path: Path):
    fh = open(path, "w", encoding="utf-8", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_profiles(path: str | Path, profiles: Sequence[ClusterProfile]) -> None:
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(["cluster_id", "name", "members", *NUTRIENT_FIELDS])
        for p in profiles:
            w.writerow([p.cluster_id, p.name, p.members, *(repr(float(v)) for v in p.nutrients)])


def write_meal_words(path: str | Path, rows, names: Sequence[ClusterName]) -> None:
    display = {n.cluster_id: n.display for n in names}
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(["meal_word", "rank", "term", "score", "name"])
        for word, rank, term, score in rows:
            w.writerow([word, rank, term, repr(score), display[word]])


def write_diet_macros(path: str | Path, rows, names: Sequence[ClusterName]) -> None:
    display = {n.cluster_id: n.display for n in names}
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(["diet_word", "user_id", "fat_share", "carb_share", "protein_share", "name"])
        for word, user, fat, carbs, protein in rows:
            w.writerow([word, user, repr(fat), repr(carbs), repr(protein), display[word]])


def write_diet_summary(path: str | Path, summary, names: Sequence[ClusterName]) -> None:
    display = {n.cluster_id: n.display for n in names}
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(["diet_word", "macro", "p10", "p50", "p90", "name"])
        for word, macros in summary.items():
            for macro, (p10, p50, p90) in macros.items():
                w.writerow([word, macro, repr(p10), repr(p50), repr(p90), display[word]])
