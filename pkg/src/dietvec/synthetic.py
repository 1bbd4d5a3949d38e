"""Synthetic food-log corpora with planted archetype/template/diet structure.

Foods are drawn from archetypes (a nutrient profile per 100 kcal plus a pool
of name tokens), meals from templates (a distribution over archetypes) and
users from diet groups (a set of templates).  Every hidden label is returned
so recovered clusterings can be scored against it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, fields
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .corpus import (
    MEAL_TAGS,
    FoodEntry,
    FoodLogEntry,
    FoodTable,
    LogTable,
    NutrientVector,
    meal_key,
    write_food_database,
    write_food_logs,
)


@dataclass(frozen=True)
class Archetype:
    label: str
    tokens: tuple[str, ...]
    # fat, carbs, protein, saturated_fat (g), cholesterol, sodium (mg), fiber, sugar (g) per 100 kcal
    profile: tuple[float, ...]
    portion_kcal: float

    @property
    def carb_share(self) -> float:
        fat, carbs, protein = self.profile[:3]
        energy = 9 * fat + 4 * carbs + 4 * protein
        return 4 * carbs / energy if energy > 0 else 0.0


CATALOG = (
    Archetype("cheese", ("cheese", "cheddar", "shredded", "mild", "mozzarella", "sharp", "slice"),
              (8.2, 0.4, 6.1, 5.2, 25.0, 160.0, 0.0, 0.1), 110.0),
    Archetype("beef", ("beef", "ground", "chuck", "burger", "patty", "lean", "steak"),
              (7.0, 0.0, 9.2, 2.8, 32.0, 25.0, 0.0, 0.0), 250.0),
    Archetype("eggs", ("egg", "eggs", "scrambled", "fried", "large", "omelet", "boiled"),
              (6.7, 0.5, 8.8, 2.1, 260.0, 95.0, 0.0, 0.3), 90.0),
    Archetype("chicken", ("chicken", "breast", "grilled", "skinless", "roasted", "thigh", "cooked"),
              (2.3, 0.0, 19.0, 0.6, 55.0, 45.0, 0.0, 0.0), 180.0),
    Archetype("bread", ("bread", "wheat", "whole", "toast", "bagel", "white", "slice"),
              (1.3, 18.0, 3.6, 0.3, 0.0, 180.0, 2.6, 2.2), 140.0),
    Archetype("rice", ("rice", "brown", "jasmine", "grain", "long", "wild", "cooked"),
              (0.2, 22.0, 2.0, 0.05, 0.0, 1.0, 0.4, 0.05), 200.0),
    Archetype("fruit", ("apple", "banana", "fresh", "raw", "medium", "fruit", "orange"),
              (0.3, 25.0, 0.8, 0.05, 0.0, 1.0, 4.2, 18.5), 90.0),
    Archetype("cocoa", ("cocoa", "hot", "chocolate", "mix", "drink", "sweet", "packet"),
              (1.1, 21.0, 1.2, 0.7, 0.5, 95.0, 0.6, 18.0), 120.0),
    Archetype("greens", ("spinach", "baby", "salad", "greens", "kale", "lettuce", "romaine"),
              (1.5, 15.0, 9.5, 0.2, 0.0, 330.0, 9.0, 3.0), 40.0),
    Archetype("nuts", ("almonds", "nuts", "roasted", "salted", "peanut", "cashews", "mixed"),
              (8.6, 3.6, 3.5, 0.9, 0.0, 55.0, 2.0, 0.8), 170.0),
    Archetype("yogurt", ("yogurt", "greek", "plain", "nonfat", "vanilla", "cup", "strawberry"),
              (0.4, 6.5, 17.0, 0.2, 8.0, 60.0, 0.0, 5.5), 120.0),
    Archetype("pasta", ("pasta", "spaghetti", "penne", "noodles", "marinara", "sauce", "elbow"),
              (0.6, 20.0, 3.6, 0.1, 0.0, 4.0, 1.2, 0.7), 220.0),
)


@dataclass(frozen=True)
class SyntheticSpec:
    n_food_archetypes: int = 10
    foods_per_archetype: int = 200
    n_meal_templates: int = 20
    n_users: int = 2000
    days_per_user: int = 30
    name_noise_rate: float = 0.05
    nutrient_noise_scale: float = 0.1
    rng_seed: int = 0
    n_diet_groups: int = 4
    min_meal_items: int = 4
    max_meal_items: int = 8
    snack_rate: float = 0.5
    missing_rate: float = 0.0

    def __post_init__(self):
        counts = ("n_food_archetypes", "foods_per_archetype", "n_meal_templates", "n_users",
                  "days_per_user", "n_diet_groups", "min_meal_items")
        for name in counts:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.max_meal_items < self.min_meal_items:
            raise ValueError("max_meal_items must be >= min_meal_items")
        for name in ("name_noise_rate", "snack_rate", "missing_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.nutrient_noise_scale < 0:
            raise ValueError("nutrient_noise_scale must be >= 0")
        if self.n_diet_groups > self.n_meal_templates:
            raise ValueError("need at least one meal template per diet group")

    @classmethod
    def from_mapping(cls, values: dict) -> SyntheticSpec:
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"unknown synthetic spec key {key!r}")
            kwargs[key] = float(raw) if "rate" in key or "scale" in key else int(raw)
        return cls(**kwargs)


@dataclass
class SyntheticCorpus:
    foods: FoodTable
    logs: LogTable
    food_labels: dict[str, int]
    meal_labels: dict[str, int]
    user_labels: dict[str, int]
    archetypes: list[Archetype]
    templates: list[dict[int, float]]
    diet_templates: list[list[int]]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"foods": out / "foods.jsonl", "logs": out / "logs.csv", "labels": out / "labels.csv"}
        with paths["foods"].open("w", encoding="utf-8", newline="\n") as fh:
            write_food_database(self.foods.entries(), fh)
        with paths["logs"].open("w", encoding="utf-8", newline="\n") as fh:
            write_food_logs(self.logs, fh)
        with paths["labels"].open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("kind,id,label\n")
            for kind, labels in (("food", self.food_labels), ("meal", self.meal_labels),
                                 ("user", self.user_labels)):
                for key, label in labels.items():
                    fh.write(f"{kind},{key},{label}\n")
        return paths


def read_labels(path: str | Path) -> dict[str, dict[str, int]]:
    out: dict[str, dict[str, int]] = {"food": {}, "meal": {}, "user": {}}
    with Path(path).open(encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            kind, key, label = line.rstrip("\n").split(",")
            out[kind][key] = int(label)
    return out


def _extra_archetype(index: int, rng: np.random.Generator) -> Archetype:
    macros = rng.dirichlet([0.6, 0.6, 0.6])
    # grams per 100 kcal from energy shares
    fat, carbs, protein = 100 * macros[0] / 9, 100 * macros[1] / 4, 100 * macros[2] / 4
    micro = rng.uniform(0, 1, size=5) * np.array([fat * 0.5, 120.0, 400.0, 8.0, carbs * 0.8])
    tokens = tuple(f"x{index}w{j}" for j in range(7))
    return Archetype(f"extra{index}", tokens, (fat, carbs, protein, *micro.tolist()),
                     float(rng.uniform(50, 300)))


def _typo(token: str, rng: np.random.Generator) -> str:
    if len(token) < 3:
        return token + token[-1]
    i = int(rng.integers(1, len(token) - 1))
    op = int(rng.integers(3))
    if op == 0:  # drop
        return token[:i] + token[i + 1:]
    if op == 1:  # swap
        return token[:i - 1] + token[i] + token[i - 1] + token[i + 1:]
    return token[:i] + token[i] + token[i:]  # double


def _design_templates(archetypes: list[Archetype], n_templates: int, n_groups: int):
    """Templates are archetype pairs; group 0 gets the lowest-carb pairs,
    group 1 the highest-carb, the rest are spread over the middle."""
    n = len(archetypes)
    subsets: list[tuple[int, ...]] = []
    for size in range(2, n + 1):
        subsets.extend(itertools.combinations(range(n), size))
        if len(subsets) >= n_templates:
            break
    if n == 1:
        subsets = [(0,)]
    if len(subsets) < n_templates:
        raise ValueError(f"{n} archetypes cannot support {n_templates} distinct meal templates")

    def carb(subset):
        return sum(archetypes[a].carb_share for a in subset) / len(subset)

    pool = sorted(subsets, key=lambda s: (carb(s), s))
    per_group = [n_templates // n_groups + (1 if g < n_templates % n_groups else 0)
                 for g in range(n_groups)]
    chosen: list[list[tuple[int, ...]]] = [[] for _ in range(n_groups)]
    if n_groups == 1:
        idx = np.linspace(0, len(pool) - 1, per_group[0]).round().astype(int)
        chosen[0] = [pool[i] for i in idx]
    else:
        chosen[0] = pool[: per_group[0]]
        pool = pool[per_group[0]:]
        chosen[1] = pool[len(pool) - per_group[1]:]
        pool = pool[: len(pool) - per_group[1]]
        rest = sum(per_group[2:])
        if rest:
            idx = np.linspace(0, len(pool) - 1, rest).round().astype(int)
            remaining = per_group[:]
            slots = []
            while len(slots) < rest:
                for g in range(2, n_groups):
                    if remaining[g]:
                        slots.append(g)
                        remaining[g] -= 1
            for i, g in zip(idx, slots):
                chosen[g].append(pool[i])

    templates: list[dict[int, float]] = []
    diet_templates: list[list[int]] = []
    for group in chosen:
        ids = []
        for subset in group:
            ids.append(len(templates))
            templates.append({a: 1.0 / len(subset) for a in subset})
        diet_templates.append(ids)
    return templates, diet_templates


def generate_synthetic_corpus(spec: SyntheticSpec) -> SyntheticCorpus:
    """Build a corpus whose structure is fully determined by ``spec``."""
    rng = np.random.default_rng(spec.rng_seed)
    archetypes = list(CATALOG[: spec.n_food_archetypes])
    for i in range(len(archetypes), spec.n_food_archetypes):
        archetypes.append(_extra_archetype(i, rng))

    foods: list[FoodEntry] = []
    food_labels: dict[str, int] = {}
    by_archetype: list[list[str]] = []
    width = len(str(spec.n_food_archetypes * spec.foods_per_archetype))
    for a, arch in enumerate(archetypes):
        ids = []
        for j in range(spec.foods_per_archetype):
            food_id = f"f{a * spec.foods_per_archetype + j:0{width}d}"
            n_tokens = int(rng.integers(2, 5))
            picks = rng.choice(len(arch.tokens), size=n_tokens, replace=False)
            words = [arch.tokens[p] for p in picks]
            words = [_typo(w, rng) if rng.random() < spec.name_noise_rate else w for w in words]
            name = " ".join(words).title()

            scale = spec.nutrient_noise_scale
            kcal = arch.portion_kcal * math.exp(scale * rng.standard_normal())
            noise = np.exp(scale * rng.standard_normal(8))
            amounts = np.array(arch.profile) * kcal / 100.0 * noise
            values = [None if rng.random() < spec.missing_rate else round(float(v), 6)
                      for v in amounts]
            foods.append(FoodEntry(food_id, name, round(kcal, 4), NutrientVector(*values)))
            food_labels[food_id] = a
            ids.append(food_id)
        by_archetype.append(ids)

    templates, diet_templates = _design_templates(archetypes, spec.n_meal_templates,
                                                  spec.n_diet_groups)
    # popularity within an archetype falls off as 1/rank
    popularity = 1.0 / np.arange(1, spec.foods_per_archetype + 1)
    popularity /= popularity.sum()

    user_groups = np.arange(spec.n_users) % spec.n_diet_groups
    rng.shuffle(user_groups)
    width = len(str(spec.n_users))
    start = date(2020, 1, 1)
    portions = (0.5, 1.0, 1.0, 1.5, 2.0)

    entries: list[FoodLogEntry] = []
    meal_labels: dict[str, int] = {}
    user_labels: dict[str, int] = {}
    for u in range(spec.n_users):
        user = f"u{u:0{width}d}"
        group = int(user_groups[u])
        user_labels[user] = group
        options = diet_templates[group]
        for d in range(spec.days_per_user):
            day = start + timedelta(days=d)
            for tag in MEAL_TAGS:
                if tag == "snacks" and rng.random() >= spec.snack_rate:
                    continue
                t = options[int(rng.integers(len(options)))]
                meal_labels[meal_key(user, day, tag)] = t
                members = list(templates[t])
                weights = np.array([templates[t][a] for a in members])
                n_items = int(rng.integers(spec.min_meal_items, spec.max_meal_items + 1))
                arch_draws = rng.choice(len(members), size=n_items, p=weights)
                food_draws = rng.choice(spec.foods_per_archetype, size=n_items, p=popularity)
                portion_draws = rng.integers(len(portions), size=n_items)
                for a_i, f_i, p_i in zip(arch_draws, food_draws, portion_draws):
                    food_id = by_archetype[members[a_i]][f_i]
                    entries.append(FoodLogEntry(user, day, tag, food_id, portions[p_i]))

    return SyntheticCorpus(
        foods=FoodTable(foods),
        logs=LogTable(entries),
        food_labels=food_labels,
        meal_labels=meal_labels,
        user_labels=user_labels,
        archetypes=archetypes,
        templates=templates,
        diet_templates=diet_templates,
    )
