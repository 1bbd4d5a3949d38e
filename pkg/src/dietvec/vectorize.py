"""Food vectors: per-calorie nutrients, robust scaling, winsorization, block weighting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import NUTRIENT_FIELDS, FoodEntry, NutrientVector
from .textembed import WordVectorTable, embed_name, tokenize

N_NUTRIENTS = len(NUTRIENT_FIELDS)
EPSILON_KCAL = 1.0
WINSOR_LIMIT = 2.5


class VectorizeError(ValueError):
    pass


@dataclass(frozen=True)
class BlockWeights:
    name: float = 0.2
    nutrient: float = 0.8

    def __post_init__(self):
        if self.name < 0 or self.nutrient < 0:
            raise VectorizeError("block weights must be non-negative")
        if not math.isclose(self.name + self.nutrient, 1.0, rel_tol=0, abs_tol=1e-12):
            raise VectorizeError("block weights must sum to 1")


def lower_median(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Median taking the lower middle element for even counts."""
    values = np.asarray(values, dtype=float)
    k = (values.shape[axis] - 1) // 2
    return np.take(np.partition(values, k, axis=axis), k, axis=axis)


def per_calorie(nutrients: NutrientVector, calories: float, epsilon: float = EPSILON_KCAL
                ) -> np.ndarray:
    """Nutrients divided by ``max(calories, epsilon)``; missing entries stay NaN.

    Missing values are imputed at population level, see :func:`per_calorie_matrix`.
    """
    if calories < 0:
        raise VectorizeError("calories must be >= 0")
    return nutrients.as_array() / max(calories, epsilon)


def per_calorie_matrix(foods: Sequence[FoodEntry], epsilon: float = EPSILON_KCAL):
    """Per-calorie matrix with missing components imputed by column medians.

    Returns ``(matrix, nutrient_blind)`` where ``nutrient_blind`` flags foods
    with every nutrient missing (they receive the all-median profile).
    """
    raw = np.array([per_calorie(f.nutrients, f.calories, epsilon) for f in foods], dtype=float)
    raw = raw.reshape(len(foods), N_NUTRIENTS)
    missing = np.isnan(raw)
    for j in range(N_NUTRIENTS):
        if missing[:, j].any():
            present = raw[~missing[:, j], j]
            fill = lower_median(present) if present.size else 0.0
            raw[missing[:, j], j] = fill
    return raw, missing.all(axis=1)


@dataclass(frozen=True)
class RobustScaler:
    medians: np.ndarray
    mads: np.ndarray
    epsilon: float = EPSILON_KCAL
    limit: float = WINSOR_LIMIT

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.medians) / self.mads

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(" ".join(repr(float(v)) for v in self.medians) + "\n")
            fh.write(" ".join(repr(float(v)) for v in self.mads) + "\n")
            fh.write(f"{self.epsilon!r} {self.limit!r}\n")

    @classmethod
    def load(cls, path: str | Path) -> RobustScaler:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        medians = np.array([float(v) for v in lines[0].split()])
        mads = np.array([float(v) for v in lines[1].split()])
        epsilon, limit = (float(v) for v in lines[2].split())
        return cls(medians, mads, epsilon, limit)


def fit_robust_scaler(matrix: np.ndarray, epsilon: float = EPSILON_KCAL,
                      limit: float = WINSOR_LIMIT) -> RobustScaler:
    """Column medians and raw median absolute deviations (no 1.4826 factor).

    Columns with zero MAD get a spread of 1 so they contribute nothing.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise VectorizeError("need at least 2 foods to fit the scaler")
    medians = lower_median(matrix)
    mads = lower_median(np.abs(matrix - medians))
    mads = np.where(mads > 0, mads, 1.0)
    return RobustScaler(medians, mads, epsilon, limit)


def standardize_winsorize(x: np.ndarray, scaler: RobustScaler, limit: float | None = None
                          ) -> np.ndarray:
    c = scaler.limit if limit is None else limit
    return np.clip(scaler.transform(x), -c, c)


def block_scales(dim: int, weights: BlockWeights, per_dimension: bool = True) -> tuple[float, float]:
    if per_dimension:
        return math.sqrt(weights.name / dim), math.sqrt(weights.nutrient / N_NUTRIENTS)
    return math.sqrt(weights.name), math.sqrt(weights.nutrient)


@dataclass(frozen=True)
class FoodVector:
    food_id: str
    name_part: np.ndarray
    nutrient_part: np.ndarray
    composite: np.ndarray


def compose_food_vector(food_id: str, name_vector: np.ndarray, nutrients: np.ndarray,
                        weights: BlockWeights = BlockWeights(),
                        per_dimension: bool = True) -> FoodVector:
    """Concatenate the two blocks, each scaled so that squared Euclidean
    distance splits as ``w_name * name_term + w_nutrient * nutrient_term``."""
    name_vector = np.asarray(name_vector, dtype=float)
    nutrients = np.asarray(nutrients, dtype=float)
    if name_vector.ndim != 1 or name_vector.size < 1:
        raise VectorizeError("name vector must be a non-empty 1-d array")
    if nutrients.shape != (N_NUTRIENTS,):
        raise VectorizeError(f"nutrient vector must have {N_NUTRIENTS} components")
    a, b = block_scales(name_vector.size, weights, per_dimension)
    composite = np.concatenate([a * name_vector, b * nutrients])
    return FoodVector(food_id, name_vector, nutrients, composite)


@dataclass
class FoodVectorSet:
    """All food vectors of a population as aligned matrices."""

    food_ids: list[str]
    names: np.ndarray
    nutrients: np.ndarray
    composite: np.ndarray
    scaler: RobustScaler
    oov: np.ndarray
    nutrient_blind: np.ndarray

    def __getitem__(self, i: int) -> FoodVector:
        return FoodVector(self.food_ids[i], self.names[i], self.nutrients[i], self.composite[i])

    def __len__(self) -> int:
        return len(self.food_ids)


def build_food_vectors(foods: Sequence[FoodEntry], words: WordVectorTable,
                       weights: BlockWeights = BlockWeights(), per_dimension: bool = True,
                       epsilon: float = EPSILON_KCAL, limit: float = WINSOR_LIMIT
                       ) -> FoodVectorSet:
    per_kcal, blind = per_calorie_matrix(foods, epsilon)
    scaler = fit_robust_scaler(per_kcal, epsilon, limit)
    nutrients = standardize_winsorize(per_kcal, scaler)
    names = np.zeros((len(foods), words.dim))
    oov = np.zeros(len(foods), dtype=bool)
    for i, food in enumerate(foods):
        names[i], oov[i] = embed_name(tokenize(food.name), words)
    a, b = block_scales(words.dim, weights, per_dimension)
    composite = np.hstack([a * names, b * nutrients])
    return FoodVectorSet([f.food_id for f in foods], names, nutrients, composite, scaler, oov, blind)
