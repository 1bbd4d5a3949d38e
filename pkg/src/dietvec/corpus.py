"""Food, log, meal and diet records plus the parsers that build them.

Food databases are line-delimited JSON objects; food logs are CSV files with
the header ``user_id,date,meal_tag,food_id,portions``.  Parsing never raises
on bad input: every rejected line is counted and diagnosed in a
:class:`ParseReport`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from typing import BinaryIO, Iterable, Iterator, Mapping, Sequence

import numpy as np

NUTRIENT_FIELDS = (
    "fat",
    "carbs",
    "protein",
    "saturated_fat",
    "cholesterol",
    "sodium",
    "fiber",
    "sugar",
)
MEAL_TAGS = ("breakfast", "lunch", "dinner", "snacks")
LOG_HEADER = ("user_id", "date", "meal_tag", "food_id", "portions")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class NutrientVector:
    """Eight nutrient amounts per portion; ``None`` marks a missing value."""

    fat: float | None = None
    carbs: float | None = None
    protein: float | None = None
    saturated_fat: float | None = None
    cholesterol: float | None = None
    sodium: float | None = None
    fiber: float | None = None
    sugar: float | None = None

    def __post_init__(self):
        for name in NUTRIENT_FIELDS:
            value = getattr(self, name)
            if value is None:
                continue
            if not math.isfinite(value) or value < 0:
                raise CorpusError(f"nutrient {name} must be finite and >= 0, got {value!r}")

    @classmethod
    def from_sequence(cls, values: Sequence[float | None]) -> NutrientVector:
        if len(values) != len(NUTRIENT_FIELDS):
            raise CorpusError(f"expected {len(NUTRIENT_FIELDS)} nutrients, got {len(values)}")
        return cls(*values)

    def as_tuple(self) -> tuple[float | None, ...]:
        return tuple(getattr(self, name) for name in NUTRIENT_FIELDS)

    def as_array(self):
        """Values as a float array with NaN in place of missing markers."""
        return np.array([math.nan if v is None else v for v in self.as_tuple()], dtype=float)

    def missing(self) -> tuple[str, ...]:
        return tuple(name for name in NUTRIENT_FIELDS if getattr(self, name) is None)

    def scaled(self, factor: float) -> NutrientVector:
        return NutrientVector(*(None if v is None else v * factor for v in self.as_tuple()))


@dataclass(frozen=True)
class FoodEntry:
    food_id: str
    name: str
    calories: float
    nutrients: NutrientVector

    def __post_init__(self):
        if not self.name.strip():
            raise CorpusError(f"food {self.food_id}: empty name")
        if not math.isfinite(self.calories) or self.calories < 0:
            raise CorpusError(f"food {self.food_id}: calories must be >= 0")


@dataclass(frozen=True, slots=True)
class FoodLogEntry:
    user_id: str
    date: date
    meal_tag: str
    food_id: str
    portions: float


@dataclass(frozen=True)
class Meal:
    meal_id: str
    user_id: str
    date: date
    meal_tag: str
    items: tuple[str, ...]


@dataclass(frozen=True)
class DietDocument:
    user_id: str
    tokens: Counter

    def __len__(self) -> int:
        return sum(self.tokens.values())


@dataclass
class ParseReport:
    accepted: int = 0
    rejected: int = 0
    diagnostics: list[str] = field(default_factory=list)
    warnings: int = 0

    def reject(self, line_no: int, reason: str) -> None:
        self.rejected += 1
        self.diagnostics.append(f"line {line_no}: {reason}")

    def warn(self, line_no: int, reason: str) -> None:
        self.warnings += 1
        self.diagnostics.append(f"line {line_no}: warning: {reason}")

    def as_dict(self) -> dict:
        return {"accepted": self.accepted, "rejected": self.rejected, "warnings": self.warnings}


class FoodTable(Mapping[str, FoodEntry]):
    """Foods keyed by id, in file order."""

    def __init__(self, foods: Iterable[FoodEntry] = (), report: ParseReport | None = None):
        self._foods: dict[str, FoodEntry] = {}
        for food in foods:
            if food.food_id in self._foods:
                raise CorpusError(f"duplicate food_id {food.food_id}")
            self._foods[food.food_id] = food
        self.report = report or ParseReport(accepted=len(self._foods))

    def __getitem__(self, food_id: str) -> FoodEntry:
        return self._foods[food_id]

    def __iter__(self) -> Iterator[str]:
        return iter(self._foods)

    def __len__(self) -> int:
        return len(self._foods)

    def entries(self) -> list[FoodEntry]:
        return list(self._foods.values())


class LogTable(Sequence[FoodLogEntry]):
    def __init__(self, entries: Iterable[FoodLogEntry] = (), report: ParseReport | None = None):
        self._entries = list(entries)
        self.report = report or ParseReport(accepted=len(self._entries))

    def __getitem__(self, i):
        return self._entries[i]

    def __len__(self) -> int:
        return len(self._entries)

    def users(self) -> list[str]:
        return list(dict.fromkeys(e.user_id for e in self._entries))


def _lines(stream: BinaryIO | bytes | str) -> Iterator[tuple[int, bytes]]:
    if isinstance(stream, str):
        stream = stream.encode("utf-8")
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    for line_no, raw in enumerate(stream, start=1):
        yield line_no, raw


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ValueError(f"{what} is not a number")
    try:
        number = float(value)
    except OverflowError:
        raise ValueError(f"{what} is out of range") from None
    if not math.isfinite(number):
        raise ValueError(f"{what} is not finite")
    return number


def parse_food_database(stream: BinaryIO | bytes | str) -> FoodTable:
    """Parse line-delimited JSON food records.

    Records without a usable name or with missing/negative calories are
    rejected.  Absent, null, negative or non-numeric nutrient fields become
    missing markers (the latter two with a warning).  Later duplicates of a
    food_id are rejected.
    """
    report = ParseReport()
    foods: dict[str, FoodEntry] = {}
    for line_no, raw in _lines(stream):
        try:
            text = raw.decode("utf-8").strip()
        except UnicodeDecodeError as exc:
            report.reject(line_no, f"invalid UTF-8 ({exc.reason})")
            continue
        if not text:
            continue
        try:
            record = json.loads(text)
        except json.JSONDecodeError as exc:
            report.reject(line_no, f"malformed JSON: {exc.msg}")
            continue
        if not isinstance(record, dict):
            report.reject(line_no, "record is not an object")
            continue

        food_id = record.get("food_id")
        if food_id is None or isinstance(food_id, (dict, list, bool)) or str(food_id).strip() == "":
            report.reject(line_no, "missing food_id")
            continue
        food_id = str(food_id).strip()
        name = record.get("name")
        if not isinstance(name, str) or not name.strip():
            report.reject(line_no, f"food {food_id}: missing name")
            continue
        if record.get("calories") is None:
            report.reject(line_no, f"food {food_id}: missing calories")
            continue
        try:
            calories = _number(record["calories"], "calories")
        except ValueError as exc:
            report.reject(line_no, f"food {food_id}: {exc}")
            continue
        if calories < 0:
            report.reject(line_no, f"food {food_id}: negative calories")
            continue
        if food_id in foods:
            report.reject(line_no, f"duplicate food_id {food_id}")
            continue

        values: list[float | None] = []
        for nutrient in NUTRIENT_FIELDS:
            value = record.get(nutrient)
            if value is None:
                values.append(None)
                continue
            try:
                number = _number(value, nutrient)
            except ValueError as exc:
                report.warn(line_no, f"food {food_id}: {exc}; treated as missing")
                values.append(None)
                continue
            if number < 0:
                report.warn(line_no, f"food {food_id}: negative {nutrient}; treated as missing")
                values.append(None)
                continue
            values.append(number)

        foods[food_id] = FoodEntry(food_id, name.strip(), calories, NutrientVector(*values))
        report.accepted += 1
    return FoodTable(foods.values(), report)


def parse_food_logs(stream: BinaryIO | bytes | str, foods: Mapping[str, FoodEntry]) -> LogTable:
    """Parse a food-log CSV, rejecting lines that do not resolve or validate."""
    report = ParseReport()
    entries: list[FoodLogEntry] = []
    tags = frozenset(MEAL_TAGS)
    header = None
    for line_no, raw in _lines(stream):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            report.reject(line_no, f"invalid UTF-8 ({exc.reason})")
            continue
        if not text.strip():
            continue
        try:
            row = next(csv.reader([text]))
        except csv.Error as exc:
            report.reject(line_no, f"malformed CSV: {exc}")
            continue
        row = [cell.strip() for cell in row]
        if header is None:
            header = LOG_HEADER
            if tuple(row) == LOG_HEADER:
                continue
            report.warn(line_no, "missing header; reading line as data")
        if len(row) != len(LOG_HEADER):
            report.reject(line_no, f"expected {len(LOG_HEADER)} fields, got {len(row)}")
            continue
        user_id, day, meal_tag, food_id, portions = row
        if not user_id:
            report.reject(line_no, "empty user_id")
            continue
        try:
            parsed_day = date.fromisoformat(day)
        except ValueError:
            report.reject(line_no, f"unparseable date {day!r}")
            continue
        if meal_tag not in tags:
            report.reject(line_no, f"unknown meal_tag {meal_tag!r}")
            continue
        if food_id not in foods:
            report.reject(line_no, f"unknown food_id {food_id!r}")
            continue
        try:
            amount = float(portions)
        except ValueError:
            report.reject(line_no, f"unparseable portions {portions!r}")
            continue
        if not math.isfinite(amount) or amount <= 0:
            report.reject(line_no, f"portions must be positive, got {portions!r}")
            continue
        entries.append(FoodLogEntry(user_id, parsed_day, meal_tag, food_id, amount))
        report.accepted += 1
    return LogTable(entries, report)


def meal_key(user_id: str, day: date, meal_tag: str) -> str:
    return f"{user_id}/{day.isoformat()}/{meal_tag}"


def assemble_meals(logs: Iterable[FoodLogEntry]) -> list[Meal]:
    """One meal per distinct (user, date, meal_tag), items in log order."""
    groups: dict[tuple[str, date, str], list[str]] = {}
    for entry in logs:
        groups.setdefault((entry.user_id, entry.date, entry.meal_tag), []).append(entry.food_id)
    return [
        Meal(meal_key(user, day, tag), user, day, tag, tuple(items))
        for (user, day, tag), items in groups.items()
    ]


def assemble_diets(meals: Iterable[Meal], meal_words: Mapping[str, object]) -> list[DietDocument]:
    """Bag the meal-word assignment of every meal by user.

    Raises :class:`CorpusError` naming the first meal without an assignment.
    """
    bags: dict[str, Counter] = {}
    for meal in meals:
        if meal.meal_id not in meal_words:
            raise CorpusError(f"meal {meal.meal_id} has no meal-word assignment")
        bags.setdefault(meal.user_id, Counter())[meal_words[meal.meal_id]] += 1
    return [DietDocument(user, bag) for user, bag in bags.items()]


def write_food_database(foods: Iterable[FoodEntry], handle) -> None:
    for food in foods:
        record: dict = {"food_id": food.food_id, "name": food.name, "calories": food.calories}
        for name, value in zip(NUTRIENT_FIELDS, food.nutrients.as_tuple()):
            if value is not None:
                record[name] = value
        handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def write_food_logs(entries: Iterable[FoodLogEntry], handle) -> None:
    handle.write(",".join(LOG_HEADER) + "\n")
    for e in entries:
        handle.write(f"{e.user_id},{e.date.isoformat()},{e.meal_tag},{e.food_id},{e.portions!r}\n")
