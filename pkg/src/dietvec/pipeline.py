"""Staged food -> meal -> diet pipeline with a run manifest and resume.

Every stage reads its inputs from the artifacts earlier stages wrote under
the output directory and writes its own artifacts to ``<output>/<stage>/``,
so a full run and a resumed run compute from the same bytes.  Each stage
records a hash of the configuration it depends on plus its upstream hash;
``resume`` refuses to reuse artifacts whose hash no longer matches.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import shutil
import time
from collections import Counter
from dataclasses import dataclass, fields
from datetime import date
from pathlib import Path
from typing import Callable

import numpy as np

from . import naming, reporting
from .cluster import ClusterConfig, Clustering, kmeans_fit, load_clustering
from .corpus import (
    FoodLogEntry,
    Meal,
    assemble_diets,
    assemble_meals,
    parse_food_database,
    parse_food_logs,
    write_food_database,
    write_food_logs,
)
from .docembed import DocVectorTable, TokenDocument, train_dbow
from .nvec import read_nvec, write_nvec
from .textembed import EmbedConfig, WordVectorTable, tokenize, train_word_vectors
from .vectorize import BlockWeights, build_food_vectors

log = logging.getLogger(__name__)

STAGES = (
    "parse",
    "food-embedding",
    "food-clustering",
    "meal-embedding",
    "meal-clustering",
    "diet-embedding",
    "diet-clustering",
    "reports",
)
DEFAULT_K = {"food": 5000, "meal": 1000, "diet": 100}
MANIFEST = "manifest.json"


class PipelineError(Exception):
    pass


class ConfigError(PipelineError):
    pass


class ResumeRefused(PipelineError):
    pass


class StageError(PipelineError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    food_db: str = ""
    food_logs: str = ""
    output: str = "out"
    k_food: int = DEFAULT_K["food"]
    k_meal: int = DEFAULT_K["meal"]
    k_diet: int = DEFAULT_K["diet"]
    k_scale: float = 1.0
    rng_seed: int = 0
    food_seed: int | None = None
    meal_seed: int | None = None
    diet_seed: int | None = None
    strict: bool = True
    # food-name word vectors
    name_dim: int = 100
    name_negative: int = 5
    name_epochs: int = 5
    name_alpha: float = 0.025
    name_min_count: int = 2
    name_subsample: float = 0.0
    # meal DBOW
    meal_dim: int = 100
    meal_negative: int = 5
    meal_epochs: int = 5
    meal_alpha: float = 0.025
    meal_min_count: int = 1
    meal_subsample: float = 0.0
    # diet DBOW
    diet_dim: int = 100
    diet_negative: int = 5
    diet_epochs: int = 5
    diet_alpha: float = 0.025
    diet_min_count: int = 1
    diet_subsample: float = 0.0
    # food vectors
    w_name: float = 0.2
    w_nutrient: float = 0.8
    per_dimension_normalization: bool = True
    winsor_limit: float = 2.5
    epsilon_kcal: float = 1.0
    point_weighting: str = "frequency"
    # k-means, shared by all levels
    max_iterations: int = 100
    tol: float = 1e-6
    n_init: int = 3
    batch_size: int = 0

    def __post_init__(self):
        for level in ("food", "meal", "diet"):
            if getattr(self, f"k_{level}") < 1:
                raise ConfigError(f"k_{level} must be >= 1")
        if self.k_scale <= 0:
            raise ConfigError("k_scale must be > 0")
        if self.point_weighting not in ("frequency", "uniform"):
            raise ConfigError("point_weighting must be 'frequency' or 'uniform'")
        try:
            BlockWeights(self.w_name, self.w_nutrient)
            for level in ("name", "meal", "diet"):
                self.embed_config(level)
            ClusterConfig(1, self.max_iterations, self.tol, 0, self.n_init, self.batch_size)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def k(self, level: str) -> int:
        return max(1, round(getattr(self, f"k_{level}") / self.k_scale))

    def level_seed(self, level: str) -> int:
        override = getattr(self, f"{level}_seed", None)
        return self.rng_seed if override is None else override

    def stage_seed(self, stage: str) -> int:
        level = stage.split("-")[0]
        base = self.level_seed(level) if level in ("food", "meal", "diet") else self.rng_seed
        state = np.random.SeedSequence([base, STAGES.index(stage)]).generate_state(1)
        return int(state[0])

    def embed_config(self, level: str, seed: int = 0) -> EmbedConfig:
        return EmbedConfig(
            dim=getattr(self, f"{level}_dim"),
            negative=getattr(self, f"{level}_negative"),
            epochs=getattr(self, f"{level}_epochs"),
            alpha=getattr(self, f"{level}_alpha"),
            min_count=getattr(self, f"{level}_min_count"),
            subsample=getattr(self, f"{level}_subsample"),
            rng_seed=seed,
            strict=self.strict,
        )

    def cluster_config(self, level: str, seed: int) -> ClusterConfig:
        return ClusterConfig(self.k(level), self.max_iterations, self.tol, seed, self.n_init,
                             self.batch_size)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> PipelineConfig:
        return dataclasses.replace(self, **changes)


def _coerce(value: str, annotation):
    text = value.strip()
    if annotation in ("bool", bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    if annotation in ("int | None",):
        return None if text.lower() in ("", "none") else int(text)
    if annotation in ("int", int):
        return int(text)
    if annotation in ("float", float):
        return float(text)
    return text


def parse_config_text(text: str, base_dir: str | Path = ".") -> PipelineConfig:
    """Parse ``key = value`` lines (``#`` starts a comment).

    Relative ``food_db``, ``food_logs`` and ``output`` paths resolve against
    ``base_dir``.
    """
    types = {f.name: f.type for f in fields(PipelineConfig)}
    values: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"config line {line_no}: unknown key {key!r}")
        try:
            values[key] = _coerce(value, types[key])
        except ValueError as exc:
            raise ConfigError(f"config line {line_no}: bad value for {key}: {value!r}") from exc
    for key in ("food_db", "food_logs", "output"):
        if key in values and values[key] and not Path(values[key]).is_absolute():
            values[key] = str((Path(base_dir) / values[key]).resolve())
    return PipelineConfig(**values)


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, path.parent)


def format_config(config: PipelineConfig) -> str:
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        lines.append(f"{f.name} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- artifacts


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_foods(out: Path):
    with open(out / "parse" / "foods.jsonl", "rb") as fh:
        return parse_food_database(fh)


def _read_logs(out: Path, foods) -> list[FoodLogEntry]:
    with open(out / "parse" / "logs.csv", "rb") as fh:
        return list(parse_food_logs(fh, foods))


def _write_meals(path: Path, meals: list[Meal], tokens: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["meal_id", "user_id", "date", "meal_tag", "tokens"])
        for meal, toks in zip(meals, tokens):
            w.writerow([meal.meal_id, meal.user_id, meal.date.isoformat(), meal.meal_tag, " ".join(toks)])


def _read_meals(path: Path) -> tuple[list[Meal], list[list[str]]]:
    meals, tokens = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for meal_id, user, day, tag, toks in reader:
            meals.append(Meal(meal_id, user, date.fromisoformat(day), tag, ()))
            tokens.append(toks.split())
    return meals, tokens


def _read_tokens_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    ids, tokens = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for doc_id, toks in reader:
            ids.append(doc_id)
            tokens.append(toks.split())
    return ids, tokens


def _assignment_map(directory: Path) -> dict[str, str]:
    ids, clustering = load_clustering(directory)
    return {pid: str(label) for pid, label in zip(ids, clustering.labels)}


# ------------------------------------------------------------------- stages


def _stage_parse(cfg: PipelineConfig, out: Path, stage_dir: Path) -> dict:
    with open(cfg.food_db, "rb") as fh:
        foods = parse_food_database(fh)
    with open(cfg.food_logs, "rb") as fh:
        logs = parse_food_logs(fh, foods)
    with open(stage_dir / "foods.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        write_food_database(foods.entries(), fh)
    with open(stage_dir / "logs.csv", "w", encoding="utf-8", newline="\n") as fh:
        write_food_logs(logs, fh)
    report = {
        "foods": foods.report.as_dict(),
        "logs": logs.report.as_dict(),
        "food_diagnostics": foods.report.diagnostics,
        "log_diagnostics": logs.report.diagnostics,
    }
    _write_json(stage_dir / "report.json", report)
    if len(foods) == 0:
        raise PipelineError("no valid foods")
    if len(logs) == 0:
        raise PipelineError("no valid log entries")
    return {"foods": foods.report.as_dict(), "logs": logs.report.as_dict()}


def _stage_food_embedding(cfg: PipelineConfig, out: Path, stage_dir: Path) -> dict:
    foods = _read_foods(out).entries()
    names = [tokenize(f.name) for f in foods]
    words = train_word_vectors(names, cfg.embed_config("name", cfg.stage_seed("food-embedding")))
    words.save(stage_dir / "words.nvec")
    words = WordVectorTable.load(stage_dir / "words.nvec")
    vectors = build_food_vectors(foods, words, BlockWeights(cfg.w_name, cfg.w_nutrient),
                                 cfg.per_dimension_normalization, cfg.epsilon_kcal,
                                 cfg.winsor_limit)
    write_nvec(stage_dir / "food_vectors.nvec", vectors.food_ids, vectors.composite)
    write_nvec(stage_dir / "nutrients.nvec", vectors.food_ids, vectors.nutrients)
    write_nvec(stage_dir / "name_vectors.nvec", vectors.food_ids, vectors.names)
    vectors.scaler.save(stage_dir / "scaler.txt")
    with open(stage_dir / "flags.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["food_id", "oov_name", "nutrient_blind"])
        for fid, oov, blind in zip(vectors.food_ids, vectors.oov, vectors.nutrient_blind):
            w.writerow([fid, int(oov), int(blind)])
    return {
        "vocabulary": len(words.vocab),
        "oov_names": int(vectors.oov.sum()),
        "nutrient_blind": int(vectors.nutrient_blind.sum()),
    }


def _cluster_and_save(stage_dir: Path, ids, points, weights, config: ClusterConfig) -> Clustering:
    clustering = kmeans_fit(points, weights, config)
    clustering.save(stage_dir, ids, points)
    return clustering


def _stage_food_clustering(cfg: PipelineConfig, out: Path, stage_dir: Path) -> dict:
    food_table = _read_foods(out)
    ids, points = read_nvec(out / "food-embedding" / "food_vectors.nvec")
    if cfg.point_weighting == "frequency":
        counts = Counter(e.food_id for e in _read_logs(out, food_table))
        # unlogged foods keep a floor weight of one entry
        weights = np.array([max(counts.get(fid, 0), 1) for fid in ids], dtype=float)
    else:
        weights = np.ones(len(ids))
    clustering = _cluster_and_save(stage_dir, ids, points, weights,
                                   cfg.cluster_config("food", cfg.stage_seed("food-clustering")))
    segments = [[tokenize(food_table[fid].name)] for fid in ids]
    names = naming.name_clusters(clustering.labels, segments, clustering.k)
    naming.write_names(stage_dir / "names.csv", names)
    return {"k": clustering.k, "objective": clustering.objective, "iterations": clustering.n_iter}


def _word_segments(names: list[naming.ClusterName]) -> dict[str, list[list[str]]]:
    return {str(n.cluster_id): naming.display_segments(n.display) for n in names}


def _stage_meal_embedding(cfg: PipelineConfig, out: Path, stage_dir: Path) -> dict:
    food_table = _read_foods(out)
    food_words = _assignment_map(out / "food-clustering")
    meals = assemble_meals(_read_logs(out, food_table))
    tokens = [[food_words[i] for i in meal.items] for meal in meals]
    _write_meals(stage_dir / "meals.csv", meals, tokens)
    docs = [TokenDocument(m.meal_id, tuple(t)) for m, t in zip(meals, tokens)]
    table = train_dbow(docs, cfg.embed_config("meal", cfg.stage_seed("meal-embedding")))
    table.save(stage_dir)
    return {"meals": len(meals), "excluded": len(table.excluded)}


def _stage_meal_clustering(cfg: PipelineConfig, out: Path, stage_dir: Path) -> dict:
    ids, points = read_nvec(out / "meal-embedding" / "docs.nvec")
    clustering = _cluster_and_save(stage_dir, ids, points, None,
                                   cfg.cluster_config("meal", cfg.stage_seed("meal-clustering")))
    food_names = naming.read_names(out / "food-clustering" / "names.csv", cfg.k("food"))
    meals, tokens = _read_meals(out / "meal-embedding" / "meals.csv")
    by_meal = {m.meal_id: t for m, t in zip(meals, tokens)}
    names = naming.name_clusters_by_words(clustering.labels, [by_meal[mid] for mid in ids],
                                          _word_segments(food_names), clustering.k)
    naming.write_names(stage_dir / "names.csv", names)
    return {"k": clustering.k, "objective": clustering.objective, "iterations": clustering.n_iter}


def _stage_diet_embedding(cfg: PipelineConfig, out: Path, stage_dir: Path) -> dict:
    meals, _ = _read_meals(out / "meal-embedding" / "meals.csv")
    meal_words = _assignment_map(out / "meal-clustering")
    diets = assemble_diets(meals, meal_words)
    with open(stage_dir / "diets.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "tokens"])
        for diet in diets:
            expanded = [t for t in sorted(diet.tokens, key=int) for _ in range(diet.tokens[t])]
            w.writerow([diet.user_id, " ".join(expanded)])
    users, tokens = _read_tokens_csv(stage_dir / "diets.csv")
    docs = [TokenDocument(u, tuple(t)) for u, t in zip(users, tokens)]
    table = train_dbow(docs, cfg.embed_config("diet", cfg.stage_seed("diet-embedding")))
    table.save(stage_dir)
    return {"users": len(diets), "excluded": len(table.excluded)}


def _stage_diet_clustering(cfg: PipelineConfig, out: Path, stage_dir: Path) -> dict:
    ids, points = read_nvec(out / "diet-embedding" / "docs.nvec")
    clustering = _cluster_and_save(stage_dir, ids, points, None,
                                   cfg.cluster_config("diet", cfg.stage_seed("diet-clustering")))
    meal_names = naming.read_names(out / "meal-clustering" / "names.csv", cfg.k("meal"))
    users, tokens = _read_tokens_csv(out / "diet-embedding" / "diets.csv")
    by_user = dict(zip(users, tokens))
    names = naming.name_clusters_by_words(clustering.labels, [by_user[uid] for uid in ids],
                                          _word_segments(meal_names), clustering.k)
    naming.write_names(stage_dir / "names.csv", names)
    return {"k": clustering.k, "objective": clustering.objective, "iterations": clustering.n_iter}


def write_reports(out: Path, stage_dir: Path, k_food: int, k_meal: int, k_diet: int) -> dict:
    """Regenerate every report file from persisted artifacts."""
    food_ids, food_clustering = load_clustering(out / "food-clustering")
    nutrient_ids, nutrients = read_nvec(out / "food-embedding" / "nutrients.nvec")
    if nutrient_ids != food_ids:
        raise PipelineError("food vectors and food-word assignments are misaligned")
    food_names = naming.read_names(out / "food-clustering" / "names.csv", k_food)
    profiles = reporting.cluster_nutrient_profile(food_clustering.labels, nutrients, food_names,
                                                  food_clustering.weights)
    reporting.write_profiles(stage_dir / "profiles.csv", profiles)

    meal_names = naming.read_names(out / "meal-clustering" / "names.csv", k_meal)
    reporting.write_meal_words(stage_dir / "meal_words.csv",
                               reporting.meal_word_report(meal_names), meal_names)

    food_table = _read_foods(out)
    ratios, excluded = reporting.user_macro_ratios(_read_logs(out, food_table), food_table)
    diet_words = {uid: int(label) for uid, label in _assignment_map(out / "diet-clustering").items()}
    diet_names = naming.read_names(out / "diet-clustering" / "names.csv", k_diet)
    rows, summary = reporting.diet_macro_report(diet_words, ratios)
    reporting.write_diet_macros(stage_dir / "diet_macros.csv", rows, diet_names)
    reporting.write_diet_summary(stage_dir / "diet_macros_summary.csv", summary, diet_names)
    return {"profiles": len(profiles), "reported_users": len(rows), "excluded_users": len(excluded)}


def _stage_reports(cfg: PipelineConfig, out: Path, stage_dir: Path) -> dict:
    return write_reports(out, stage_dir, cfg.k("food"), cfg.k("meal"), cfg.k("diet"))


_RUNNERS: dict[str, Callable[[PipelineConfig, Path, Path], dict]] = {
    "parse": _stage_parse,
    "food-embedding": _stage_food_embedding,
    "food-clustering": _stage_food_clustering,
    "meal-embedding": _stage_meal_embedding,
    "meal-clustering": _stage_meal_clustering,
    "diet-embedding": _stage_diet_embedding,
    "diet-clustering": _stage_diet_clustering,
    "reports": _stage_reports,
}

# configuration keys each stage depends on (besides its upstream hash)
STAGE_KEYS = {
    "parse": (),
    "food-embedding": ("name_dim", "name_negative", "name_epochs", "name_alpha", "name_min_count",
                       "name_subsample", "w_name", "w_nutrient", "per_dimension_normalization",
                       "winsor_limit", "epsilon_kcal", "strict"),
    "food-clustering": ("point_weighting", "max_iterations", "tol", "n_init", "batch_size"),
    "meal-embedding": ("meal_dim", "meal_negative", "meal_epochs", "meal_alpha", "meal_min_count",
                       "meal_subsample", "strict"),
    "meal-clustering": ("max_iterations", "tol", "n_init", "batch_size"),
    "diet-embedding": ("diet_dim", "diet_negative", "diet_epochs", "diet_alpha", "diet_min_count",
                       "diet_subsample", "strict"),
    "diet-clustering": ("max_iterations", "tol", "n_init", "batch_size"),
    "reports": (),
}


def stage_inputs(cfg: PipelineConfig, stage: str) -> dict:
    payload = {key: getattr(cfg, key) for key in STAGE_KEYS[stage]}
    if stage == "parse":
        payload["food_db_sha256"] = _sha256_file(Path(cfg.food_db))
        payload["food_logs_sha256"] = _sha256_file(Path(cfg.food_logs))
    if stage in ("food-clustering", "meal-clustering", "diet-clustering"):
        payload["k"] = cfg.k(stage.split("-")[0])
    if stage == "reports":
        payload["k"] = [cfg.k("food"), cfg.k("meal"), cfg.k("diet")]
    if stage != "parse" and stage != "reports":
        payload["seed"] = cfg.stage_seed(stage)
    return payload


def stage_hashes(cfg: PipelineConfig) -> dict[str, str]:
    hashes, upstream = {}, ""
    for stage in STAGES:
        blob = json.dumps({"upstream": upstream, "inputs": stage_inputs(cfg, stage)}, sort_keys=True)
        upstream = hashlib.sha256(blob.encode()).hexdigest()
        hashes[stage] = upstream
    return hashes


def _constants() -> dict:
    from . import vectorize

    return {
        "unigram_power": 0.75,
        "alpha_floor_ratio": 0.01,
        "mad_consistency_factor": 1.0,
        "zero_mad_fallback": 1.0,
        "missing_nutrient_imputation": "population per-calorie lower median",
        "nutrient_count": vectorize.N_NUTRIENTS,
        "tfidf": "raw tf * ln(N_clusters / df); tf only when N_clusters == 1",
        "display_terms": naming.DISPLAY_TERMS,
        "report_terms": naming.REPORT_TERMS,
        "atwater_kcal_per_g": dict(reporting.ATWATER),
        "report_quantiles": list(reporting.QUANTILES),
        "unlogged_food_weight": 1,
        "negative_sampling_rng": "splitmix64",
        "sigmoid": "exact",
    }


def _validate(cfg: PipelineConfig) -> None:
    for key in ("food_db", "food_logs"):
        path = getattr(cfg, key)
        if not path or not Path(path).is_file():
            raise ConfigError(f"{key} does not exist: {path!r}")


def _manifest(cfg: PipelineConfig, hashes, records, status: str, failed: str | None = None) -> dict:
    return {
        "status": status,
        "failed_stage": failed,
        "config": cfg.as_dict(),
        "effective_k": {level: cfg.k(level) for level in ("food", "meal", "diet")},
        "seeds": {stage: cfg.stage_seed(stage) for stage in STAGES
                  if stage not in ("parse", "reports")},
        "embedding": {level: cfg.embed_config(level).as_dict() for level in ("name", "meal", "diet")},
        "constants": _constants(),
        "stages": {s: {"hash": hashes[s], **records[s]["stats"]} for s in STAGES if s in records},
        "durations": {s: records[s]["duration"] for s in STAGES if s in records},
    }


def _run_from(cfg: PipelineConfig, start: str, records: dict) -> None:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    hashes = stage_hashes(cfg)
    for stage in STAGES[STAGES.index(start):]:
        stage_dir = out / stage
        if stage_dir.exists():
            shutil.rmtree(stage_dir)
        stage_dir.mkdir(parents=True)
        log.info("stage %s", stage)
        began = time.perf_counter()
        try:
            stats = _RUNNERS[stage](cfg, out, stage_dir)
        except Exception as exc:
            _write_json(out / MANIFEST, _manifest(cfg, hashes, records, "failed", stage))
            raise StageError(stage, exc) from exc
        records[stage] = {"stats": stats, "duration": time.perf_counter() - began}
        _write_json(stage_dir / "stage.json", {"stage": stage, "hash": hashes[stage], **stats})
    _write_json(out / MANIFEST, _manifest(cfg, hashes, records, "complete"))


def run_pipeline(cfg: PipelineConfig) -> PipelineOutput:
    """Run every stage in order and return the loaded outputs."""
    _validate(cfg)
    _run_from(cfg, STAGES[0], {})
    return load_output(cfg.output)


def read_manifest(output: str | Path) -> dict:
    path = Path(output) / MANIFEST
    if not path.is_file():
        raise ResumeRefused(f"no manifest at {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def _config_diff(old: dict, new: dict) -> list[str]:
    return [f"{key}: {old.get(key)!r} -> {new.get(key)!r}"
            for key in sorted(set(old) | set(new)) if old.get(key) != new.get(key)]


def resume(stage: str, cfg: PipelineConfig) -> PipelineOutput:
    """Recompute ``stage`` and everything after it, reusing upstream artifacts.

    Refuses when any upstream stage's recorded hash differs from the hash the
    current configuration implies, or when its artifacts are missing.
    """
    if stage not in STAGES:
        raise ConfigError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")
    _validate(cfg)
    manifest = read_manifest(cfg.output)
    hashes = stage_hashes(cfg)
    records = {}
    for upstream in STAGES[: STAGES.index(stage)]:
        recorded = manifest["stages"].get(upstream)
        if recorded is None or not (Path(cfg.output) / upstream / "stage.json").is_file():
            raise ResumeRefused(f"upstream stage {upstream!r} has no completed artifacts")
        if recorded["hash"] != hashes[upstream]:
            diff = _config_diff(manifest["config"], cfg.as_dict())
            summary = "; ".join(diff) if diff else "input files changed"
            raise ResumeRefused(f"stage {upstream!r} was produced under a different configuration "
                                f"({summary})")
        stats = {k: v for k, v in recorded.items() if k != "hash"}
        records[upstream] = {"stats": stats, "duration": manifest["durations"].get(upstream, 0.0)}
    _run_from(cfg, stage, records)
    return load_output(cfg.output)


def regenerate_reports(output: str | Path) -> dict:
    """Rewrite ``reports/`` from the artifacts of a finished run."""
    out = Path(output)
    manifest = read_manifest(out)
    k = manifest["effective_k"]
    stage_dir = out / "reports"
    if stage_dir.exists():
        shutil.rmtree(stage_dir)
    stage_dir.mkdir(parents=True)
    stats = write_reports(out, stage_dir, k["food"], k["meal"], k["diet"])
    recorded = manifest["stages"].get("reports")
    if recorded is not None:
        _write_json(stage_dir / "stage.json", {"stage": "reports", "hash": recorded["hash"], **stats})
    return stats


@dataclass
class Level:
    ids: list[str]
    vectors: np.ndarray
    clustering: Clustering
    names: list[naming.ClusterName]

    def word_of(self) -> dict[str, int]:
        return {pid: int(label) for pid, label in zip(self.ids, self.clustering.labels)}


@dataclass
class PipelineOutput:
    directory: Path
    foods: Level
    meals: Level
    diets: Level
    manifest: dict


def _load_level(out: Path, embed_path: Path, cluster_stage: str, k: int) -> Level:
    ids, vectors = read_nvec(embed_path)
    cluster_ids, clustering = load_clustering(out / cluster_stage)
    if cluster_ids != ids:
        raise PipelineError(f"{cluster_stage} assignments do not match {embed_path.name}")
    names = naming.read_names(out / cluster_stage / "names.csv", k)
    return Level(ids, vectors, clustering, names)


def load_output(output: str | Path) -> PipelineOutput:
    out = Path(output)
    manifest = read_manifest(out)
    k = manifest["effective_k"]
    return PipelineOutput(
        out,
        _load_level(out, out / "food-embedding" / "food_vectors.nvec", "food-clustering", k["food"]),
        _load_level(out, out / "meal-embedding" / "docs.nvec", "meal-clustering", k["meal"]),
        _load_level(out, out / "diet-embedding" / "docs.nvec", "diet-clustering", k["diet"]),
        manifest,
    )
