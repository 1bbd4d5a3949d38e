import csv
import dataclasses
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from dietvec.cli import main
from dietvec.corpus import parse_food_database, parse_food_logs
from dietvec.nvec import NvecError, read_nvec, write_nvec
from dietvec.pipeline import (
    STAGES,
    ConfigError,
    PipelineConfig,
    ResumeRefused,
    StageError,
    format_config,
    load_output,
    parse_config_text,
    regenerate_reports,
    resume,
    run_pipeline,
)
from conftest import small_config


def tree_bytes(root: Path, skip_manifest: bool = True) -> dict[str, bytes]:
    files = {}
    for path in sorted(root.rglob("*")):
        if path.is_file() and not (skip_manifest and path.name == "manifest.json"):
            files[str(path.relative_to(root))] = path.read_bytes()
    return files


def manifest_without_timing(root: Path) -> dict:
    manifest = json.loads((root / "manifest.json").read_text())
    manifest.pop("durations")
    manifest["config"].pop("output")
    return manifest


@pytest.fixture(scope="module")
def baseline(tmp_path_factory, small_data):
    out = tmp_path_factory.mktemp("baseline") / "out"
    cfg = small_config(small_data, out)
    return cfg, run_pipeline(cfg)


def test_exact_k(baseline):
    _, output = baseline
    assert output.foods.clustering.k == 3 and len(set(output.foods.clustering.labels)) == 3
    assert output.meals.clustering.k == 4 and len(set(output.meals.clustering.labels)) == 4
    assert output.diets.clustering.k == 2 and len(set(output.diets.clustering.labels)) == 2
    assert output.manifest["status"] == "complete"


def test_every_item_has_one_word(baseline, small_corpus):
    _, output = baseline
    assert sorted(output.foods.ids) == sorted(small_corpus.foods)
    assert sorted(output.meals.ids) == sorted(small_corpus.meal_labels)
    assert sorted(output.diets.ids) == sorted(small_corpus.user_labels)


def test_level_consistency(baseline):
    cfg, output = baseline
    out = Path(cfg.output)
    meal_vocab, _ = read_nvec(out / "meal-embedding" / "tokens.nvec")
    assert set(meal_vocab) == {str(j) for j in range(output.foods.clustering.k)}
    diet_vocab, _ = read_nvec(out / "diet-embedding" / "tokens.nvec")
    assert set(diet_vocab) == {str(j) for j in range(output.meals.clustering.k)}


def test_conservation(baseline, small_data):
    cfg, output = baseline
    foods = parse_food_database((small_data / "foods.jsonl").read_bytes())
    logs = parse_food_logs((small_data / "logs.csv").read_bytes(), foods)
    assert len(output.diets.ids) == len({e.user_id for e in logs})
    with open(Path(cfg.output) / "diet-embedding" / "diets.csv") as fh:
        total = sum(len(row["tokens"].split()) for row in csv.DictReader(fh))
    assert total == len(output.meals.ids)


def test_manifest_completeness(baseline):
    cfg, output = baseline
    manifest = output.manifest
    assert set(manifest["config"]) == {f.name for f in dataclasses.fields(PipelineConfig)}
    assert set(manifest["stages"]) == set(STAGES) == set(manifest["durations"])
    assert manifest["effective_k"] == {"food": 3, "meal": 4, "diet": 2}
    for level in ("name", "meal", "diet"):
        assert set(manifest["embedding"][level]) >= {"dim", "negative", "epochs", "alpha",
                                                     "min_count", "subsample"}
    assert manifest["constants"]["unigram_power"] == 0.75
    assert manifest["config"]["point_weighting"] == "frequency"


def test_frequency_weights(baseline, small_corpus):
    _, output = baseline
    counts = {}
    for entry in small_corpus.logs:
        counts[entry.food_id] = counts.get(entry.food_id, 0) + 1
    expected = [max(counts.get(fid, 0), 1) for fid in output.foods.ids]
    assert list(output.foods.clustering.weights) == expected


def test_reports(baseline):
    cfg, output = baseline
    reports = Path(cfg.output) / "reports"
    with open(reports / "profiles.csv") as fh:
        profiles = list(csv.DictReader(fh))
    assert len(profiles) == 3
    for row in profiles:
        assert all(-2.5 <= float(row[f]) <= 2.5 for f in ("fat", "carbs", "sugar"))
    with open(reports / "diet_macros.csv") as fh:
        macros = list(csv.DictReader(fh))
    assert len(macros) == len(output.diets.ids)
    for row in macros:
        total = float(row["fat_share"]) + float(row["carb_share"]) + float(row["protein_share"])
        assert total == pytest.approx(1.0, abs=1e-9)
    with open(reports / "meal_words.csv") as fh:
        per_word = {}
        for row in csv.DictReader(fh):
            per_word[row["meal_word"]] = per_word.get(row["meal_word"], 0) + 1
    assert len(per_word) == 4 and all(n <= 5 for n in per_word.values())


def test_reports_regenerate_byte_identical(baseline):
    cfg, _ = baseline
    reports = Path(cfg.output) / "reports"
    before = tree_bytes(reports)
    shutil.rmtree(reports)
    regenerate_reports(cfg.output)
    assert tree_bytes(reports) == before


def test_determinism(baseline, tmp_path):
    cfg, _ = baseline
    again = cfg.replace(output=str(tmp_path / "again"))
    run_pipeline(again)
    assert tree_bytes(Path(again.output)) == tree_bytes(Path(cfg.output))
    assert manifest_without_timing(Path(again.output)) == manifest_without_timing(Path(cfg.output))


def test_resume_at_every_stage_matches_full_run(baseline, tmp_path):
    cfg, _ = baseline
    reference = tree_bytes(Path(cfg.output))
    work = tmp_path / "resumed"
    shutil.copytree(cfg.output, work)
    staged = cfg.replace(output=str(work))
    for stage in STAGES:
        resume(stage, staged)
        assert tree_bytes(work) == reference, stage


def test_resume_refuses_changed_food_seed(baseline):
    cfg, _ = baseline
    with pytest.raises(ResumeRefused, match="food_seed"):
        resume("meal-embedding", cfg.replace(food_seed=99))


def test_resume_after_k_meal_change_reuses_food_artifacts(baseline, tmp_path):
    cfg, _ = baseline
    work = tmp_path / "kmeal"
    shutil.copytree(cfg.output, work)
    before = tree_bytes(work)
    changed = cfg.replace(output=str(work), k_meal=3)
    output = resume("meal-clustering", changed)
    after = tree_bytes(work)
    for stage in STAGES[:4]:
        assert {k: v for k, v in after.items() if k.startswith(stage + "/")} == \
               {k: v for k, v in before.items() if k.startswith(stage + "/")}
    assert output.meals.clustering.k == 3
    # the stale k_meal invalidates meal-clustering for a further resume under the old config
    with pytest.raises(ResumeRefused):
        resume("diet-embedding", cfg.replace(output=str(work)))


def test_resume_without_manifest(tmp_path, small_data):
    with pytest.raises(ResumeRefused):
        resume("food-clustering", small_config(small_data, tmp_path / "none"))


def test_stage_failure_is_reported(tmp_path, small_data):
    logs = tmp_path / "logs.csv"
    logs.write_text("user_id,date,meal_tag,food_id,portions\nu1,2020-01-01,brunch,x,1\n")
    cfg = small_config(small_data, tmp_path / "out", food_logs=str(logs))
    with pytest.raises(StageError) as info:
        run_pipeline(cfg)
    assert info.value.stage == "parse"
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["status"] == "failed" and manifest["failed_stage"] == "parse"
    assert (tmp_path / "out" / "parse" / "report.json").is_file()


def test_config_text_round_trip(tmp_path):
    cfg = PipelineConfig(food_db=str(tmp_path / "f"), food_logs=str(tmp_path / "l"),
                         output=str(tmp_path / "o"), k_scale=50.0, meal_seed=4)
    assert parse_config_text(format_config(cfg)) == cfg
    assert cfg.k("food") == 100 and cfg.k("meal") == 20 and cfg.k("diet") == 2


@pytest.mark.parametrize("text", ["k_food = 0", "bogus = 1", "strict = maybe", "w_name = 0.5",
                                  "point_weighting = squared", "no equals sign"])
def test_config_validation(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_seeds_differ_per_stage():
    cfg = PipelineConfig()
    seeds = {cfg.stage_seed(s) for s in STAGES}
    assert len(seeds) == len(STAGES)
    assert cfg.replace(meal_seed=5).stage_seed("food-embedding") == cfg.stage_seed("food-embedding")
    assert cfg.replace(meal_seed=5).stage_seed("meal-embedding") != cfg.stage_seed("meal-embedding")


def write_conf(path: Path, data: Path, out: Path, extra: str = "") -> Path:
    path.write_text(
        f"food_db = {data / 'foods.jsonl'}\nfood_logs = {data / 'logs.csv'}\noutput = {out}\n"
        "k_food = 3\nk_meal = 4\nk_diet = 2\nname_dim = 8\nmeal_dim = 8\ndiet_dim = 8\n"
        "name_min_count = 1\n" + extra)
    return path


def test_cli_round_trip(tmp_path, capsys):
    spec = tmp_path / "spec.conf"
    spec.write_text("n_food_archetypes = 3\nfoods_per_archetype = 10\nn_meal_templates = 4\n"
                    "n_users = 12\ndays_per_user = 3\nn_diet_groups = 2\n")
    data = tmp_path / "data"
    assert main(["gen-synthetic", "--spec", str(spec), "--out", str(data)]) == 0
    conf = write_conf(tmp_path / "run.conf", data, tmp_path / "out")
    assert main(["run", "--config", str(conf)]) == 0
    assert "3 food words, 4 meal words, 2 diet words" in capsys.readouterr().out
    assert main(["resume", "--stage", "diet-clustering", "--config", str(conf)]) == 0
    assert main(["report", "--output", str(tmp_path / "out")]) == 0

    changed = write_conf(tmp_path / "seed.conf", data, tmp_path / "out", "food_seed = 3\n")
    assert main(["resume", "--stage", "reports", "--config", str(changed)]) == 2
    bad = write_conf(tmp_path / "bad.conf", data, tmp_path / "out", "k_meal = -1\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.conf")]) == 2
    assert main(["resume", "--stage", "nope", "--config", str(conf)]) == 2
    assert main([]) == 2

    logs = tmp_path / "empty_logs.csv"
    logs.write_text("user_id,date,meal_tag,food_id,portions\n")
    broken = write_conf(tmp_path / "broken.conf", data, tmp_path / "out2",
                        f"food_logs = {logs}\n")
    assert main(["run", "--config", str(broken)]) == 3


def test_nvec_round_trip_and_errors(tmp_path):
    matrix = np.arange(6, dtype=float).reshape(2, 3) / 7
    write_nvec(tmp_path / "m.nvec", ["a", "ключ"], matrix)
    keys, loaded = read_nvec(tmp_path / "m.nvec")
    assert keys == ["a", "ключ"]
    np.testing.assert_array_equal(loaded, matrix.astype(np.float32))
    raw = (tmp_path / "m.nvec").read_bytes()
    assert raw[:4] == b"NVEC"
    (tmp_path / "bad.nvec").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(NvecError):
        read_nvec(tmp_path / "bad.nvec")
    (tmp_path / "short.nvec").write_bytes(raw[:-3])
    with pytest.raises(NvecError):
        read_nvec(tmp_path / "short.nvec")


@pytest.mark.slow
def test_high_sugar_archetype_has_max_sugar_profile(tmp_path):
    from dietvec.synthetic import SyntheticSpec, generate_synthetic_corpus

    corpus = generate_synthetic_corpus(SyntheticSpec(
        n_food_archetypes=8, foods_per_archetype=40, n_meal_templates=8, n_users=40,
        days_per_user=4, n_diet_groups=2, rng_seed=3))
    corpus.write(tmp_path / "data")
    cfg = small_config(tmp_path / "data", tmp_path / "out", k_food=8, k_meal=8)
    output = run_pipeline(cfg)
    fruit = [fid for fid, label in corpus.food_labels.items()
             if corpus.archetypes[label].label == "fruit"]
    words = output.foods.word_of()
    fruit_word = max(set(words[f] for f in fruit), key=[words[f] for f in fruit].count)
    with open(Path(cfg.output) / "reports" / "profiles.csv") as fh:
        sugar = {int(row["cluster_id"]): float(row["sugar"]) for row in csv.DictReader(fh)}
    assert sugar[fruit_word] == max(sugar.values())
