from __future__ import annotations

from pathlib import Path

import pytest

from dietvec.pipeline import PipelineConfig
from dietvec.synthetic import SyntheticSpec, generate_synthetic_corpus

SMALL_SPEC = SyntheticSpec(
    n_food_archetypes=3,
    foods_per_archetype=20,
    n_meal_templates=4,
    n_users=30,
    days_per_user=6,
    n_diet_groups=2,
    rng_seed=7,
)


def small_config(data_dir: Path, output: Path, **overrides) -> PipelineConfig:
    """Tiny dimensions keep end-to-end runs to a few seconds."""
    values = dict(
        food_db=str(data_dir / "foods.jsonl"),
        food_logs=str(data_dir / "logs.csv"),
        output=str(output),
        k_food=3, k_meal=4, k_diet=2,
        name_dim=16, meal_dim=16, diet_dim=16,
        name_min_count=1,
    )
    values.update(overrides)
    return PipelineConfig(**values)


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic_corpus(SMALL_SPEC)


@pytest.fixture(scope="session")
def small_data(tmp_path_factory, small_corpus) -> Path:
    directory = tmp_path_factory.mktemp("small_data")
    small_corpus.write(directory)
    return directory
