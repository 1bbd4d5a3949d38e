"""Food, meal and diet embeddings with named clusters at every level."""

from .cluster import ClusterConfig, Clustering, assign, kmeans_fit, kmeans_init
from .corpus import (
    DietDocument,
    FoodEntry,
    FoodLogEntry,
    FoodTable,
    LogTable,
    Meal,
    NutrientVector,
    assemble_diets,
    assemble_meals,
    parse_food_database,
    parse_food_logs,
)
from .docembed import DocVectorTable, TokenDocument, infer_doc_vector, train_dbow
from .naming import ClusterName, extract_ngrams, name_clusters
from .pipeline import PipelineConfig, PipelineOutput, resume, run_pipeline
from .synthetic import SyntheticSpec, generate_synthetic_corpus
from .textembed import EmbedConfig, WordVectorTable, build_vocabulary, embed_name, tokenize, train_word_vectors
from .vectorize import (
    BlockWeights,
    FoodVector,
    RobustScaler,
    compose_food_vector,
    fit_robust_scaler,
    per_calorie,
    standardize_winsorize,
)

__version__ = "0.1.0"
