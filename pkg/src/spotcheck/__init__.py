"""Benchmark toolkit for blindspot discovery in image classifiers.

Generates synthetic image datasets with known induced blindspots, trains
or simulates classifiers on them, runs a 2D-embedding + mixture-clustering
discovery method, and scores hypothesized blindspots against ground truth.
"""

from .backend import BACKEND_NAME
from .blindspots import (
    BlindspotSet,
    BlindspotSpec,
    matches,
    sample_blindspot,
    sample_blindspot_set,
    validate_blindspot,
    validate_blindspot_set,
)
from .cluster import (
    GmmFit,
    Hypothesis,
    HypothesizedBlindspotList,
    PlanespotConfig,
    PlanespotResult,
    build_features,
    fit_gmm,
    planespot,
    rank_clusters,
    read_hypotheses,
    select_k_bic,
    write_hypotheses,
)
from .embed import (
    Embedding2D,
    Reducer,
    ReducerConfig,
    fit_reducer,
    normalize_unit_square,
    reduce_pca2,
)
from .metrics import (
    MetricReport,
    MetricThresholds,
    aggregate,
    bp,
    br,
    compute_report,
    covers,
    dr,
    failure_breakdown,
    fdr,
)
from .scenegen import (
    DatasetSpec,
    RenderConfig,
    SceneDescription,
    Triplet,
    render,
    sample_dataset_spec,
    sample_scene,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "BlindspotSet",
    "BlindspotSpec",
    "DatasetSpec",
    "Embedding2D",
    "GmmFit",
    "Hypothesis",
    "HypothesizedBlindspotList",
    "MetricReport",
    "MetricThresholds",
    "PlanespotConfig",
    "PlanespotResult",
    "Reducer",
    "ReducerConfig",
    "RenderConfig",
    "SceneDescription",
    "Triplet",
    "aggregate",
    "bp",
    "br",
    "build_features",
    "compute_report",
    "covers",
    "dr",
    "failure_breakdown",
    "fdr",
    "fit_gmm",
    "fit_reducer",
    "matches",
    "normalize_unit_square",
    "planespot",
    "rank_clusters",
    "read_hypotheses",
    "reduce_pca2",
    "render",
    "sample_blindspot",
    "sample_blindspot_set",
    "sample_dataset_spec",
    "sample_scene",
    "select_k_bic",
    "validate_blindspot",
    "validate_blindspot_set",
    "write_hypotheses",
    "__version__",
]
