"""Experiment harness: suite generation, model preparation, discovery runs,
scoring, weight sweeps, and report tables."""

from .run import (
    RunRecord,
    build_report,
    config_hash,
    discover_ec,
    eval_run,
    load_induction,
    model_outputs_for,
    prepare_model,
    read_results,
    reproduce_run,
    require_verified,
    run_ec,
    sweep_weight,
)
from .suite import (
    EcSeeds,
    ExperimentConfiguration,
    SuiteConfig,
    derive_seed,
    ec_dir,
    generate_ec_suite,
    load_ec,
    load_split_scenes,
    load_suite,
    load_truth,
    positive_scenes,
    sample_ec,
    split_images,
    truth_members,
)

__all__ = [
    "EcSeeds",
    "ExperimentConfiguration",
    "RunRecord",
    "SuiteConfig",
    "build_report",
    "config_hash",
    "derive_seed",
    "discover_ec",
    "ec_dir",
    "eval_run",
    "generate_ec_suite",
    "load_ec",
    "load_induction",
    "load_split_scenes",
    "load_suite",
    "load_truth",
    "model_outputs_for",
    "positive_scenes",
    "prepare_model",
    "read_results",
    "reproduce_run",
    "require_verified",
    "run_ec",
    "sample_ec",
    "split_images",
    "sweep_weight",
    "truth_members",
]
