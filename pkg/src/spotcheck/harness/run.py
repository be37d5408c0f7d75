"""Experiment execution over persisted ECs.

Three stages, each resumable from disk:

  prepare_model  train (or instantiate) the EC's model and verify that it
                 learned exactly the induced blindspots on the validation
                 split; writes models/induction.json
  run_ec         compute outputs on positive test images, run the discovery
                 method (or score an imported hypothesis list), and append
                 an immutable RunRecord
  sweep/report   grid-search the error-weight over a suite and aggregate
                 persisted runs into summary tables

Runs are append-only: each gets a fresh numbered directory under runs/ and
one line in the suite-level results.jsonl, never overwriting earlier runs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..backend import BACKEND_NAME
from ..cluster import (
    HypothesizedBlindspotList,
    PlanespotConfig,
    build_features,
    planespot,
    rank_clusters,
    read_hypotheses,
    select_k_bic,
    write_hypotheses,
)
from ..embed import fit_reducer, reduce_pca2, write_embedding_csv
from ..errors import ConfigError, UnverifiedEC
from ..metrics import (
    BlindspotRecord,
    MetricReport,
    MetricThresholds,
    aggregate,
    by_triplet_count,
    factor_grouping,
    has_attribute,
    has_key,
    mean_failure_fractions,
    compute_report,
    FAILURE_CATEGORIES,
)
from ..models import (
    CnnModel,
    InductionReport,
    ModelOutputs,
    OracleConfig,
    OracleModel,
    TrainConfig,
    VerifyThresholds,
    induce_labels,
    membership_matrix,
    read_outputs_csv,
    train_classifier,
    verify_induction,
    write_outputs_csv,
)
from ..scenegen.io import canonical_json, read_json, write_json
from .suite import (
    ExperimentConfiguration,
    ec_dir,
    load_ec,
    load_split_scenes,
    load_truth,
    positive_scenes,
    split_images,
)

MODEL_FILE = "model.npz"
INDUCTION_FILE = "induction.json"


def config_hash(obj: dict) -> str:
    """Short stable digest of a config's canonical JSON."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:12]


def file_hash(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:12]


@dataclass(frozen=True)
class RunRecord:
    """One scored discovery run, reconstructible from this record plus the
    EC manifest and persisted model."""

    run_id: str
    ec_id: str
    bdm: str
    bdm_config: dict | None  # None for imported hypothesis lists
    config_hash: str
    seed: int | None
    n_inputs: int
    duration_s: float
    backend: str
    report: MetricReport

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "ec_id": self.ec_id,
            "bdm": self.bdm,
            "bdm_config": self.bdm_config,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "n_inputs": self.n_inputs,
            "duration_s": self.duration_s,
            "backend": self.backend,
            "report": self.report.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RunRecord":
        return cls(
            run_id=obj["run_id"],
            ec_id=obj["ec_id"],
            bdm=obj["bdm"],
            bdm_config=obj["bdm_config"],
            config_hash=obj["config_hash"],
            seed=obj["seed"],
            n_inputs=obj["n_inputs"],
            duration_s=obj["duration_s"],
            backend=obj["backend"],
            report=MetricReport.from_json(obj["report"]),
        )


def prepare_model(
    directory: Path,
    ec: ExperimentConfiguration,
    train_cfg: TrainConfig | None = None,
    oracle_cfg: OracleConfig | None = None,
    verify_thresholds: VerifyThresholds = VerifyThresholds(),
    force: bool = False,
) -> InductionReport:
    """Build the EC's model and verify blindspot induction on val.

    Trained ECs fit the small conv net on flipped labels and persist it;
    oracle ECs only persist the oracle config. Either way the verification
    outcome lands in models/induction.json and is returned.
    """
    directory = Path(directory)
    models_dir = directory / "models"
    induction_path = models_dir / INDUCTION_FILE
    if induction_path.exists() and not force:
        return InductionReport.from_json(read_json(induction_path))
    models_dir.mkdir(parents=True, exist_ok=True)

    val_scenes = load_split_scenes(directory, "val")
    val_membership = membership_matrix(val_scenes, ec.blindspots)
    val_split = induce_labels(val_scenes, ec.blindspots, "val")

    if ec.model_kind == "trained":
        cfg = train_cfg or TrainConfig(resolution=ec.resolution)
        train_scenes = load_split_scenes(directory, "train")
        train_split = induce_labels(train_scenes, ec.blindspots, "train")
        train_images = split_images(directory, ec, train_scenes, "train")
        val_images = split_images(directory, ec, val_scenes, "val")
        model = train_classifier(
            train_images,
            train_split.training_labels,
            val_images,
            val_split.training_labels,
            cfg,
            seed=ec.seeds.training,
        )
        model.save(models_dir / MODEL_FILE)
        write_json(models_dir / "train_config.json", cfg.to_json())
        confidences = model.confidence(val_images)
    elif ec.model_kind == "oracle":
        cfg = oracle_cfg or OracleConfig()
        oracle = OracleModel(ec.spec, ec.blindspots, cfg, seed=ec.seeds.training)
        write_json(models_dir / "oracle_config.json", cfg.to_json())
        confidences = oracle.outputs(val_scenes).confidences
    else:
        raise ConfigError(f"unknown model kind {ec.model_kind!r}")

    report = verify_induction(
        confidences, val_split.clean_labels, val_membership, verify_thresholds
    )
    write_json(induction_path, report.to_json())
    return report


def load_induction(directory: Path) -> InductionReport:
    path = Path(directory) / "models" / INDUCTION_FILE
    if not path.exists():
        raise UnverifiedEC(
            f"{path} missing: prepare the EC's model before running discovery"
        )
    return InductionReport.from_json(read_json(path))


def require_verified(directory: Path, ec: ExperimentConfiguration) -> InductionReport:
    report = load_induction(directory)
    if not report.all_verified:
        failing = [i for i, ok in enumerate(report.verified) if not ok]
        raise UnverifiedEC(
            f"EC {ec.id}: blindspot(s) {failing} failed induction verification; "
            f"excluded from evaluation"
        )
    return report


def model_outputs_for(
    directory: Path,
    ec: ExperimentConfiguration,
    split: str = "test",
    oracle_cfg: OracleConfig | None = None,
    positives_only: bool = True,
) -> ModelOutputs:
    """Representations and confidences on the split's (positive) images."""
    directory = Path(directory)
    scenes = load_split_scenes(directory, split)
    if positives_only:
        scenes = positive_scenes(scenes)
    if ec.model_kind == "oracle":
        cfg_path = directory / "models" / "oracle_config.json"
        cfg = oracle_cfg or (
            OracleConfig.from_json(read_json(cfg_path)) if cfg_path.exists() else OracleConfig()
        )
        oracle = OracleModel(ec.spec, ec.blindspots, cfg, seed=ec.seeds.training)
        return oracle.outputs(scenes)
    model = CnnModel.load(directory / "models" / MODEL_FILE)
    images = split_images(directory, ec, scenes, split)
    return ModelOutputs(
        image_ids=tuple(s.image_id for s in scenes),
        representations=model.represent(images),
        confidences=model.confidence(images),
    )


def next_run_id(runs_dir: Path, prefix: str) -> str:
    existing = 0
    if runs_dir.exists():
        existing = sum(1 for p in runs_dir.iterdir() if p.name.startswith(prefix + "-"))
    return f"{prefix}-{existing:03d}"


def append_result_line(suite_dir: Path, record: RunRecord) -> None:
    path = Path(suite_dir) / "results.jsonl"
    with open(path, "a", encoding="utf-8") as f:
        f.write(canonical_json(record.to_json()) + "\n")


def discover_ec(
    directory: Path,
    ec: ExperimentConfiguration,
    ps_cfg: PlanespotConfig = PlanespotConfig(),
    bdm: str = "planespot",
    import_path: Path | None = None,
    oracle_cfg: OracleConfig | None = None,
    check_verified: bool = True,
    seed: int | None = None,
) -> Path:
    """Produce a hypothesis list for one EC and persist it unscored.

    Runs the built-in method on the model's positive-test outputs, or, with
    import_path, validates and stages an externally produced hypothesis
    list (JSON) against the same inputs. Returns the new run directory.
    The method seed defaults to the EC's recorded one; either way the seed
    used is persisted with the run.
    """
    directory = Path(directory)
    t0 = time.perf_counter()
    if check_verified:
        require_verified(directory, ec)
    outputs = model_outputs_for(directory, ec, oracle_cfg=oracle_cfg)
    effective_seed = ec.seeds.bdm if seed is None else int(seed)

    result = None
    if import_path is not None:
        untruncated = read_hypotheses(import_path, known_ids=outputs.image_ids)
        chash = file_hash(import_path)
        bdm_config = None
        effective_seed = None
        if bdm == "planespot":
            bdm = "import"
    else:
        result = planespot(outputs, ps_cfg, seed=effective_seed)
        untruncated = result.untruncated
        chash = config_hash(ps_cfg.to_json())
        bdm_config = ps_cfg.to_json()

    runs_dir = directory / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    run_id = next_run_id(runs_dir, f"{bdm}-{chash}")
    run_dir = runs_dir / run_id
    run_dir.mkdir(parents=True)
    write_hypotheses(run_dir / "hypotheses.json", untruncated)
    write_outputs_csv(run_dir / "outputs.csv", outputs)
    if result is not None:
        write_embedding_csv(
            run_dir / "embedding.csv", outputs.image_ids, result.embedding, outputs.confidences
        )
    write_json(
        run_dir / "discovery.json",
        {
            "run_id": run_id,
            "ec_id": ec.id,
            "bdm": bdm,
            "bdm_config": bdm_config,
            "config_hash": chash,
            "seed": effective_seed,
            "n_inputs": len(outputs.image_ids),
            "duration_s": time.perf_counter() - t0,
            "backend": BACKEND_NAME,
        },
    )
    return run_dir


def eval_run(
    directory: Path,
    ec: ExperimentConfiguration,
    run_dir: Path,
    thresholds: MetricThresholds = MetricThresholds(),
    suite_dir: Path | None = None,
) -> RunRecord:
    """Score a persisted discovery against ground truth and append the
    RunRecord. Scoring truncates to the method's report budget; the full
    list stays on disk."""
    directory = Path(directory)
    run_dir = Path(run_dir)
    disc = read_json(run_dir / "discovery.json")
    known_ids = read_outputs_csv(run_dir / "outputs.csv").image_ids
    untruncated = read_hypotheses(run_dir / "hypotheses.json", known_ids=known_ids)
    k_return = (
        disc["bdm_config"]["k_return"] if disc["bdm_config"] else PlanespotConfig().k_return
    )
    report = compute_report(
        untruncated.truncated(k_return), load_truth(directory, "test"), thresholds
    )
    record = RunRecord(
        run_id=disc["run_id"],
        ec_id=disc["ec_id"],
        bdm=disc["bdm"],
        bdm_config=disc["bdm_config"],
        config_hash=disc["config_hash"],
        seed=disc["seed"],
        n_inputs=disc["n_inputs"],
        duration_s=disc["duration_s"],
        backend=disc["backend"],
        report=report,
    )
    write_json(run_dir / "record.json", record.to_json())
    append_result_line(suite_dir or directory.parent, record)
    return record


def run_ec(
    directory: Path,
    ec: ExperimentConfiguration,
    ps_cfg: PlanespotConfig = PlanespotConfig(),
    thresholds: MetricThresholds = MetricThresholds(),
    bdm: str = "planespot",
    import_path: Path | None = None,
    oracle_cfg: OracleConfig | None = None,
    check_verified: bool = True,
    suite_dir: Path | None = None,
    seed: int | None = None,
) -> RunRecord:
    """Discover and score in one step."""
    run_dir = discover_ec(
        directory,
        ec,
        ps_cfg=ps_cfg,
        bdm=bdm,
        import_path=import_path,
        oracle_cfg=oracle_cfg,
        check_verified=check_verified,
        seed=seed,
    )
    return eval_run(directory, ec, run_dir, thresholds=thresholds, suite_dir=suite_dir)


def reproduce_run(
    directory: Path, ec: ExperimentConfiguration, record: RunRecord
) -> tuple[MetricReport, bool]:
    """Recompute a persisted run's MetricReport from the EC manifest and the
    persisted model; True iff it matches the record byte-for-byte."""
    directory = Path(directory)
    outputs = model_outputs_for(directory, ec)
    truths = load_truth(directory, "test")
    if record.bdm_config is not None:
        ps_cfg = PlanespotConfig.from_json(record.bdm_config)
        result = planespot(outputs, ps_cfg, seed=record.seed)
        scored = result.untruncated.truncated(ps_cfg.k_return)
    else:
        hyp_path = directory / "runs" / record.run_id / "hypotheses.json"
        scored = read_hypotheses(hyp_path, known_ids=outputs.image_ids).truncated(
            PlanespotConfig().k_return
        )
    report = compute_report(scored, truths, record.report.thresholds)
    return report, report.canonical() == record.report.canonical()


def sweep_weight(
    suite_dir: Path,
    ecs: list[ExperimentConfiguration],
    w_grid: tuple[float, ...] = (0.0, 0.01, 0.025, 0.05, 0.1, 0.2),
    ps_cfg: PlanespotConfig = PlanespotConfig(),
    thresholds: MetricThresholds = MetricThresholds(),
    oracle_cfg: OracleConfig | None = None,
) -> tuple[list[dict], float]:
    """Grid-search the error-confidence weight over a tuning suite.

    The 2D reduction is independent of the weight, so it is fitted once per
    EC and shared across the grid. Returns per-weight aggregate rows and the
    winning weight (highest mean discovery rate, false-discovery rate as the
    tiebreak, then the smaller weight).
    """
    suite_dir = Path(suite_dir)
    per_w_dr: dict[float, list[float]] = {w: [] for w in w_grid}
    per_w_fdr: dict[float, list[float]] = {w: [] for w in w_grid}
    for ec in ecs:
        directory = ec_dir(suite_dir, ec.id)
        require_verified(directory, ec)
        outputs = model_outputs_for(directory, ec, oracle_cfg=oracle_cfg)
        truths = load_truth(directory, "test")
        reps = outputs.representations
        if ps_cfg.use_pca:
            embedding = reduce_pca2(reps)
        else:
            embedding = fit_reducer(reps, ps_cfg.reducer, seed=ec.seeds.bdm).embed(reps)
        n = len(outputs.image_ids)
        k_max = min(ps_cfg.k_max, n - 1)
        for w in w_grid:
            feats = build_features(embedding.normalized, outputs.confidences, w)
            fit = select_k_bic(feats.r, k_max, seed=ec.seeds.bdm, n_init=ps_cfg.n_init)
            full = rank_clusters(
                fit,
                outputs.confidences,
                error_threshold=ps_cfg.error_threshold,
                image_ids=outputs.image_ids,
            )
            report = compute_report(full.truncated(ps_cfg.k_return), truths, thresholds)
            per_w_dr[w].append(report.dr)
            if report.fdr is not None:
                per_w_fdr[w].append(report.fdr)

    rows = []
    for w in w_grid:
        dr_agg = aggregate(per_w_dr[w])
        fdrs = per_w_fdr[w]
        row = {"w": w, "n_ecs": len(per_w_dr[w]), **{f"dr_{k}": v for k, v in dr_agg.items()}}
        if fdrs:
            row.update({f"fdr_{k}": v for k, v in aggregate(fdrs).items()})
            row["n_fdr"] = len(fdrs)
        else:
            row.update({"fdr_mean": None, "n_fdr": 0})
        rows.append(row)

    def sort_key(row):
        fdr_mean = row.get("fdr_mean")
        return (-row["dr_mean"], np.inf if fdr_mean is None else fdr_mean, row["w"])

    best_w = sorted(rows, key=sort_key)[0]["w"]
    write_csv(suite_dir / "sweep.csv", rows)
    write_json(suite_dir / "sweep.json", {"w_grid": list(w_grid), "best_w": best_w})
    return rows, best_w


def write_csv(path: Path, rows: list[dict]) -> None:
    """Write dict rows with a union header; missing cells stay empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header: list[str] = []
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)


def read_results(suite_dir: Path) -> list[RunRecord]:
    path = Path(suite_dir) / "results.jsonl"
    if not path.exists():
        return []
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(RunRecord.from_json(json.loads(line)))
    return records


FACTOR_PREDICATES = {
    "has_relative_position": has_key("Background", "RelativePosition"),
    "has_texture": has_attribute("Texture"),
    "has_size": has_attribute("Size"),
    "has_color": has_attribute("Color"),
}


def build_report(suite_dir: Path, out_dir: Path | None = None) -> dict:
    """Aggregate persisted runs into summary tables (written as CSV).

    methods         one row per (method, config) pair: DR and FDR with
                    standard errors across ECs
    by_m            DR grouped by the EC's number of induced blindspots
    by_triplets     per-blindspot cover rate grouped by definition size
    factors         per-blindspot cover rate for canned definition factors
    failures        mean failure-mode fractions over ECs with DR < 1
    """
    suite_dir = Path(suite_dir)
    out = Path(out_dir) if out_dir else suite_dir / "report"
    records = read_results(suite_dir)
    if not records:
        raise ConfigError(f"no persisted runs under {suite_dir}")

    manifests: dict[str, ExperimentConfiguration] = {}
    for rec in records:
        if rec.ec_id not in manifests:
            manifests[rec.ec_id] = load_ec(ec_dir(suite_dir, rec.ec_id))

    groups: dict[tuple[str, str], list[RunRecord]] = {}
    for rec in records:
        groups.setdefault((rec.bdm, rec.config_hash), []).append(rec)

    method_rows, by_m_rows, by_t_rows, factor_rows, failure_rows = [], [], [], [], []
    for (bdm, chash), recs in sorted(groups.items()):
        drs = [r.report.dr for r in recs]
        fdrs = [r.report.fdr for r in recs if r.report.fdr is not None]
        row = {
            "bdm": bdm,
            "config": chash,
            "n_ecs": len(recs),
            **{f"dr_{k}": v for k, v in aggregate(drs).items()},
        }
        if fdrs:
            row.update({f"fdr_{k}": v for k, v in aggregate(fdrs).items()})
            row["n_fdr"] = len(fdrs)
        method_rows.append(row)

        per_m: dict[int, list[float]] = {}
        blindspot_records: list[BlindspotRecord] = []
        for rec in recs:
            ec = manifests[rec.ec_id]
            per_m.setdefault(ec.m, []).append(rec.report.dr)
            for i, b in enumerate(ec.blindspots.blindspots):
                blindspot_records.append(
                    BlindspotRecord(
                        ec_id=rec.ec_id,
                        blindspot_id=b.id,
                        triplets=b.triplets,
                        br=rec.report.per_truth_br[i],
                        covered=rec.report.covered[i],
                    )
                )
        for m, vals in sorted(per_m.items()):
            by_m_rows.append(
                {"bdm": bdm, "config": chash, "m": m, "n_ecs": len(vals), **aggregate(vals)}
            )
        for size, stats in sorted(
            factor_grouping(blindspot_records, by_triplet_count).items()
        ):
            by_t_rows.append({"bdm": bdm, "config": chash, "triplets": size, **stats})
        for name, pred in FACTOR_PREDICATES.items():
            for label, stats in sorted(factor_grouping(blindspot_records, pred).items()):
                factor_rows.append(
                    {"bdm": bdm, "config": chash, "factor": name, "value": label, **stats}
                )

        partial = [
            r.report.failure_fractions for r in recs if r.report.dr < 1.0
        ]
        fractions = mean_failure_fractions([f for f in partial if f is not None])
        if fractions is not None:
            failure_rows.append(
                {
                    "bdm": bdm,
                    "config": chash,
                    "n_ecs": len(partial),
                    **{cat: fractions[cat] for cat in FAILURE_CATEGORIES},
                }
            )

    tables = {
        "methods": method_rows,
        "by_m": by_m_rows,
        "by_triplets": by_t_rows,
        "factors": factor_rows,
        "failures": failure_rows,
    }
    for name, rows in tables.items():
        if rows:
            write_csv(out / f"{name}.csv", rows)
    return tables
