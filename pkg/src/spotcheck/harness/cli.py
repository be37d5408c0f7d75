"""Command-line entry point.

Pipeline:  gen -> train -> discover -> eval -> report   (sweep is optional
tuning between train and discover). Every subcommand takes --out (the suite
directory), --seed, and --config, a TOML or JSON file whose sections
override the built-in defaults:

  [suite]       count, model_kind, materialize, split_sizes, ...
  [train]       learning_rate, max_epochs, patience, ...
  [oracle]      epsilon, jitter, confidence_noise
  [verify]      mode, accuracy_outside, accuracy_inside, recall_gap
  [planespot]   w, k_max, n_init, k_return, use_pca, [planespot.reducer]
  [thresholds]  lambda_p, lambda_r
  [sweep]       w_grid

Exit status: 0 on success, 2 on validation or configuration errors, 3 on
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..cluster import PlanespotConfig
from ..errors import ConfigError, NumericsError, UnverifiedEC, ValidationError
from ..metrics import MetricThresholds
from ..models import OracleConfig, TrainConfig, VerifyThresholds
from .run import (
    build_report,
    discover_ec,
    eval_run,
    prepare_model,
    sweep_weight,
)
from .suite import SuiteConfig, ec_dir, generate_ec_suite, load_suite


def load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        if p.suffix == ".json":
            return json.loads(p.read_text(encoding="utf-8"))
        try:
            import tomllib as toml
        except ModuleNotFoundError:
            import tomli as toml
        with open(p, "rb") as f:
            return toml.load(f)
    except (json.JSONDecodeError, ValueError) as e:
        raise ConfigError(f"could not parse {p}: {e}") from e


def section(cfg: dict, name: str) -> dict:
    value = cfg.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"config section [{name}] must be a table, got {type(value).__name__}")
    return value


def make_thresholds(cfg: dict) -> MetricThresholds:
    return MetricThresholds.from_json(section(cfg, "thresholds"))


def make_planespot(cfg: dict) -> PlanespotConfig:
    return PlanespotConfig.from_json(section(cfg, "planespot"))


def make_oracle(cfg: dict) -> OracleConfig:
    return OracleConfig.from_json(section(cfg, "oracle"))


def select_ecs(suite_dir: Path, wanted: list[str] | None):
    _, ecs = load_suite(suite_dir)
    if not wanted:
        return ecs, False
    by_id = {ec.id: ec for ec in ecs}
    missing = [w for w in wanted if w not in by_id]
    if missing:
        raise ConfigError(f"unknown EC id(s) {missing}; suite has {sorted(by_id)}")
    return [by_id[w] for w in wanted], True


def cmd_gen(args) -> int:
    cfg = load_config_file(args.config)
    base = dict(section(cfg, "suite"))
    if args.count is not None:
        base["count"] = args.count
    if args.model is not None:
        base["model_kind"] = args.model
    if args.materialize is not None:
        base["materialize"] = args.materialize
    suite_cfg = SuiteConfig.from_json(base)
    ecs = generate_ec_suite(args.out, suite_cfg, master_seed=args.seed)
    for ec in ecs:
        sizes = [len(b.triplets) for b in ec.blindspots.blindspots]
        print(f"{ec.id}  blindspots={ec.m}  triplets={sizes}  attempt={ec.attempt}")
    print(f"suite of {len(ecs)} ECs ({suite_cfg.model_kind}, {suite_cfg.materialize}) at {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config_file(args.config)
    suite_dir = Path(args.out)
    ecs, _ = select_ecs(suite_dir, args.ec)
    train_section = section(cfg, "train")
    verify_section = section(cfg, "verify")
    verify_thresholds = VerifyThresholds(**verify_section)
    failed = 0
    for ec in ecs:
        train_cfg = None
        if ec.model_kind == "trained":
            train_cfg = TrainConfig.from_json({"resolution": ec.resolution, **train_section})
            if args.seed is not None:
                import dataclasses

                ec = dataclasses.replace(
                    ec, seeds=dataclasses.replace(ec.seeds, training=args.seed)
                )
        report = prepare_model(
            ec_dir(suite_dir, ec.id),
            ec,
            train_cfg=train_cfg,
            oracle_cfg=make_oracle(cfg),
            verify_thresholds=verify_thresholds,
            force=args.force,
        )
        n_ok = sum(report.verified)
        status = "ok" if report.all_verified else "UNVERIFIED"
        print(
            f"{ec.id}  verified={n_ok}/{len(report.verified)}  "
            f"acc_out={report.accuracy_outside:.3f}  {status}"
        )
        failed += 0 if report.all_verified else 1
    print(f"{len(ecs) - failed}/{len(ecs)} ECs verified")
    return 0


def cmd_discover(args) -> int:
    cfg = load_config_file(args.config)
    suite_dir = Path(args.out)
    ecs, explicit = select_ecs(suite_dir, args.ec)
    ps_cfg = make_planespot(cfg)
    for ec in ecs:
        try:
            run_dir = discover_ec(
                ec_dir(suite_dir, ec.id),
                ec,
                ps_cfg=ps_cfg,
                import_path=args.import_path,
                oracle_cfg=make_oracle(cfg) if ec.model_kind == "oracle" else None,
                seed=args.seed,
            )
        except UnverifiedEC as e:
            if explicit:
                raise
            print(f"{ec.id}  skipped: {e}")
            continue
        print(f"{ec.id}  {run_dir.relative_to(suite_dir)}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config_file(args.config)
    suite_dir = Path(args.out)
    ecs, explicit = select_ecs(suite_dir, args.ec)
    thresholds = make_thresholds(cfg)
    n_scored = 0
    for ec in ecs:
        directory = ec_dir(suite_dir, ec.id)
        if args.import_path:
            try:
                run_dirs = [
                    discover_ec(
                        directory,
                        ec,
                        import_path=args.import_path,
                        oracle_cfg=make_oracle(cfg) if ec.model_kind == "oracle" else None,
                    )
                ]
            except UnverifiedEC as e:
                if explicit:
                    raise
                print(f"{ec.id}  skipped: {e}")
                continue
        elif args.run:
            run_dirs = [directory / "runs" / args.run]
            if not run_dirs[0].exists():
                raise ConfigError(f"{run_dirs[0]} does not exist")
        else:
            runs_root = directory / "runs"
            run_dirs = sorted(
                p
                for p in (runs_root.iterdir() if runs_root.exists() else [])
                if p.is_dir() and not (p / "record.json").exists()
            )
        for run_dir in run_dirs:
            record = eval_run(directory, ec, run_dir, thresholds=thresholds, suite_dir=suite_dir)
            fdr = "none" if record.report.fdr is None else f"{record.report.fdr:.3f}"
            print(
                f"{ec.id}  {record.run_id}  dr={record.report.dr:.3f}  fdr={fdr}  "
                f"hyps={record.report.n_hypotheses}"
            )
            n_scored += 1
    print(f"scored {n_scored} run(s); records appended to {suite_dir / 'results.jsonl'}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config_file(args.config)
    suite_dir = Path(args.out)
    ecs, explicit = select_ecs(suite_dir, args.ec)
    if args.grid:
        w_grid = tuple(float(x) for x in args.grid.split(","))
    else:
        w_grid = tuple(section(cfg, "sweep").get("w_grid", (0.0, 0.01, 0.025, 0.05, 0.1, 0.2)))
    usable = []
    for ec in ecs:
        if ec.verified is not None and all(ec.verified):
            usable.append(ec)
        elif explicit:
            raise UnverifiedEC(f"EC {ec.id} is not verified; train it first")
        else:
            print(f"{ec.id}  skipped: unverified")
    if not usable:
        raise ConfigError("no verified ECs to sweep over")
    rows, best_w = sweep_weight(
        suite_dir,
        usable,
        w_grid=w_grid,
        ps_cfg=make_planespot(cfg),
        thresholds=make_thresholds(cfg),
        oracle_cfg=make_oracle(cfg),
    )
    for row in rows:
        fdr = row.get("fdr_mean")
        fdr_s = "none" if fdr is None else f"{fdr:.3f}"
        print(f"w={row['w']:<7g} dr={row['dr_mean']:.3f} +/- {row['dr_standard_error']:.3f}  fdr={fdr_s}")
    print(f"best w={best_w} over {len(usable)} ECs -> {suite_dir / 'sweep.csv'}")
    return 0


def cmd_report(args) -> int:
    suite_dir = Path(args.out)
    tables = build_report(suite_dir, out_dir=args.report_dir)
    for row in tables["methods"]:
        fdr = row.get("fdr_mean")
        fdr_s = "none" if fdr is None else f"{fdr:.3f} +/- {row['fdr_standard_error']:.3f}"
        print(
            f"{row['bdm']}/{row['config']}  n={row['n_ecs']}  "
            f"dr={row['dr_mean']:.3f} +/- {row['dr_standard_error']:.3f}  fdr={fdr_s}"
        )
    out = Path(args.report_dir) if args.report_dir else suite_dir / "report"
    print(f"tables written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spotcheck",
        description="Synthetic benchmark harness for blindspot discovery methods.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=None):
        p.add_argument("--out", required=True, help="suite directory")
        p.add_argument("--seed", type=int, default=seed_default, help="seed override")
        p.add_argument("--config", default=None, help="TOML or JSON config file")

    p = sub.add_parser("gen", help="generate an EC suite")
    common(p, seed_default=0)
    p.add_argument("--count", type=int, default=None, help="number of ECs")
    p.add_argument("--model", choices=["oracle", "trained"], default=None)
    p.add_argument("--materialize", choices=["spec", "scenes", "images"], default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="fit and verify each EC's model")
    common(p)
    p.add_argument("--ec", action="append", default=None, help="restrict to an EC id (repeatable)")
    p.add_argument("--force", action="store_true", help="refit even if a model exists")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("discover", help="run discovery (or stage an imported hypothesis list)")
    common(p)
    p.add_argument("--ec", action="append", default=None)
    p.add_argument(
        "--import",
        dest="import_path",
        default=None,
        metavar="JSON",
        help="hypothesis list produced by an external method",
    )
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("eval", help="score discoveries against ground truth")
    common(p)
    p.add_argument("--ec", action="append", default=None)
    p.add_argument("--run", default=None, help="score one specific run id")
    p.add_argument(
        "--import",
        dest="import_path",
        default=None,
        metavar="JSON",
        help="import and score an external hypothesis list in one step",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="tune the error-confidence weight on a suite")
    common(p)
    p.add_argument("--ec", action="append", default=None)
    p.add_argument("--grid", default=None, help="comma-separated weights")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="aggregate persisted runs into tables")
    common(p)
    p.add_argument("--report-dir", default=None, help="where to write tables")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericsError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
