"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 5 property-check failure. Errors are reported on one line as
``error: <category>: <detail>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ClassSpecError, ConfigError, CorpusError, OutOfScopeError, PropertyCheckError, StageError
from .evaluate import METRICS, EvaluationReport, score
from .io import read_config, read_csv, write_corpus, write_csv
from .pca import fit_pca
from .pipelines import TASKS, ExperimentConfig, run_experiment, synthesize

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL, EXIT_PROPERTY = 0, 2, 3, 4, 5

logger = logging.getLogger("mdfusion")


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out_dir(args, fallback: str | None = None) -> Path:
    d = Path(args.out or fallback or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _load_config(args, task: str | None) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("--config is required")
    mapping = read_config(args.config)
    return ExperimentConfig.from_mapping(mapping, task=task, base_dir=Path(args.config).parent)


def cmd_task(args) -> int:
    cfg = _load_config(args, args.command)
    result = run_experiment(cfg, args.seed)
    out = _out_dir(args, cfg.output)
    _dump_json(out / "report.json", result.report)
    _dump_json(out / "predictor.json", result.predictor.describe(include_data=True))
    _dump_json(out / "timing.json", {"fit_seconds": result.seconds})
    if result.predictions is not None:
        write_csv(out / "predictions.csv", {"y": result.predictions})
    ev = result.report["evaluation"]
    card = result.report["cardinalities"]
    summary = f"{cfg.task}: L1={card['L1']} L2={card['L2']} U={card['U']}"
    if ev is not None:
        summary += f" {ev['metric']}={ev['value']:.6g} on {ev['n_test']} test rows"
    print(summary)
    for note in result.report["notes"]:
        print(f"note: {note}")
    logger.info("fit took %.3f s; outputs in %s", result.seconds, out)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _load_config(args, "fit")
    if not cfg.model:
        raise ConfigError("synth needs a model.* spec")
    corpus, test = synthesize(cfg, args.seed)
    out = _out_dir(args, cfg.output)
    paths = write_corpus(out, corpus)
    if test is not None:
        paths.append(out / "test.csv")
        write_csv(paths[-1], test)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_pca(args) -> int:
    if not args.input:
        raise ConfigError("--input is required")
    if args.dim is None:
        raise ConfigError("--dim is required")
    data = read_csv(args.input, (args.role,))
    p = fit_pca(data[args.role], args.dim)
    data[args.role] = p.transform(data[args.role])
    out = _out_dir(args)
    stem = Path(args.input).stem
    write_csv(out / f"{stem}_pca.csv", data)
    _dump_json(out / f"{stem}_pca_{args.role}.json", p.to_dict())
    print(f"{args.role}: kept {p.dim} of {p.eigenvalues.size} dimensions; dropped variance {p.dropped_variance():.6g}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    from .oracle.properties import run_suite

    if args.count < 1:
        raise ConfigError("--count must be at least 1")
    report = run_suite(args.count, args.seed, inject_corruption=args.inject_corruption)
    for line in report.lines():
        print(line)
    if not report.ok:
        for failure in report.failures[: 20 if args.verbose else 3]:
            print(f"failed {failure}")
        raise PropertyCheckError(f"{len(report.failures)} property check(s) failed")
    print("oracle-check: all properties passed")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if not args.predictions or not args.targets:
        raise ConfigError("--predictions and --targets are required")
    y_hat = read_csv(args.predictions, ("y",))["y"]
    y = read_csv(args.targets, ("y",))["y"]
    value, per = score(y, y_hat, args.metric)
    rep = EvaluationReport(args.metric, value, per, n_test=int(y.shape[0]))
    if args.out:
        _dump_json(_out_dir(args) / "evaluation.json", rep.to_dict())
    print(f"{args.metric}={value:.6g} on {y.shape[0]} rows")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value experiment file")
    common.add_argument("--seed", type=int, default=0, help="seed for synthetic data (default 0)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="mdfusion", description="Minimax regression from unpaired single-domain training sets."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "fit": "fit a single-domain estimator",
        "fuse": "fit the two-domain minimax predictor",
        "project": "single-domain minimax-regret predictor from x1",
        "shared-rep": "predict from x1 without domain-1 labels",
        "cross-domain": "single-domain fit on domain 1",
        "side-info": "linear regression on x1 with nonlinear side information from x2",
    }
    for task in TASKS:
        p = sub.add_parser(task, parents=[common], help=helps[task])
        p.set_defaults(func=cmd_task)
    p = sub.add_parser("synth", parents=[common], help="sample a corpus from a model into CSV files")
    p.set_defaults(func=cmd_synth)
    p = sub.add_parser("pca", parents=[common], help="reduce one role of a CSV file by PCA")
    p.add_argument("--input", help="CSV file")
    p.add_argument("--dim", type=int, help="number of components to keep")
    p.add_argument("--role", default="x1", choices=("x1", "x2", "y"))
    p.set_defaults(func=cmd_pca)
    p = sub.add_parser("oracle-check", parents=[common], help="run the exact-oracle property suite")
    p.add_argument("--count", type=int, default=50, help="number of random instances (default 50)")
    p.add_argument("--inject-corruption", action="store_true", help="negative control: perturb reflected tables")
    p.set_defaults(func=cmd_oracle_check)
    p = sub.add_parser("evaluate", parents=[common], help="score a predictions CSV against targets")
    p.add_argument("--predictions", help="CSV with y_* columns")
    p.add_argument("--targets", help="CSV with y_* columns")
    p.add_argument("--metric", default="rmse", choices=METRICS)
    p.set_defaults(func=cmd_evaluate)
    return parser


def _category(exc: BaseException) -> tuple[str, int]:
    if isinstance(exc, PropertyCheckError):
        return "property", EXIT_PROPERTY
    if isinstance(exc, (ConfigError, ClassSpecError, OutOfScopeError)):
        return "config", EXIT_CONFIG
    if isinstance(exc, CorpusError):
        return "data", EXIT_DATA
    if isinstance(exc, (StageError, np.linalg.LinAlgError, FloatingPointError)):
        return "numerical", EXIT_NUMERICAL
    return "", -1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        category, code = _category(exc)
        if code < 0:
            raise
        detail = " ".join(str(exc).split())
        print(f"error: {category}: {detail}", file=sys.stderr)
        return code
