"""Command-line entry point.

```
promptforge optimize --config run.jsonc [--set optimizer.t_max=3] [--resume]
promptforge validate RUN_DIR [--output validation.json]
promptforge baseline --config run.jsonc [--run RUN_DIR ...]
promptforge simulate --config sim.jsonc [--set simulation.seeds=10]
promptforge report RUN_DIR [RUN_DIR ...] [--out DIR]
```

Exit status is 0 on success, 2 for configuration, dataset or artifact
problems, and 3 when the model endpoint cannot be used.
"""

import argparse
import dataclasses
import logging
import os
import sys
from collections.abc import Sequence
from typing import Any

from promptforge.errors import (
    ArtifactError,
    ConfigError,
    CorpusLoadError,
    GatewayError,
)

from promptforge import __version__
from promptforge.agents import (
    SOP,
    default_sop,
    initial_prompt,
    load_sop,
)
from promptforge.args import (
    config_override,
    nonempty_string,
    positive_int,
)
from promptforge.artifacts import (
    load_run,
    validation_to_dict,
    write_baseline,
    write_iteration,
    write_run,
    write_run_info,
)
from promptforge.baseline import load_lexicon, run_baseline
from promptforge.config import (
    RunConfig,
    config_from_dict,
    config_to_dict,
    load_config,
)
from promptforge.constants import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_TRANSPORT_ERROR,
)
from promptforge.dataset import (
    TERM_MODELS,
    Corpus,
    load_corpus,
    save_corpus,
)
from promptforge.gateway import (
    Backend,
    LiveBackend,
    SimulatedBackend,
)
from promptforge.metrics import Metrics, format_metric
from promptforge.path import unique_run_dir
from promptforge.pipeline import run_development, run_validation
from promptforge.reporting import comparison_table, render_report
from promptforge.restruct import csv_dump, json_dump
from promptforge.simlab import build_world, run_instability_experiment

__all__ = [
    "build_parser",
    "cmd_baseline",
    "cmd_optimize",
    "cmd_report",
    "cmd_simulate",
    "cmd_validate",
    "main",
]

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _overrides(args: argparse.Namespace, t_max_key: str = "optimizer.t_max") -> list[tuple[str, Any]]:
    """Collect `--set` pairs followed by the shortcut flags, which win."""
    overrides = list(args.set or [])
    if args.mode is not None:
        overrides.append(("mode", args.mode))
    if args.seed is not None:
        overrides.append(("run.seed", args.seed))
    if args.t_max is not None:
        overrides.append((t_max_key, args.t_max))
    if args.output_dir is not None:
        overrides.append(("run.output_dir", os.path.abspath(args.output_dir)))
    if args.resume:
        overrides.append(("backend.resume", True))
    return overrides


def _sop(config: RunConfig) -> SOP:
    if config.task.sop_path is None:
        return default_sop()
    return load_sop(config.task.sop_path)


def _prepare(config: RunConfig) -> tuple[Backend, Corpus, Corpus]:
    """Backend plus development and validation corpora for a configuration."""
    if config.mode == "sim":
        world = build_world(
            config.task.n_notes,
            config.task.prevalence,
            config.run.seed,
            config.simulation.params(),
            TERM_MODELS[config.task.symptom],
        )
        return SimulatedBackend(world), world.dev, world.val
    dev = load_corpus(config.task.dev_path, "dev")  # type: ignore[arg-type]
    val = load_corpus(config.task.val_path, "val")  # type: ignore[arg-type]
    return LiveBackend(config.backend.to_backend_config()), dev, val


def _run_info(config: RunConfig, dev: Corpus, val: Corpus) -> dict:
    return {
        "version": __version__,
        "mode": config.mode,
        "condition": config.task.condition,
        "seed": config.run.seed,
        "dev_corpus": dev.name,
        "dev_prevalence": dev.prevalence,
        "val_corpus": val.name,
        "val_prevalence": val.prevalence,
        "config": config_to_dict(config),
    }


def _metrics_line(label: str, m: Metrics) -> str:
    return (
        f"{label}: sensitivity={format_metric(m.sensitivity)} "
        f"specificity={format_metric(m.specificity)} "
        f"precision={format_metric(m.precision)} f1={format_metric(m.f1)}"
    )


def cmd_optimize(args: argparse.Namespace) -> int:
    """Develop a prompt, validate it, and write a run directory."""
    config = load_config(args.config, _overrides(args))
    sop = _sop(config)
    backend, dev, val = _prepare(config)
    lexicon = load_lexicon(config.task.lexicon_path) if config.task.lexicon_path else None

    run_dir = unique_run_dir(config.run.output_dir, config.run.name)
    info = _run_info(config, dev, val)
    write_run_info(run_dir, info)
    if config.mode == "sim":
        save_corpus(dev, os.path.join(run_dir, "corpora", "dev.jsonl"))
        save_corpus(val, os.path.join(run_dir, "corpora", "val.jsonl"))
    logger.info(f"Writing run to {run_dir}")

    def observer(record, predictions, critiques) -> None:
        write_iteration(run_dir, record, predictions, critiques)

    trajectory = run_development(
        initial_prompt(config.task.symptom),
        sop,
        dev,
        config.optimizer.thresholds(),
        backend,
        config.optimizer.development_options(),
        observer=observer,
    )
    validation = run_validation(trajectory, sop, val, backend, evaluate_all=config.optimizer.validate_all)
    baseline = run_baseline(lexicon, val) if lexicon is not None else None
    write_run(run_dir, info, trajectory, validation, baseline)
    render_report([load_run(run_dir)], os.path.join(run_dir, "report"))

    selected = trajectory.selected
    print(f"Run directory: {run_dir}")
    print(f"Iterations: {len(trajectory.records)} ({trajectory.termination_reason})")
    print(f"Selected iteration: {selected.t} ({trajectory.selection_strategy})")
    print(_metrics_line("dev", selected.dev_metrics))
    print(_metrics_line("val", validation.selected_metrics))
    if baseline is not None:
        print(_metrics_line(f"lexicon {baseline.lexicon.name}", baseline.metrics))
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    """Re-run validation for an existing run directory without modifying it."""
    run = load_run(args.run_dir)
    try:
        config = config_from_dict(run.info["config"], base_dir=run.run_dir)
    except KeyError as err:
        raise ArtifactError(run.run_dir, "run.json has no configuration") from err
    backend, _, val = _prepare(config)
    report = run_validation(
        run.trajectory,
        _sop(config),
        val,
        backend,
        evaluate_all=args.all or config.optimizer.validate_all,
    )
    if run.validation is not None and validation_to_dict(run.validation) != validation_to_dict(report):
        logger.warning(f"Validation differs from the stored results in {run.run_dir}")
    if args.output is not None:
        json_dump(args.output, validation_to_dict(report))
        print(f"Wrote {os.path.abspath(args.output)}")
    print(f"Selected iteration: {report.selected_index}")
    print(_metrics_line("val", report.selected_metrics))
    print(f"dev/val F1 gap: {report.dev_val_gap:+.4f}")
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    """Score the configured lexicon on the validation corpus."""
    config = load_config(args.config, _overrides(args))
    if config.task.lexicon_path is None:
        raise ConfigError("task.lexicon_path", "is required for the baseline")
    lexicon = load_lexicon(config.task.lexicon_path)
    _, _, val = _prepare(config)
    result = run_baseline(lexicon, val)

    out_dir = unique_run_dir(config.run.output_dir, f"{config.run.name}-baseline")
    write_run_info(
        out_dir,
        {"version": __version__, "config": config_to_dict(config), "val_corpus": val.name},
    )
    write_baseline(out_dir, result)
    if args.run:
        runs = [dataclasses.replace(load_run(run_dir), baseline=result) for run_dir in args.run]
        csv_dump(
            os.path.join(out_dir, "comparison.csv"),
            ("condition", "prevalence", "optimized_f1", "lexicon_f1", "delta"),
            (row.cells() for row in comparison_table(runs)),
        )
    print(f"Output directory: {out_dir}")
    print(_metrics_line(f"lexicon {lexicon.name} on {val.name}", result.metrics))
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    """Sweep prevalences and seeds in the simulated world."""
    config = load_config(args.config, _overrides(args, t_max_key="simulation.t_max"))
    sim = config.simulation
    summary = run_instability_experiment(
        sim.prevalences,
        sim.seeds,
        sim.params(),
        n=sim.n_notes,
        t_max=sim.t_max,
        base_seed=sim.base_seed,
        workers=sim.workers,
    )

    out_dir = unique_run_dir(config.run.output_dir, f"{config.run.name}-simulate")
    write_run_info(out_dir, {"version": __version__, "config": config_to_dict(config)})
    summary.to_csv(os.path.join(out_dir, "instability_summary.csv"))
    summary.traces_to_csv(os.path.join(out_dir, "instability_traces.csv"))
    json_dump(
        os.path.join(out_dir, "instability_summary.json"),
        {
            "params": dataclasses.asdict(summary.params),
            "rows": [dataclasses.asdict(row) for row in summary.rows],
        },
    )
    print(f"Output directory: {out_dir}")
    for row in summary.rows:
        print(
            f"prevalence={row.prevalence:g} seeds={row.seeds} "
            f"amplitude={row.mean_amplitude:.3f} collapse={row.collapse_frequency:.2f} "
            f"final_val_f1={row.mean_final_val_f1:.3f} selected_val_f1={row.mean_selected_val_f1:.3f}"
        )
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    """Regenerate report tables from one or more run directories."""
    if args.out is None and len(args.run_dirs) > 1:
        raise ValueError("--out is required when reporting on several run directories")
    runs = [load_run(run_dir) for run_dir in args.run_dirs]
    out_dir = args.out if args.out is not None else os.path.join(runs[0].run_dir, "report")
    for path in render_report(runs, out_dir):
        print(path)
    return EXIT_OK


def _config_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", required=True, help="Path of the JSON run configuration")
    parent.add_argument(
        "--set",
        action="append",
        type=config_override,
        metavar="KEY=VALUE",
        help="Override a configuration key (value parsed as JSON), e.g. optimizer.t_max=3",
    )
    parent.add_argument("--mode", choices=("live", "sim"), help="Override the backend mode")
    parent.add_argument("--seed", type=int, help="Override run.seed")
    parent.add_argument("--t-max", type=positive_int("t_max"), help="Override the iteration limit")
    parent.add_argument("--output-dir", type=nonempty_string("output_dir"), help="Override run.output_dir")
    parent.add_argument("--resume", action="store_true", help="Reuse the model-call cache")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promptforge", description=__doc__.split("\n", 1)[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    subparsers = parser.add_subparsers(dest="command", required=True)
    config_options = _config_options()

    optimize = subparsers.add_parser(
        "optimize", parents=[config_options], help="Develop and validate a prompt"
    )
    optimize.set_defaults(func=cmd_optimize)

    validate = subparsers.add_parser("validate", help="Re-run validation for a run directory")
    validate.add_argument("run_dir", help="Run directory written by 'optimize'")
    validate.add_argument("--output", help="Write the validation report to this file")
    validate.add_argument("--all", action="store_true", help="Evaluate every iteration")
    validate.set_defaults(func=cmd_validate)

    baseline = subparsers.add_parser("baseline", parents=[config_options], help="Score the lexicon baseline")
    baseline.add_argument("--run", action="append", metavar="RUN_DIR", help="Compare against this run")
    baseline.set_defaults(func=cmd_baseline)

    simulate = subparsers.add_parser("simulate", parents=[config_options], help="Run the instability sweep")
    simulate.set_defaults(func=cmd_simulate)

    report = subparsers.add_parser("report", help="Render report tables from run directories")
    report.add_argument("run_dirs", nargs="+", metavar="RUN_DIR")
    report.add_argument("--out", help="Report directory (default: RUN_DIR/report)")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        return args.func(args)
    except GatewayError as err:
        logger.error(f"Model endpoint failed: {err}")
        print(f"error: {err}", file=sys.stderr)
        return EXIT_TRANSPORT_ERROR
    except (ConfigError, CorpusLoadError, ArtifactError, FileNotFoundError, ValueError) as err:
        logger.error(f"{type(err).__name__}: {err}")
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
