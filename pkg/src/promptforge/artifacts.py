"""Run-artifact directories.

This module writes and reads the files a run leaves behind (see
`promptforge.path` for the layout). Everything is canonical JSON or JSONL with
no timestamps or latencies, so a deterministic run reproduces its artifacts
byte for byte and every report can be rebuilt from disk alone.
"""

import logging
import os
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

from promptforge.errors import ArtifactError, JSONDecodeError
from promptforge.typing import FilePath

from promptforge.agents import (
    Critique,
    GuidanceDirective,
    Prediction,
    Prompt,
)
from promptforge.baseline import BaselineResult, Lexicon
from promptforge.metrics import metrics_from_dict, metrics_to_dict
from promptforge.path import iteration_dir, resolve_path
from promptforge.pipeline import (
    IterationRecord,
    SelectedVsOptimal,
    Thresholds,
    Trajectory,
    ValidationReport,
)
from promptforge.restruct import (
    json_dump,
    json_load,
    jsonl_dump,
)

__all__ = [
    "BASELINE_FILE",
    "RUN_FILE",
    "RunArtifacts",
    "TRAJECTORY_FILE",
    "VALIDATION_FILE",
    "baseline_from_dict",
    "baseline_to_dict",
    "load_run",
    "record_from_dict",
    "record_to_dict",
    "trajectory_from_dict",
    "trajectory_to_dict",
    "validation_from_dict",
    "validation_to_dict",
    "write_baseline",
    "write_iteration",
    "write_run",
    "write_run_info",
    "write_trajectory",
    "write_validation",
]

logger = logging.getLogger(__name__)

RUN_FILE = "run.json"
TRAJECTORY_FILE = "trajectory.json"
VALIDATION_FILE = "validation.json"
BASELINE_FILE = "baseline.json"


def _prompt_to_dict(prompt: Prompt) -> dict:
    return {
        "id": prompt.id,
        "iteration": prompt.iteration,
        "text": prompt.text,
        "origin": prompt.origin,
        "parent_id": prompt.parent_id,
    }


def _guidance_to_dict(directive: GuidanceDirective | None) -> dict | None:
    if directive is None:
        return None
    return {"kind": directive.kind, "text": directive.text, "triggered_at": directive.triggered_at}


def record_to_dict(record: IterationRecord) -> dict:
    return {
        "t": record.t,
        "prompt": _prompt_to_dict(record.prompt),
        "dev_metrics": metrics_to_dict(record.dev_metrics),
        "target_metric": record.target_metric,
        "critique_count": record.critique_count,
        "filtered_count": record.filtered_count,
        "reverted": record.reverted,
        "guidance": _guidance_to_dict(record.guidance),
        "predictions_ref": record.predictions_ref,
    }


def record_from_dict(obj: dict) -> IterationRecord:
    guidance = obj["guidance"]
    return IterationRecord(
        t=obj["t"],
        prompt=Prompt(**obj["prompt"]),
        dev_metrics=metrics_from_dict(obj["dev_metrics"]),
        target_metric=obj["target_metric"],
        critique_count=obj["critique_count"],
        filtered_count=obj["filtered_count"],
        reverted=obj["reverted"],
        guidance=GuidanceDirective(**guidance) if guidance is not None else None,
        predictions_ref=obj["predictions_ref"],
    )


def trajectory_to_dict(trajectory: Trajectory) -> dict:
    return {
        "records": [record_to_dict(record) for record in trajectory.records],
        "thresholds": {
            "theta_sensitivity": trajectory.thresholds.theta_sensitivity,
            "theta_specificity": trajectory.thresholds.theta_specificity,
        },
        "t_max": trajectory.t_max,
        "selection_strategy": trajectory.selection_strategy,
        "selected_index": trajectory.selected_index,
        "termination_reason": trajectory.termination_reason,
    }


def trajectory_from_dict(obj: dict) -> Trajectory:
    return Trajectory(
        records=tuple(record_from_dict(record) for record in obj["records"]),
        thresholds=Thresholds(**obj["thresholds"]),
        t_max=obj["t_max"],
        selection_strategy=obj["selection_strategy"],
        selected_index=obj["selected_index"],
        termination_reason=obj["termination_reason"],
    )


def validation_to_dict(report: ValidationReport) -> dict:
    comparison = report.selected_vs_optimal
    return {
        "selected_index": report.selected_index,
        # JSON object keys are strings
        "val_metrics": {str(t): metrics_to_dict(m) for t, m in sorted(report.val_metrics.items())},
        "dev_val_gap": report.dev_val_gap,
        "selected_vs_optimal": (
            None
            if comparison is None
            else {
                "selected_index": comparison.selected_index,
                "selected_val_f1": comparison.selected_val_f1,
                "optimal_index": comparison.optimal_index,
                "optimal_val_f1": comparison.optimal_val_f1,
            }
        ),
    }


def validation_from_dict(obj: dict) -> ValidationReport:
    comparison = obj["selected_vs_optimal"]
    return ValidationReport(
        selected_index=obj["selected_index"],
        val_metrics={int(t): metrics_from_dict(m) for t, m in obj["val_metrics"].items()},
        dev_val_gap=float(obj["dev_val_gap"]),
        selected_vs_optimal=SelectedVsOptimal(**comparison) if comparison is not None else None,
    )


def baseline_to_dict(result: BaselineResult) -> dict:
    return {
        "lexicon": result.lexicon.name,
        "terms": list(result.lexicon.terms),
        "corpus": result.corpus_name,
        "metrics": metrics_to_dict(result.metrics),
    }


def baseline_from_dict(obj: dict) -> BaselineResult:
    return BaselineResult(
        lexicon=Lexicon(name=obj["lexicon"], terms=tuple(obj["terms"])),
        corpus_name=obj["corpus"],
        metrics=metrics_from_dict(obj["metrics"]),
    )


def write_run_info(run_dir: FilePath, info: dict) -> None:
    """Write run.json (configuration, thresholds, seed), creating the run directory."""
    run_dir = resolve_path(run_dir)
    os.makedirs(run_dir, exist_ok=True)
    json_dump(os.path.join(run_dir, RUN_FILE), info)


def write_iteration(
    run_dir: FilePath,
    record: IterationRecord,
    predictions: Sequence[Prediction],
    critiques: Sequence[Critique],
) -> None:
    """Write iteration_<t>/ for one completed record."""
    out_dir = iteration_dir(run_dir, record.t)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "prompt.txt"), mode="w", encoding="utf-8", newline="\n") as wf:
        wf.write(record.prompt.text + "\n")
    json_dump(os.path.join(out_dir, "metrics.json"), record_to_dict(record))
    jsonl_dump(
        os.path.join(out_dir, "predictions.jsonl"),
        (
            {
                "note_id": p.note_id,
                "label": p.label,
                "raw_text": p.raw_text,
                "parse_status": p.parse_status,
            }
            for p in predictions
        ),
    )
    jsonl_dump(
        os.path.join(out_dir, "critiques.jsonl"),
        (
            {
                "note_id": c.note_id,
                "error_kind": c.error_kind,
                "text": c.text,
                "actionable": c.actionable,
            }
            for c in critiques
        ),
    )
    logger.debug(f"Wrote {out_dir}")


def write_trajectory(run_dir: FilePath, trajectory: Trajectory) -> None:
    json_dump(os.path.join(resolve_path(run_dir), TRAJECTORY_FILE), trajectory_to_dict(trajectory))


def write_validation(run_dir: FilePath, report: ValidationReport) -> None:
    json_dump(os.path.join(resolve_path(run_dir), VALIDATION_FILE), validation_to_dict(report))


def write_baseline(run_dir: FilePath, result: BaselineResult) -> None:
    json_dump(os.path.join(resolve_path(run_dir), BASELINE_FILE), baseline_to_dict(result))


def write_run(
    run_dir: FilePath,
    info: dict,
    trajectory: Trajectory,
    validation: ValidationReport | None = None,
    baseline: BaselineResult | None = None,
) -> None:
    """Write every top-level run file that is given."""
    write_run_info(run_dir, info)
    write_trajectory(run_dir, trajectory)
    if validation is not None:
        write_validation(run_dir, validation)
    if baseline is not None:
        write_baseline(run_dir, baseline)


@dataclass(frozen=True)
class RunArtifacts:
    """Everything a finished run persisted."""

    run_dir: str
    info: dict
    trajectory: Trajectory
    validation: ValidationReport | None = None
    baseline: BaselineResult | None = None

    @property
    def condition(self) -> str:
        return str(self.info.get("condition") or os.path.basename(self.run_dir))

    @property
    def prevalence(self) -> float | None:
        return self.info.get("val_prevalence")


def _load(path: str, required: bool, parse: Any) -> Any:
    if not os.path.isfile(path):
        if required:
            raise ArtifactError(path, "missing")
        return None
    try:
        obj = json_load(path)
    except JSONDecodeError as err:
        raise ArtifactError(path, f"corrupt JSON: {err}") from err
    try:
        return parse(obj)
    except (KeyError, TypeError, ValueError, AttributeError) as err:
        raise ArtifactError(path, f"malformed: {err!r}") from err


def load_run(run_dir: FilePath) -> RunArtifacts:
    """Load a run directory.

    Raises:
        ArtifactError: If run.json or trajectory.json is missing, or any file is corrupt.
    """
    run_dir = resolve_path(run_dir)
    if not os.path.isdir(run_dir):
        raise ArtifactError(run_dir, "not a run directory")

    def parse_info(obj: Any) -> dict:
        if not isinstance(obj, dict):
            raise TypeError("run.json must hold an object")
        return obj

    return RunArtifacts(
        run_dir=run_dir,
        info=_load(os.path.join(run_dir, RUN_FILE), True, parse_info),
        trajectory=_load(os.path.join(run_dir, TRAJECTORY_FILE), True, trajectory_from_dict),
        validation=_load(os.path.join(run_dir, VALIDATION_FILE), False, validation_from_dict),
        baseline=_load(os.path.join(run_dir, BASELINE_FILE), False, baseline_from_dict),
    )
