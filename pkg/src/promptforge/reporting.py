"""Trajectory diagnostics and report tables.

Every table is computed from persisted run artifacts only, so rendering the
same run directories twice yields byte-identical files. Percent deltas are
rounded half away from zero to whole percents.

Files written by `render_report`:

| file                      | content |
| :------------------------ | :------ |
| `degradation.csv`         | validation F1 of the first and final iteration per condition |
| `comparison.csv`          | selected prompt against the lexicon baseline |
| `guiding.csv`             | development/validation F1 gap of the selected prompt |
| `oscillation.json`        | validation-sensitivity amplitude, collapse and masking iterations |
| `selected_vs_optimal.csv` | selected iteration against the best validation iteration |
| `sensitivity_trace.csv`   | per-iteration sensitivity, specificity and F1 |
"""

import logging
import os
from collections.abc import Sequence
from dataclasses import dataclass

from promptforge.typing import FilePath

from promptforge.artifacts import RunArtifacts
from promptforge.dataset import round_half_up
from promptforge.metrics import (
    Metrics,
    format_metric,
    is_defined,
    masking_flag,
    selection_f1,
)
from promptforge.path import resolve_path
from promptforge.pipeline import (
    SelectedVsOptimal,
    Trajectory,
    ValidationReport,
)
from promptforge.restruct import csv_dump, json_dump

__all__ = [
    "ComparisonRow",
    "DegradationRow",
    "GuidingRow",
    "OscillationReport",
    "comparison_table",
    "degradation_table",
    "format_percent",
    "guiding_table",
    "oscillation_report",
    "percent_delta",
    "render_report",
    "selected_vs_optimal",
]

logger = logging.getLogger(__name__)


def percent_delta(new: float, old: float) -> int | None:
    """Relative change in whole percent, or None when `old` is 0."""
    if old == 0:
        return None
    return round_half_up(100.0 * (new - old) / old)


def format_percent(delta: int | None) -> str:
    if delta is None:
        return "n/a"
    return f"{delta:+d}%" if delta else "0%"


def _number(value: float | None, digits: int = 6) -> str:
    return "" if value is None else f"{value:.{digits}f}"


@dataclass(frozen=True)
class DegradationRow:
    condition: str
    prevalence: float | None
    first_f1: float
    final_f1: float

    @property
    def delta(self) -> int | None:
        return percent_delta(self.final_f1, self.first_f1)

    def cells(self) -> list[str]:
        return [
            self.condition,
            _number(self.prevalence, 4),
            _number(self.first_f1),
            _number(self.final_f1),
            format_percent(self.delta),
        ]


@dataclass(frozen=True)
class ComparisonRow:
    condition: str
    prevalence: float | None
    optimized_f1: float
    lexicon_f1: float

    @property
    def delta(self) -> int | None:
        return percent_delta(self.optimized_f1, self.lexicon_f1)

    def cells(self) -> list[str]:
        return [
            self.condition,
            _number(self.prevalence, 4),
            _number(self.optimized_f1),
            _number(self.lexicon_f1),
            format_percent(self.delta),
        ]


@dataclass(frozen=True)
class GuidingRow:
    condition: str
    dev_f1: float
    val_f1: float

    @property
    def gap(self) -> float:
        return self.dev_f1 - self.val_f1

    def cells(self) -> list[str]:
        return [self.condition, _number(self.dev_f1), _number(self.val_f1), _number(self.gap)]


@dataclass(frozen=True)
class OscillationReport:
    amplitude: float
    collapse_iterations: tuple[int, ...]
    masking_iterations: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "collapse_iterations": list(self.collapse_iterations),
            "masking_iterations": list(self.masking_iterations),
        }


def _val_f1(run: RunArtifacts, t: int) -> float:
    if run.validation is None or t not in run.validation.val_metrics:
        raise ValueError(f"{run.condition}: no validation metrics for iteration {t}")
    return selection_f1(run.validation.val_metrics[t])


def degradation_table(runs: Sequence[RunArtifacts]) -> list[DegradationRow]:
    """Validation F1 change from the first to the final iteration per condition.

    Raises:
        ValueError: If a run lacks validation metrics for its first or final iteration.
    """
    return [
        DegradationRow(
            condition=run.condition,
            prevalence=run.prevalence,
            first_f1=_val_f1(run, 0),
            final_f1=_val_f1(run, len(run.trajectory.records) - 1),
        )
        for run in runs
    ]


def comparison_table(runs: Sequence[RunArtifacts]) -> list[ComparisonRow]:
    """Selected prompt against the lexicon baseline on the same validation corpus.

    Raises:
        ValueError: If a run has no validation or baseline, or they used different corpora.
    """
    rows = []
    for run in runs:
        if run.validation is None or run.baseline is None:
            raise ValueError(f"{run.condition}: comparison needs validation and baseline results")
        val_corpus = run.info.get("val_corpus")
        if val_corpus is not None and val_corpus != run.baseline.corpus_name:
            raise ValueError(
                f"{run.condition}: baseline scored {run.baseline.corpus_name!r}, "
                f"validation used {val_corpus!r}"
            )
        rows.append(
            ComparisonRow(
                condition=run.condition,
                prevalence=run.prevalence,
                optimized_f1=selection_f1(run.validation.selected_metrics),
                lexicon_f1=selection_f1(run.baseline.metrics),
            )
        )
    return rows


def guiding_table(runs: Sequence[RunArtifacts]) -> list[GuidingRow]:
    """Development and validation F1 of each run's selected prompt."""
    rows = []
    for run in runs:
        if run.validation is None:
            raise ValueError(f"{run.condition}: no validation results")
        selected = run.validation.selected_index
        rows.append(
            GuidingRow(
                condition=run.condition,
                dev_f1=selection_f1(run.trajectory.records[selected].dev_metrics),
                val_f1=selection_f1(run.validation.val_metrics[selected]),
            )
        )
    return rows


def oscillation_report(val_metrics: Sequence[Metrics], prevalence: float) -> OscillationReport:
    """Instability diagnostics over per-iteration validation metrics.

    A collapse iteration has zero validation sensitivity although positives
    exist; a masking iteration is one flagged by `masking_flag`.

    Args:
        val_metrics (Sequence[Metrics]): Validation metrics of iterations 0, 1, ...
        prevalence (float): Validation prevalence.

    Returns:
        OscillationReport: Amplitude (max - min sensitivity) and flagged iterations.

    Raises:
        ValueError: If fewer than two iterations are given.
    """
    if len(val_metrics) < 2:
        raise ValueError("Oscillation needs at least two evaluated iterations")
    defined = [m.sensitivity for m in val_metrics if is_defined(m.sensitivity)]
    amplitude = max(defined) - min(defined) if defined else 0.0  # type: ignore[operator]
    return OscillationReport(
        amplitude=float(amplitude),
        collapse_iterations=tuple(
            t for t, m in enumerate(val_metrics) if m.counts.positives > 0 and m.sensitivity == 0.0
        ),
        masking_iterations=tuple(t for t, m in enumerate(val_metrics) if masking_flag(m, prevalence)),
    )


def selected_vs_optimal(trajectory: Trajectory, validation: ValidationReport) -> SelectedVsOptimal:
    """Compare the selected iteration with the best validation iteration (earliest on ties).

    Raises:
        ValueError: If some iteration was not evaluated on validation.
    """
    n = len(trajectory.records)
    missing = [t for t in range(n) if t not in validation.val_metrics]
    if missing:
        raise ValueError(f"Iterations {missing} were not evaluated on validation")
    scores = [selection_f1(validation.val_metrics[t]) for t in range(n)]
    optimal = scores.index(max(scores))
    return SelectedVsOptimal(
        selected_index=validation.selected_index,
        selected_val_f1=scores[validation.selected_index],
        optimal_index=optimal,
        optimal_val_f1=scores[optimal],
    )


def _fully_validated(run: RunArtifacts) -> bool:
    return run.validation is not None and all(
        t in run.validation.val_metrics for t in range(len(run.trajectory.records))
    )


def _trace_cells(run: RunArtifacts) -> list[list[str]]:
    rows = []
    for record in run.trajectory.records:
        val = run.validation.val_metrics.get(record.t) if run.validation is not None else None
        dev = record.dev_metrics
        rows.append(
            [
                run.condition,
                str(record.t),
                format_metric(dev.sensitivity, 6),
                format_metric(dev.specificity, 6),
                format_metric(dev.f1, 6),
                format_metric(val.sensitivity, 6) if val is not None else "",
                format_metric(val.specificity, 6) if val is not None else "",
                format_metric(val.f1, 6) if val is not None else "",
            ]
        )
    return rows


def render_report(runs: Sequence[RunArtifacts], out_dir: FilePath) -> list[str]:
    """Write every table the runs support into `out_dir`.

    Tables that need artifacts a run lacks (validation of every iteration, a
    baseline) leave that run out; a table no run supports is not written.

    Returns:
        list[str]: Paths written, in a fixed order.
    """
    out_dir = resolve_path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def path(name: str) -> str:
        written.append(os.path.join(out_dir, name))
        return written[-1]

    validated = [run for run in runs if run.validation is not None]
    full = [run for run in runs if _fully_validated(run)]
    with_baseline = [run for run in validated if run.baseline is not None]
    skipped = sorted({run.condition for run in runs} - {run.condition for run in full})
    if skipped:
        logger.warning(f"Not every iteration was validated for {skipped}; per-iteration tables omit them")

    endpoints = [
        run
        for run in validated
        if {0, len(run.trajectory.records) - 1}
        <= run.validation.val_metrics.keys()  # type: ignore[union-attr]
    ]
    if endpoints:
        csv_dump(
            path("degradation.csv"),
            ("condition", "prevalence", "first_f1", "final_f1", "delta"),
            (row.cells() for row in degradation_table(endpoints)),
        )
    if with_baseline:
        csv_dump(
            path("comparison.csv"),
            ("condition", "prevalence", "optimized_f1", "lexicon_f1", "delta"),
            (row.cells() for row in comparison_table(with_baseline)),
        )
    if validated:
        csv_dump(
            path("guiding.csv"),
            ("condition", "dev_f1", "val_f1", "gap"),
            (row.cells() for row in guiding_table(validated)),
        )
    full = [run for run in full if len(run.trajectory.records) >= 2]
    if full:
        oscillation = {}
        for run in full:
            by_iteration = run.validation.val_metrics  # type: ignore[union-attr]
            val_metrics = [by_iteration[t] for t in range(len(run.trajectory.records))]
            prevalence = run.prevalence if run.prevalence is not None else 0.0
            oscillation[run.condition] = oscillation_report(val_metrics, prevalence).to_dict()
        json_dump(path("oscillation.json"), oscillation)
        csv_dump(
            path("selected_vs_optimal.csv"),
            ("condition", "selected_index", "selected_val_f1", "optimal_index", "optimal_val_f1", "gap"),
            (
                [
                    run.condition,
                    str(comparison.selected_index),
                    _number(comparison.selected_val_f1),
                    str(comparison.optimal_index),
                    _number(comparison.optimal_val_f1),
                    _number(comparison.gap),
                ]
                for run in full
                for comparison in [
                    selected_vs_optimal(run.trajectory, run.validation)  # type: ignore[arg-type]
                ]
            ),
        )
    csv_dump(
        path("sensitivity_trace.csv"),
        (
            "condition",
            "iteration",
            "dev_sensitivity",
            "dev_specificity",
            "dev_f1",
            "val_sensitivity",
            "val_specificity",
            "val_f1",
        ),
        (row for run in runs for row in _trace_cells(run)),
    )
    logger.info(f"Wrote {len(written)} report files to {out_dir}")
    return written
