"""Development and validation workflows.

The development loop evaluates the current prompt on the development corpus,
stops once both sensitivity and specificity reach their thresholds, and
otherwise critiques the errors of the prioritized kind and synthesizes the
next prompt. A drop in development F1 triggers a revert: the next prompt is
synthesized from the pre-drop prompt with the failed revision shown as an
example not to repeat. When enabled, a guiding agent intervenes after every
non-improving iteration.

Iteration indices are 0-based; record 0 is the initial prompt, so a run with
`t_max` refinements holds at most `t_max + 1` records.
"""

import dataclasses
import functools
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from promptforge.errors import NothingToSynthesizeError
from promptforge.typing import (
    ConvergenceDecision,
    DegradationBaseline,
    Direction,
    SelectionStrategy,
    TargetMetric,
    TerminationReason,
)

from promptforge.agents import (
    SOP,
    Critique,
    GuidanceDirective,
    Prediction,
    Prompt,
    classify,
    critique_false_negative,
    critique_false_positive,
    guide,
    synthesize,
)
from promptforge.constants import (
    DEFAULT_T_MAX,
    DEFAULT_THETA,
    DEGRADATION_BASELINES,
    SELECTION_STRATEGIES,
)
from promptforge.dataset import Corpus
from promptforge.gateway import Backend
from promptforge.general import ordered_map
from promptforge.metrics import (
    Metrics,
    confusion,
    format_metric,
    is_defined,
    metrics_from_counts,
    selection_f1,
)

__all__ = [
    "DevelopmentOptions",
    "IterationObserver",
    "IterationRecord",
    "SelectedVsOptimal",
    "Thresholds",
    "Trajectory",
    "ValidationReport",
    "check_convergence",
    "error_notes",
    "evaluate",
    "run_development",
    "run_validation",
    "select",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Thresholds:
    theta_sensitivity: float = DEFAULT_THETA
    theta_specificity: float = DEFAULT_THETA

    def __post_init__(self) -> None:
        for name in ("theta_sensitivity", "theta_specificity"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {value}")


@dataclass(frozen=True)
class IterationRecord:
    """What happened at iteration `t`.

    `target_metric`, `critique_count` and `filtered_count` describe the
    refinement performed after evaluating this record's prompt. `reverted` and
    `guidance` describe how this record's prompt was produced.
    """

    t: int
    prompt: Prompt
    dev_metrics: Metrics
    target_metric: TargetMetric
    critique_count: int = 0
    filtered_count: int = 0
    reverted: bool = False
    guidance: GuidanceDirective | None = None
    predictions_ref: str = ""

    def __post_init__(self) -> None:
        if self.reverted and self.t < 2:
            raise ValueError(f"Record {self.t} cannot be a revert")


@dataclass(frozen=True)
class Trajectory:
    records: tuple[IterationRecord, ...]
    thresholds: Thresholds
    t_max: int = DEFAULT_T_MAX
    selection_strategy: SelectionStrategy = "final_iteration"
    selected_index: int | None = None
    termination_reason: TerminationReason | None = None

    def __post_init__(self) -> None:
        if len(self.records) > self.t_max + 1:
            raise ValueError(f"{len(self.records)} records exceed t_max={self.t_max}")
        if self.selected_index is not None and not 0 <= self.selected_index < len(self.records):
            raise ValueError(f"selected_index {self.selected_index} out of range")

    @property
    def dev_f1(self) -> list[float]:
        return [selection_f1(record.dev_metrics) for record in self.records]

    @property
    def selected(self) -> IterationRecord:
        if self.selected_index is None:
            raise ValueError("No iteration selected")
        return self.records[self.selected_index]


@dataclass(frozen=True)
class DevelopmentOptions:
    t_max: int = DEFAULT_T_MAX
    guiding_enabled: bool = False
    selection_strategy: SelectionStrategy = "final_iteration"
    degradation_prevention: bool = True
    degradation_baseline: DegradationBaseline = "previous"

    def __post_init__(self) -> None:
        if self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")
        if self.selection_strategy not in SELECTION_STRATEGIES:
            raise ValueError(f"Unknown selection strategy {self.selection_strategy!r}")
        if self.degradation_baseline not in DEGRADATION_BASELINES:
            raise ValueError(f"Unknown degradation baseline {self.degradation_baseline!r}")


@dataclass(frozen=True)
class SelectedVsOptimal:
    selected_index: int
    selected_val_f1: float
    optimal_index: int
    optimal_val_f1: float

    @property
    def gap(self) -> float:
        return self.optimal_val_f1 - self.selected_val_f1


@dataclass(frozen=True)
class ValidationReport:
    """Validation results keyed by iteration index."""

    selected_index: int
    val_metrics: dict[int, Metrics]
    dev_val_gap: float
    selected_vs_optimal: SelectedVsOptimal | None = None

    @property
    def selected_metrics(self) -> Metrics:
        return self.val_metrics[self.selected_index]


# Called after each record is complete with its predictions and critiques
IterationObserver = Callable[[IterationRecord, list[Prediction], list[Critique]], None]


def evaluate(
    prompt: Prompt,
    sop: SOP,
    corpus: Corpus,
    backend: Backend,
) -> tuple[list[Prediction], Metrics]:
    """Classify every note and score the result.

    Calls run with the backend's parallelism; predictions keep corpus order.
    Any backend failure aborts the whole evaluation.

    Raises:
        ValueError: If the corpus is empty.
        GatewayError: If the backend fails on any note.
    """
    if len(corpus) == 0:
        raise ValueError("Cannot evaluate on an empty corpus")
    predictions = ordered_map(
        lambda note: classify(prompt, sop, note, backend),
        corpus.notes,
        parallelism=getattr(backend, "parallelism", 1),
    )
    defaulted = sum(1 for prediction in predictions if prediction.parse_status == "defaulted")
    if defaulted:
        logger.warning(f"{defaulted}/{len(predictions)} answers defaulted to negative for {prompt.id}")
    counts = confusion([prediction.label for prediction in predictions], corpus.labels)
    return predictions, metrics_from_counts(counts)


def _meets(value, threshold: float) -> bool:
    return is_defined(value) and value >= threshold


def check_convergence(m: Metrics, th: Thresholds) -> ConvergenceDecision:
    """Decide whether to stop or which metric to improve.

    Returns:
        ConvergenceDecision: 'converged', 'improve_sensitivity' or 'improve_specificity'.
            UNDEFINED metrics count as failing; sensitivity wins when both fail.
    """
    sensitivity_ok = _meets(m.sensitivity, th.theta_sensitivity)
    specificity_ok = _meets(m.specificity, th.theta_specificity)
    if sensitivity_ok and specificity_ok:
        return "converged"
    if not sensitivity_ok:
        return "improve_sensitivity"
    return "improve_specificity"


def select(trajectory: Trajectory) -> int:
    """Index of the prompt to carry into validation.

    `best_dev_f1` takes the argmax of development F1 (UNDEFINED as 0, earliest
    on ties); `final_iteration` takes the last record.
    """
    if not trajectory.records:
        raise ValueError("Cannot select from an empty trajectory")
    if trajectory.selection_strategy == "final_iteration":
        return len(trajectory.records) - 1
    scores = trajectory.dev_f1
    return scores.index(max(scores))


def error_notes(corpus: Corpus, predictions: Sequence[Prediction], direction: Direction) -> list:
    """Notes misclassified in the way `direction` repairs, in corpus order.

    Sensitivity repairs false negatives, specificity repairs false positives.
    """
    wanted = (0, 1) if direction == "sensitivity" else (1, 0)
    return [
        note
        for note, prediction in zip(corpus.notes, predictions)
        if (prediction.label, note.label) == wanted
    ]


def _flip(direction: Direction) -> Direction:
    return "specificity" if direction == "sensitivity" else "sensitivity"


def _degradation_reference(f1: list[float], t: int, baseline: DegradationBaseline) -> int:
    if baseline == "previous":
        return t - 1
    earlier = f1[:t]
    return earlier.index(max(earlier))


def run_development(
    p0: Prompt,
    sop: SOP,
    dev: Corpus,
    th: Thresholds,
    backend: Backend,
    options: DevelopmentOptions | None = None,
    observer: IterationObserver | None = None,
) -> Trajectory:
    """Run the development workflow.

    Args:
        p0 (Prompt): Initial prompt.
        sop (SOP): Task framing.
        dev (Corpus): Development corpus.
        th (Thresholds): Convergence thresholds.
        backend (Backend): Model backend.
        options (DevelopmentOptions | None, optional): Loop settings. Defaults to DevelopmentOptions().
        observer (IterationObserver | None, optional): Receives every completed record with its
            predictions and critiques (used to write artifacts as the run progresses). Defaults to None.

    Returns:
        Trajectory: All records, with the selection applied.

    Raises:
        GatewayError: If the backend fails.
    """
    if options is None:
        options = DevelopmentOptions()
    parallelism = getattr(backend, "parallelism", 1)

    records: list[IterationRecord] = []
    predictions_by_t: list[list[Prediction]] = []
    f1: list[float] = []
    reason: TerminationReason = "t_max_reached"

    prompt = p0
    reverted = False
    directive: GuidanceDirective | None = None
    for t in range(options.t_max + 1):
        predictions, m = evaluate(prompt, sop, dev, backend)
        predictions_by_t.append(predictions)
        f1.append(selection_f1(m))
        logger.info(
            f"Iteration {t} ({prompt.origin}): sensitivity={format_metric(m.sensitivity)} "
            f"specificity={format_metric(m.specificity)} f1={format_metric(m.f1)}"
        )
        record = functools.partial(
            IterationRecord,
            t=t,
            prompt=prompt,
            dev_metrics=m,
            reverted=reverted,
            guidance=directive,
            predictions_ref=f"iteration_{t}/predictions.jsonl",
        )

        decision = check_convergence(m, th)
        if decision == "converged" or t == options.t_max:
            reason = "converged" if decision == "converged" else "t_max_reached"
            records.append(record(target_metric="none"))
            if observer is not None:
                observer(records[-1], predictions, [])
            break

        target: Direction = "sensitivity" if decision == "improve_sensitivity" else "specificity"

        base_index = t
        failed: Prompt | None = None
        if options.degradation_prevention and t >= 1:
            reference = _degradation_reference(f1, t, options.degradation_baseline)
            if f1[t] < f1[reference]:
                base_index = reference
                failed = prompt
                logger.info(
                    f"Dev F1 dropped from {f1[reference]:.4f} to {f1[t]:.4f}, "
                    f"reverting to {records[reference].prompt.id}"
                )

        directive = None
        if options.guiding_enabled and t >= 1 and f1[t] <= f1[t - 1]:
            directive = guide(f1, target, prompt, sop, backend)
            if directive.kind == "switch_target_metric":
                target = _flip(target)
        rewrite_guidance = None
        if directive is not None and directive.kind == "rewrite_strategy":
            rewrite_guidance = directive

        base = records[base_index].prompt if base_index < t else prompt
        critique_fn = critique_false_negative if target == "sensitivity" else critique_false_positive
        critiques = ordered_map(
            lambda note: critique_fn(base, sop, note, backend),
            error_notes(dev, predictions_by_t[base_index], target),
            parallelism=parallelism,
        )
        actionable = [critique for critique in critiques if critique.actionable]
        records.append(
            record(
                target_metric=target,
                critique_count=len(critiques),
                filtered_count=len(critiques) - len(actionable),
            )
        )
        if observer is not None:
            observer(records[-1], predictions, critiques)

        try:
            prompt = synthesize(
                actionable,
                base,
                sop,
                target,
                backend,
                failed_example=failed,
                guidance=rewrite_guidance,
                iteration=t + 1,
            )
        except NothingToSynthesizeError:
            logger.warning(f"All {len(critiques)} critiques at iteration {t} were filtered, stopping")
            reason = "nothing_to_synthesize"
            break
        reverted = failed is not None

    trajectory = Trajectory(
        records=tuple(records),
        thresholds=th,
        t_max=options.t_max,
        selection_strategy=options.selection_strategy,
        termination_reason=reason,
    )
    selected = select(trajectory)
    logger.info(
        f"Stopped after {len(records)} records ({reason}); "
        f"selected iteration {selected} by {options.selection_strategy}"
    )
    return dataclasses.replace(trajectory, selected_index=selected)


def run_validation(
    trajectory: Trajectory,
    sop: SOP,
    val: Corpus,
    backend: Backend,
    *,
    evaluate_all: bool = False,
) -> ValidationReport:
    """Evaluate the selected prompt (optionally every prompt) on the validation corpus.

    Args:
        trajectory (Trajectory): Development trajectory with a selection.
        sop (SOP): Task framing.
        val (Corpus): Validation corpus.
        backend (Backend): Model backend.
        evaluate_all (bool, optional): Also evaluate every other record, which enables the
            selected-vs-optimal comparison. Defaults to False.

    Returns:
        ValidationReport: Validation metrics and the development/validation gap of the selection.

    Raises:
        ValueError: If no iteration is selected.
        GatewayError: If the backend fails.
    """
    if trajectory.selected_index is None:
        raise ValueError("Trajectory has no selected iteration")
    selected = trajectory.selected_index
    indices = range(len(trajectory.records)) if evaluate_all else [selected]

    val_metrics: dict[int, Metrics] = {}
    for t in indices:
        _, val_metrics[t] = evaluate(trajectory.records[t].prompt, sop, val, backend)

    dev_f1 = selection_f1(trajectory.records[selected].dev_metrics)
    val_f1 = selection_f1(val_metrics[selected])
    comparison = None
    if evaluate_all:
        scores = [selection_f1(val_metrics[t]) for t in indices]
        optimal = scores.index(max(scores))
        comparison = SelectedVsOptimal(
            selected_index=selected,
            selected_val_f1=val_f1,
            optimal_index=optimal,
            optimal_val_f1=scores[optimal],
        )
    logger.info(f"Validation of iteration {selected}: dev F1 {dev_f1:.4f}, val F1 {val_f1:.4f}")
    return ValidationReport(
        selected_index=selected,
        val_metrics=val_metrics,
        dev_val_gap=dev_f1 - val_f1,
        selected_vs_optimal=comparison,
    )
