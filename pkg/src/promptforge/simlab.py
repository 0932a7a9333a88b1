"""Deterministic simulated world.

The world stands in for both the language model and the clinical corpus. Every
synthetic note gets a latent score (negatives around 0, positives around
`separation`) and a prompt is reduced to a single decision boundary, encoded
in its text as `[sim-boundary:+1.234567]`. The simulated specialist answers
"yes" exactly when a note's score reaches the boundary.

Prompt synthesis moves the boundary down (sensitivity) or up (specificity) by

    step_gain * error_count / class_count + N(0, 1) * noise_scale / class_count

where `class_count` is the number of positive development notes, so steps
grow large and noisy as positives become scarce. The boundary is clamped to
`[-clamp, separation + clamp]`. This is a one-dimensional model of prompt
refinement under class imbalance, not a claim about language model internals.

Improver, summarizer and guiding replies are generated from world state and
follow the same formats a live model is asked for, so the agents' real parsers
run against them.
"""

import logging
import re
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from promptforge.errors import UnknownRoleError
from promptforge.typing import Direction, FilePath

from promptforge.agents import (
    SOP,
    default_sop,
    extract_tagged,
    initial_prompt,
    role_of,
)
from promptforge.constants import DIRECTIONS
from promptforge.dataset import (
    TERM_MODELS,
    Corpus,
    TermModel,
    generate_synthetic_corpus,
)
from promptforge.gateway import SimulatedBackend
from promptforge.metrics import (
    Metrics,
    format_metric,
    is_defined,
    selection_f1,
)
from promptforge.pipeline import (
    DevelopmentOptions,
    Thresholds,
    run_development,
    run_validation,
)
from promptforge.restruct import csv_dump, gen_hash

__all__ = [
    "SUMMARY_COLUMNS",
    "TRACE_COLUMNS",
    "InstabilityRow",
    "InstabilitySummary",
    "SimParams",
    "SimTrace",
    "SimTraceRow",
    "SimWorld",
    "apply_synthesis_step",
    "boundary_of",
    "build_world",
    "run_instability_experiment",
    "run_simulated_pipeline",
    "sim_prompt_text",
]

logger = logging.getLogger(__name__)

_BOUNDARY_RE = re.compile(r"\[sim-boundary:([+-]?\d+(?:\.\d+)?)\]")
_HISTORY_F1_RE = re.compile(r"dev F1 (\d+(?:\.\d+)?)")

TRACE_COLUMNS = (
    "iteration",
    "boundary",
    "dev_sensitivity",
    "dev_specificity",
    "dev_f1",
    "val_sensitivity",
    "val_specificity",
    "val_f1",
)


@dataclass(frozen=True)
class SimParams:
    separation: float = 2.0
    step_gain: float = 1.5
    noise_scale: float = 0.8
    clamp: float = 3.0

    def __post_init__(self) -> None:
        if self.separation <= 0:
            raise ValueError(f"separation must be positive, got {self.separation}")
        if self.step_gain <= 0:
            raise ValueError(f"step_gain must be positive, got {self.step_gain}")
        if self.noise_scale < 0:
            raise ValueError(f"noise_scale must be non-negative, got {self.noise_scale}")
        if self.clamp < 0:
            raise ValueError(f"clamp must be non-negative, got {self.clamp}")

    @property
    def initial_boundary(self) -> float:
        return self.separation / 2.0


def boundary_of(prompt_text: str, default: float) -> float:
    """Decision boundary encoded in a prompt, or `default` (e.g. for the bare term)."""
    match = _BOUNDARY_RE.search(prompt_text)
    return float(match.group(1)) if match else default


def sim_prompt_text(term: str, direction: Direction, boundary: float) -> str:
    hint = (
        "Count indirect descriptions and paraphrases of the symptom."
        if direction == "sensitivity"
        else "Do not count negated, resolved or historical mentions."
    )
    return f"{term}\n{hint}\n[sim-boundary:{boundary:+.6f}]"


@dataclass
class SimWorld:
    """Simulated corpus, latent scores and the current decision boundary.

    `boundary` is mutated by `apply_synthesis_step` only.
    """

    n: int
    prevalence: float
    seed: int
    params: SimParams
    term_model: TermModel
    dev: Corpus
    val: Corpus
    scores: dict[str, float]
    boundary: float
    rng: np.random.Generator = field(repr=False)

    @property
    def separation(self) -> float:
        return self.params.separation

    @property
    def step_gain(self) -> float:
        return self.params.step_gain

    @property
    def noise_scale(self) -> float:
        return self.params.noise_scale

    def score_of(self, note_text: str) -> float:
        try:
            return self.scores[note_text.strip()]
        except KeyError:
            raise ValueError(f"Note is not part of the simulated corpus: {note_text[:60]!r}")

    def predict(self, note_text: str, boundary: float) -> int:
        return 1 if self.score_of(note_text) >= boundary else 0

    def respond(self, system_text: str, user_text: str) -> str:
        """Answer a role request.

        Raises:
            UnknownRoleError: If the system text names no role the world implements.
        """
        role = role_of(system_text)
        handlers = {
            "specialist": self._specialist,
            "improver_false_positive": self._improver_false_positive,
            "improver_false_negative": self._improver_false_negative,
            "summarizer_sensitivity": self._summarizer,
            "summarizer_specificity": self._summarizer,
            "guiding": self._guiding,
        }
        if role not in handlers:
            raise UnknownRoleError(f"Simulated world has no role {role!r}")
        return handlers[role](role, system_text, user_text)

    def _note(self, user_text: str) -> str:
        note_text = extract_tagged(user_text, "note")
        if note_text is None:
            raise ValueError("Request carries no <note> block")
        return note_text

    def _specialist(self, role: str, system_text: str, user_text: str) -> str:
        prompt_text = extract_tagged(system_text, "prompt") or ""
        boundary = boundary_of(prompt_text, self.params.initial_boundary)
        return "yes" if self.predict(self._note(user_text), boundary) else "no"

    def _improver_false_negative(self, role: str, system_text: str, user_text: str) -> str:
        note_text = self._note(user_text)
        term = self.term_model.term
        family = self.term_model.family_of(note_text)
        if family is None:
            return f"Missed positive signal: the note documents {term} in wording the prompt does not cover."
        phrase = next(
            phrase
            for phrase in self.term_model.families[family]
            if phrase.lower() in note_text.lower()
        )
        label = family.replace("_", " ")
        return (
            f'Missed positive signal: the note describes {term} by {label} ("{phrase}"). '
            f"The prompt should also recognize {label} phrasings."
        )

    def _improver_false_positive(self, role: str, system_text: str, user_text: str) -> str:
        note_text = self._note(user_text)
        hedge = self.term_model.hedge_in(note_text)
        if hedge is None:
            return (
                f"Overlooked negative indicator: the note documents no {self.term_model.term}; "
                "the prompt flagged routine findings."
            )
        return (
            f'Overlooked negative indicator: the note says "{hedge}", which rules the symptom out. '
            "The prompt should exclude negated mentions."
        )

    def _summarizer(self, role: str, system_text: str, user_text: str) -> str:
        direction = role.removeprefix("summarizer_")
        base_text = extract_tagged(user_text, "base_prompt") or ""
        self.boundary = boundary_of(base_text, self.params.initial_boundary)
        # Noise keyed on the request so identical requests get identical replies
        request_key = int(gen_hash([system_text, user_text])[:16], 16)
        rng = np.random.default_rng([self.seed, request_key])
        boundary = apply_synthesis_step(
            self,
            direction,  # type: ignore[arg-type]
            error_count=user_text.count("<critique "),
            class_count=self.dev.positives,
            rng=rng,
        )
        text = sim_prompt_text(self.term_model.term, direction, boundary)  # type: ignore[arg-type]
        return f"<prompt>\n{text}\n</prompt>"

    def _guiding(self, role: str, system_text: str, user_text: str) -> str:
        history = extract_tagged(user_text, "history") or ""
        values = [float(value) for value in _HISTORY_F1_RE.findall(history)]
        latest = values[-1] if values else 0.0
        if latest == 0.0:
            return (
                "DIRECTIVE: rewrite_strategy\n"
                "Development F1 fell to zero. Restart from the bare symptom term "
                "and widen coverage gradually."
            )
        return (
            "DIRECTIVE: switch_target_metric\n"
            f"Refinement stalled at dev F1 {latest:.4f}; prioritize the other metric next."
        )


def build_world(
    n: int,
    prevalence: float,
    seed: int,
    params: SimParams | None = None,
    term_model: TermModel | None = None,
) -> SimWorld:
    """Create a simulated world with development and validation corpora of n/2 notes each.

    Args:
        n (int): Total number of notes, even and at least 4.
        prevalence (float): Prevalence of each split, strictly between 0 and 1.
        seed (int): Seed for corpora, latent scores and the step noise.
        params (SimParams | None, optional): Dynamics. Defaults to SimParams().
        term_model (TermModel | None, optional): Planted symptom. Defaults to 'brain fog'.

    Returns:
        SimWorld: The world, with the boundary between the two score means.

    Raises:
        ValueError: If the size or prevalence is invalid.
    """
    if params is None:
        params = SimParams()
    if term_model is None:
        term_model = TERM_MODELS["brain fog"]
    if n < 4 or n % 2:
        raise ValueError(f"n must be an even number of at least 4, got {n}")
    if not 0.0 < prevalence < 1.0:
        raise ValueError(f"Prevalence must be strictly between 0 and 1, got {prevalence}")

    dev_seed, val_seed, score_seed = (int(s) for s in np.random.SeedSequence(seed).generate_state(3))
    dev = generate_synthetic_corpus(n // 2, prevalence, term_model, dev_seed, split="dev")
    val = generate_synthetic_corpus(n // 2, prevalence, term_model, val_seed, split="val")

    score_rng = np.random.default_rng(score_seed)
    scores = {}
    for note in (*dev.notes, *val.notes):
        mean = params.separation if note.label == 1 else 0.0
        scores[note.text] = float(score_rng.normal(mean, 1.0))

    return SimWorld(
        n=n,
        prevalence=prevalence,
        seed=seed,
        params=params,
        term_model=term_model,
        dev=dev,
        val=val,
        scores=scores,
        boundary=params.initial_boundary,
        rng=np.random.default_rng(score_seed + 1),
    )


def apply_synthesis_step(
    world: SimWorld,
    direction: Direction,
    error_count: int,
    class_count: int,
    rng: np.random.Generator | None = None,
) -> float:
    """Move the world's boundary for one synthesis.

    Args:
        world (SimWorld): World to update.
        direction (Direction): 'sensitivity' lowers the boundary, 'specificity' raises it.
        error_count (int): Number of critiques driving the step.
        class_count (int): Normalizing class size.
        rng (np.random.Generator | None, optional): Noise source. Defaults to the world's own stream.

    Returns:
        float: The new boundary.

    Raises:
        ValueError: If `class_count` is below 1, `error_count` is negative or the direction is unknown.
    """
    if class_count < 1:
        raise ValueError(f"class_count must be >= 1, got {class_count}")
    if error_count < 0:
        raise ValueError(f"error_count must be >= 0, got {error_count}")
    if direction not in DIRECTIONS:
        raise ValueError(f"Unknown direction {direction!r}")
    if rng is None:
        rng = world.rng
    params = world.params
    step = params.step_gain * error_count / class_count
    step += float(rng.standard_normal()) * params.noise_scale / class_count
    moved = world.boundary - step if direction == "sensitivity" else world.boundary + step
    world.boundary = float(np.clip(moved, -params.clamp, params.separation + params.clamp))
    return world.boundary


@dataclass(frozen=True)
class SimTraceRow:
    t: int
    boundary: float
    dev: Metrics
    val: Metrics

    def cells(self) -> list[str]:
        return [
            str(self.t),
            f"{self.boundary:+.6f}",
            format_metric(self.dev.sensitivity, 6),
            format_metric(self.dev.specificity, 6),
            format_metric(self.dev.f1, 6),
            format_metric(self.val.sensitivity, 6),
            format_metric(self.val.specificity, 6),
            format_metric(self.val.f1, 6),
        ]


@dataclass(frozen=True)
class SimTrace:
    """Per-iteration boundary and metrics of one simulated run."""

    prevalence: float
    seed: int
    rows: tuple[SimTraceRow, ...]
    selected_index: int

    @property
    def val_sensitivity(self) -> list[float]:
        values = [row.val.sensitivity for row in self.rows if is_defined(row.val.sensitivity)]
        return values  # type: ignore[return-value]

    @property
    def oscillation_amplitude(self) -> float:
        values = self.val_sensitivity
        return max(values) - min(values) if values else 0.0

    @property
    def collapse_iterations(self) -> tuple[int, ...]:
        return tuple(
            row.t
            for row in self.rows
            if row.val.counts.positives > 0 and row.val.sensitivity == 0.0
        )

    @property
    def dev_collapse_iterations(self) -> tuple[int, ...]:
        """Collapse iterations as the selector sees them, on the development split."""
        return tuple(
            row.t
            for row in self.rows
            if row.dev.counts.positives > 0 and row.dev.sensitivity == 0.0
        )

    @property
    def final_val_f1(self) -> float:
        return selection_f1(self.rows[-1].val)

    @property
    def selected_val_f1(self) -> float:
        return selection_f1(self.rows[self.selected_index].val)

    def to_csv(self, file_path: FilePath) -> None:
        csv_dump(file_path, TRACE_COLUMNS, (row.cells() for row in self.rows))


def run_simulated_pipeline(
    prevalence: float,
    seed: int,
    params: SimParams | None = None,
    *,
    n: int = 400,
    t_max: int = 7,
    term_model: TermModel | None = None,
    sop: SOP | None = None,
    options: DevelopmentOptions | None = None,
) -> SimTrace:
    """Run development and full validation against a fresh simulated world.

    The default options disable degradation prevention and select by best
    development F1, so the trace shows the unguarded refinement dynamics.
    """
    world = build_world(n, prevalence, seed, params, term_model)
    backend = SimulatedBackend(world)
    if sop is None:
        sop = default_sop()
    if options is None:
        options = DevelopmentOptions(
            t_max=t_max,
            selection_strategy="best_dev_f1",
            degradation_prevention=False,
        )
    trajectory = run_development(
        initial_prompt(world.term_model.term),
        sop,
        world.dev,
        Thresholds(),
        backend,
        options,
    )
    report = run_validation(trajectory, sop, world.val, backend, evaluate_all=True)
    initial = world.params.initial_boundary
    rows = tuple(
        SimTraceRow(
            t=record.t,
            boundary=boundary_of(record.prompt.text, initial),
            dev=record.dev_metrics,
            val=report.val_metrics[record.t],
        )
        for record in trajectory.records
    )
    return SimTrace(
        prevalence=prevalence,
        seed=seed,
        rows=rows,
        selected_index=report.selected_index,
    )


@dataclass(frozen=True)
class InstabilityRow:
    prevalence: float
    seeds: int
    mean_amplitude: float
    collapse_frequency: float
    mean_final_val_f1: float
    mean_selected_val_f1: float

    def cells(self) -> list[str]:
        return [
            f"{self.prevalence:g}",
            str(self.seeds),
            f"{self.mean_amplitude:.6f}",
            f"{self.collapse_frequency:.6f}",
            f"{self.mean_final_val_f1:.6f}",
            f"{self.mean_selected_val_f1:.6f}",
        ]


SUMMARY_COLUMNS = (
    "prevalence",
    "seeds",
    "mean_amplitude",
    "collapse_frequency",
    "mean_final_val_f1",
    "mean_selected_val_f1",
)


@dataclass(frozen=True)
class InstabilitySummary:
    params: SimParams
    rows: tuple[InstabilityRow, ...]
    traces: tuple[SimTrace, ...]

    def row_for(self, prevalence: float) -> InstabilityRow:
        for row in self.rows:
            if row.prevalence == prevalence:
                return row
        raise KeyError(prevalence)

    def to_csv(self, file_path: FilePath) -> None:
        csv_dump(file_path, SUMMARY_COLUMNS, (row.cells() for row in self.rows))

    def traces_to_csv(self, file_path: FilePath) -> None:
        csv_dump(
            file_path,
            ("prevalence", "seed", *TRACE_COLUMNS),
            (
                [f"{trace.prevalence:g}", str(trace.seed), *row.cells()]
                for trace in self.traces
                for row in trace.rows
            ),
        )


def _run_job(job: tuple[float, int, SimParams, int, int]) -> SimTrace:
    prevalence, seed, params, n, t_max = job
    return run_simulated_pipeline(prevalence, seed, params, n=n, t_max=t_max)


def run_instability_experiment(
    prevalences: Sequence[float],
    seeds: int,
    params: SimParams | None = None,
    *,
    n: int = 400,
    t_max: int = 7,
    base_seed: int = 0,
    workers: int = 1,
) -> InstabilitySummary:
    """Sweep prevalences and seeds, summarizing validation-sensitivity instability.

    Seeds `base_seed .. base_seed + seeds - 1` are run for every prevalence.
    Runs are independent, so `workers` above 1 spreads them over processes;
    the summary does not depend on the worker count.

    Args:
        prevalences (Sequence[float]): Prevalences to compare.
        seeds (int): Number of seeds per prevalence.
        params (SimParams | None, optional): Dynamics. Defaults to SimParams().
        n (int, optional): Notes per world (both splits). Defaults to 400.
        t_max (int, optional): Refinement iterations per run. Defaults to 7.
        base_seed (int, optional): First seed. Defaults to 0.
        workers (int, optional): Worker processes. Defaults to 1.

    Returns:
        InstabilitySummary: One row per prevalence, in the given order, plus every trace.

    Raises:
        ValueError: If no prevalence or no seed is given.
    """
    if params is None:
        params = SimParams()
    if not prevalences:
        raise ValueError("At least one prevalence is required")
    if seeds < 1:
        raise ValueError(f"seeds must be >= 1, got {seeds}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if len(prevalences) < 2 or seeds < 10:
        logger.warning(
            f"Degenerate sweep ({len(prevalences)} prevalences, {seeds} seeds): "
            "comparisons across prevalences will be weak"
        )

    jobs = [(p, base_seed + i, params, n, t_max) for p in prevalences for i in range(seeds)]
    logger.info(f"Running {len(jobs)} simulated pipelines with {workers} worker(s)")
    if workers == 1:
        traces = [_run_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            traces = list(executor.map(_run_job, jobs))

    rows = []
    for k, prevalence in enumerate(prevalences):
        group = traces[k * seeds : (k + 1) * seeds]
        rows.append(
            InstabilityRow(
                prevalence=prevalence,
                seeds=seeds,
                mean_amplitude=float(np.mean([trace.oscillation_amplitude for trace in group])),
                collapse_frequency=float(np.mean([bool(trace.collapse_iterations) for trace in group])),
                mean_final_val_f1=float(np.mean([trace.final_val_f1 for trace in group])),
                mean_selected_val_f1=float(np.mean([trace.selected_val_f1 for trace in group])),
            )
        )
        logger.info(
            f"p={prevalence:g}: amplitude {rows[-1].mean_amplitude:.3f}, "
            f"collapse frequency {rows[-1].collapse_frequency:.2f}"
        )
    return InstabilitySummary(params=params, rows=tuple(rows), traces=tuple(traces))
