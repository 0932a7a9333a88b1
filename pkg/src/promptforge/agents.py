"""Agents of the refinement loop.

Each agent is a role template paired with a response parser:

- specialist: classifies one note under the current prompt.
- improver (false positive / false negative): critiques one misclassified note.
- summarizer (sensitivity / specificity): synthesizes a revised prompt from critiques.
- guiding: redirects the loop when development F1 stalls.

Role templates live in `promptforge/templates/<role>.txt`. A template is split
into named sections by lines of the form `[section]`; lines starting with `#`
before the first section are comments. The first line of every system section
is `ROLE: <role>`, which is how a simulated backend recognizes the role.
"""

import functools
import importlib.resources
import logging
import re
import string
from collections.abc import Sequence
from dataclasses import dataclass

from promptforge.errors import NothingToSynthesizeError, ResponseParseError
from promptforge.typing import (
    DirectiveKind,
    Direction,
    ErrorKind,
    FilePath,
    Label,
    ParseStatus,
    PromptOrigin,
)

from promptforge.constants import (
    DIRECTIONS,
    DIRECTIVE_KINDS,
    NON_ACTIONABLE_MARKER,
)
from promptforge.dataset import Note
from promptforge.gateway import Backend, ModelRequest
from promptforge.path import resolve_path

__all__ = [
    "Critique",
    "GuidanceDirective",
    "Prediction",
    "Prompt",
    "PromptTemplate",
    "ROLE_MARKER",
    "SOP",
    "classify",
    "critique_false_negative",
    "critique_false_positive",
    "default_sop",
    "extract_tagged",
    "guide",
    "initial_prompt",
    "load_sop",
    "load_template",
    "parse_answer",
    "prompt_id",
    "role_of",
    "synthesize",
]

logger = logging.getLogger(__name__)

ROLE_MARKER = "ROLE:"

_SECTION_RE = re.compile(r"^\[(\w+)\]\s*$")
_DIRECTIVE_RE = re.compile(r"^\s*DIRECTIVE:\s*([A-Za-z_]+)\s*$", re.IGNORECASE)
_ANSWER_TOKEN_RE = re.compile(r"[\"'](yes|no)[\"']", re.IGNORECASE)
_PUNCTUATION_TABLE = str.maketrans({char: " " for char in string.punctuation})

_ORIGIN_BY_DIRECTION: dict[str, PromptOrigin] = {
    "sensitivity": "sensitivity_synthesis",
    "specificity": "specificity_synthesis",
}
_ERROR_KIND_BY_DIRECTION: dict[str, ErrorKind] = {
    "sensitivity": "false_negative",
    "specificity": "false_positive",
}


@dataclass(frozen=True)
class Prompt:
    """A detection prompt and its lineage."""

    id: str
    iteration: int
    text: str
    origin: PromptOrigin
    parent_id: str | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"Prompt {self.id!r} has empty text")
        if self.iteration < 0:
            raise ValueError(f"Prompt {self.id!r} has negative iteration {self.iteration}")
        if self.origin == "initial" and (self.iteration != 0 or self.parent_id is not None):
            raise ValueError("Initial prompts have iteration 0 and no parent")
        if self.origin != "initial" and self.parent_id is None:
            raise ValueError(f"Synthesized prompt {self.id!r} needs a parent")


@dataclass(frozen=True)
class SOP:
    """Fixed task framing shared by every agent.

    The text must state the output contract, i.e. quote the answer tokens
    "yes" and "no".
    """

    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("SOP text is empty")
        tokens = {match.lower() for match in _ANSWER_TOKEN_RE.findall(self.text)}
        if tokens != {"yes", "no"}:
            raise ValueError('SOP must quote both answer tokens "yes" and "no"')


@dataclass(frozen=True)
class Prediction:
    note_id: str
    label: Label
    raw_text: str
    parse_status: ParseStatus

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"Prediction label must be 0 or 1, got {self.label!r}")
        if self.parse_status == "defaulted" and self.label != 0:
            raise ValueError("Defaulted predictions are negative")


@dataclass(frozen=True)
class Critique:
    note_id: str
    error_kind: ErrorKind
    text: str
    actionable: bool


@dataclass(frozen=True)
class GuidanceDirective:
    kind: DirectiveKind
    text: str
    triggered_at: int

    def __post_init__(self) -> None:
        if self.kind not in DIRECTIVE_KINDS:
            raise ValueError(f"Unknown directive kind {self.kind!r}")


@dataclass(frozen=True)
class PromptTemplate:
    """A role template split into named sections."""

    name: str
    sections: dict[str, str]

    @classmethod
    def parse(cls, name: str, source: str) -> "PromptTemplate":
        sections: dict[str, list[str]] = {}
        current: list[str] | None = None
        for line in source.splitlines():
            match = _SECTION_RE.match(line)
            if match:
                current = sections.setdefault(match.group(1), [])
            elif current is not None:
                current.append(line)
            elif line.strip() and not line.startswith("#"):
                raise ValueError(f"Template {name!r}: text before the first section")
        if "system" not in sections:
            raise ValueError(f"Template {name!r} has no [system] section")
        return cls(
            name=name,
            sections={key: "\n".join(lines).strip("\n") for key, lines in sections.items()},
        )

    def render(self, section: str, **values: str) -> str:
        """Fill one section's placeholders.

        Raises:
            KeyError: If the section does not exist or a placeholder has no value.
        """
        return self.sections[section].format(**values)


@functools.cache
def load_template(name: str) -> PromptTemplate:
    """Load a packaged role template by name (e.g. 'specialist')."""
    source = importlib.resources.files("promptforge") / "templates" / f"{name}.txt"
    return PromptTemplate.parse(name, source.read_text(encoding="utf-8"))


def default_sop() -> SOP:
    """The packaged SOP."""
    source = importlib.resources.files("promptforge") / "templates" / "sop.txt"
    return SOP(text=source.read_text(encoding="utf-8").strip())


def load_sop(file_path: FilePath) -> SOP:
    """Read an SOP from a UTF-8 text file.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If the text does not quote both answer tokens.
    """
    with open(resolve_path(file_path), mode="r", encoding="utf-8") as rf:
        return SOP(text=rf.read().strip())


def role_of(system_text: str) -> str | None:
    """Role named on the first line of a system text, if any."""
    first_line = system_text.lstrip().split("\n", 1)[0].strip()
    if not first_line.startswith(ROLE_MARKER):
        return None
    return first_line[len(ROLE_MARKER) :].strip() or None


def extract_tagged(text: str, tag: str) -> str | None:
    """Content of the first `<tag>...</tag>` block, stripped."""
    match = re.search(rf"<{tag}(?:\s[^>]*)?>(.*?)</{tag}>", text, re.DOTALL)
    return match.group(1).strip() if match else None


def prompt_id(iteration: int) -> str:
    return f"prompt-{iteration}"


def initial_prompt(symptom: str) -> Prompt:
    """Iteration-0 prompt: the bare symptom term."""
    return Prompt(id=prompt_id(0), iteration=0, text=symptom.strip(), origin="initial")


def parse_answer(text: str) -> tuple[Label | None, ParseStatus]:
    """Read a yes/no answer.

    An exact lowercase "yes" or "no" is clean. Otherwise the text is lowercased,
    punctuation is stripped and the leading word decides.

    Returns:
        tuple[Label | None, ParseStatus]: Label (None when ambiguous) and parse status.
    """
    stripped = text.strip()
    if stripped in ("yes", "no"):
        return (1 if stripped == "yes" else 0), "clean"
    words = stripped.lower().translate(_PUNCTUATION_TABLE).split()
    if words and words[0] in ("yes", "no"):
        return (1 if words[0] == "yes" else 0), "normalized"
    return None, "defaulted"


def classify(prompt: Prompt, sop: SOP, note: Note, backend: Backend) -> Prediction:
    """Classify one note under `prompt`.

    Ambiguous output gets one retry with a clarification appended. If that is
    still ambiguous the prediction defaults to negative.

    Raises:
        GatewayError: If the backend fails.
    """
    template = load_template("specialist")
    system_text = template.render("system", sop=sop.text, prompt=prompt.text)
    user_text = template.render("user", note=note.text)

    response = backend.complete(ModelRequest(system_text=system_text, user_text=user_text))
    label, status = parse_answer(response.text)
    if label is not None:
        return Prediction(note_id=note.id, label=label, raw_text=response.text, parse_status=status)

    logger.debug(f"Ambiguous answer for note {note.id}, retrying")
    retry_text = f"{user_text}\n\n{template.render('retry')}"
    response = backend.complete(ModelRequest(system_text=system_text, user_text=retry_text))
    label, _ = parse_answer(response.text)
    if label is not None:
        return Prediction(note_id=note.id, label=label, raw_text=response.text, parse_status="retried")

    logger.warning(f"Unparseable answer for note {note.id}, defaulting to negative")
    return Prediction(note_id=note.id, label=0, raw_text=response.text, parse_status="defaulted")


def _is_actionable(text: str) -> bool:
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    return bool(lines) and lines[0] != NON_ACTIONABLE_MARKER


def _critique(kind: ErrorKind, prompt: Prompt, sop: SOP, note: Note, backend: Backend) -> Critique:
    template = load_template(f"improver_{kind}")
    request = ModelRequest(
        system_text=template.render("system", sop=sop.text, prompt=prompt.text),
        user_text=template.render("user", note=note.text),
    )
    text = backend.complete(request).text.strip()
    return Critique(note_id=note.id, error_kind=kind, text=text, actionable=_is_actionable(text))


def critique_false_positive(prompt: Prompt, sop: SOP, note: Note, backend: Backend) -> Critique:
    """Critique a note predicted positive whose label is negative."""
    return _critique("false_positive", prompt, sop, note, backend)


def critique_false_negative(prompt: Prompt, sop: SOP, note: Note, backend: Backend) -> Critique:
    """Critique a note predicted negative whose label is positive."""
    return _critique("false_negative", prompt, sop, note, backend)


def _format_critiques(critiques: Sequence[Critique]) -> str:
    return "\n\n".join(
        f'<critique note="{critique.note_id}">\n{critique.text}\n</critique>'
        for critique in critiques
    )


def synthesize(
    critiques: Sequence[Critique],
    base: Prompt,
    sop: SOP,
    direction: Direction,
    backend: Backend,
    *,
    failed_example: Prompt | None = None,
    guidance: GuidanceDirective | None = None,
    iteration: int | None = None,
) -> Prompt:
    """Synthesize a revised prompt from critiques of `base`.

    Args:
        critiques (Sequence[Critique]): Actionable critiques matching `direction`, in corpus order.
        base (Prompt): Prompt being revised; becomes the parent.
        sop (SOP): Task framing.
        direction (Direction): 'sensitivity' (feature expansion) or 'specificity' (constraint tightening).
        backend (Backend): Model backend.
        failed_example (Prompt | None, optional): A revision that degraded performance, shown as an
            example not to repeat. Makes the result a revert synthesis. Defaults to None.
        guidance (GuidanceDirective | None, optional): Directive whose text is passed along. Defaults to None.
        iteration (int | None, optional): Iteration of the new prompt. Defaults to `base.iteration + 1`.

    Returns:
        Prompt: The new prompt.

    Raises:
        NothingToSynthesizeError: If `critiques` is empty.
        ValueError: If a critique is non-actionable or of the wrong error kind.
        ResponseParseError: If the model returns no prompt text.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"Unknown direction {direction!r}")
    if not critiques:
        raise NothingToSynthesizeError("nothing to synthesize")
    expected_kind = _ERROR_KIND_BY_DIRECTION[direction]
    for critique in critiques:
        if not critique.actionable:
            raise ValueError(f"Non-actionable critique for note {critique.note_id} passed to synthesis")
        if critique.error_kind != expected_kind:
            raise ValueError(
                f"Critique for note {critique.note_id} is {critique.error_kind}, "
                f"expected {expected_kind} for {direction}"
            )

    template = load_template(f"summarizer_{direction}")
    failed_block = ""
    if failed_example is not None:
        failed_block = "\n" + template.render("failed_prompt", failed_prompt=failed_example.text) + "\n"
    guidance_block = ""
    if guidance is not None:
        guidance_block = "\n" + template.render("guidance", guidance=guidance.text) + "\n"

    request = ModelRequest(
        system_text=template.render("system", sop=sop.text),
        user_text=template.render(
            "user",
            prompt=base.text,
            critiques=_format_critiques(critiques),
            failed_prompt=failed_block,
            guidance=guidance_block,
        ),
    )
    response = backend.complete(request)
    text = extract_tagged(response.text, "prompt")
    if text is None:
        text = response.text.strip()
    if not text:
        raise ResponseParseError("Summarizer returned an empty prompt")

    if iteration is None:
        iteration = base.iteration + 1
    origin = "revert_synthesis" if failed_example is not None else _ORIGIN_BY_DIRECTION[direction]
    return Prompt(
        id=prompt_id(iteration),
        iteration=iteration,
        text=text,
        origin=origin,
        parent_id=base.id,
    )


def guide(
    f1_history: Sequence[float],
    target: Direction,
    current: Prompt,
    sop: SOP,
    backend: Backend,
) -> GuidanceDirective:
    """Ask for a directive after a non-improving iteration.

    The reply's first `DIRECTIVE: <kind>` line selects the kind; anything else
    falls back to a rewrite strategy carrying the whole reply as guidance.

    Args:
        f1_history (Sequence[float]): Development F1 of every completed iteration, in order.
        target (Direction): Metric currently prioritized.
        current (Prompt): Latest prompt.
        sop (SOP): Task framing.
        backend (Backend): Model backend.

    Returns:
        GuidanceDirective: Directive with `triggered_at` equal to the number of completed iterations.

    Raises:
        ValueError: If fewer than two iterations completed or the last one improved.
    """
    if len(f1_history) < 2:
        raise ValueError("Guidance needs at least two completed iterations")
    if f1_history[-1] > f1_history[-2]:
        raise ValueError("Guidance is only issued when development F1 did not improve")

    template = load_template("guiding")
    history = "\n".join(f"iteration {t}: dev F1 {f1:.4f}" for t, f1 in enumerate(f1_history))
    request = ModelRequest(
        system_text=template.render("system", sop=sop.text),
        user_text=template.render("user", target=target, history=history, prompt=current.text),
    )
    reply = backend.complete(request).text.strip()

    kind: DirectiveKind = "rewrite_strategy"
    body_lines = []
    found = False
    for line in reply.splitlines():
        match = _DIRECTIVE_RE.match(line) if not found else None
        if match:
            found = True
            if match.group(1).lower() in DIRECTIVE_KINDS:
                kind = match.group(1).lower()  # type: ignore[assignment]
        else:
            body_lines.append(line)
    text = "\n".join(body_lines).strip() or reply or kind
    directive = GuidanceDirective(kind=kind, text=text, triggered_at=len(f1_history))
    logger.info(f"Guidance at iteration {directive.triggered_at}: {directive.kind}")
    return directive
