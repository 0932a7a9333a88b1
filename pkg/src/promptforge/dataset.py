"""Labeled note corpora.

This module loads and saves JSONL corpora, computes prevalence, and generates
deterministic synthetic corpora that stand in for confidential clinical notes.

Corpus file format (UTF-8, one record per line):

```json
{"id": "dev-0001", "text": "Patient reports chest pain.", "label": 1}
```

Splits live in separate files and are never split automatically.
"""

import logging
import os
from collections.abc import Iterator
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from promptforge.errors import CorpusLoadError, JSONDecodeError
from promptforge.typing import (
    FilePath,
    Label,
    SplitName,
)

from promptforge.constants import SPLITS
from promptforge.path import resolve_path
from promptforge.restruct import jsonl_dump, jsonl_loader

__all__ = [
    "Corpus",
    "Note",
    "TERM_MODELS",
    "TermModel",
    "generate_synthetic_corpus",
    "load_corpus",
    "positive_count",
    "prevalence",
    "round_half_up",
    "save_corpus",
]

logger = logging.getLogger(__name__)

_RECORD_KEYS = {"id", "text", "label"}


@dataclass(frozen=True)
class Note:
    """A single labeled note."""

    id: str
    text: str
    label: Label

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValueError(f"Note id must be a non-empty string, got {self.id!r}")
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError(f"Note {self.id!r} has empty text")
        # exact int only: bool and 1.0 compare equal to 1
        if type(self.label) is not int or self.label not in (0, 1):
            raise ValueError(f"Note {self.id!r} label must be 0 or 1, got {self.label!r}")

    def to_record(self) -> dict:
        return {"id": self.id, "text": self.text, "label": self.label}


@dataclass(frozen=True)
class Corpus:
    """An ordered, immutable collection of notes belonging to one split."""

    notes: tuple[Note, ...]
    split: SplitName
    name: str

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ValueError(f"Unknown split {self.split!r}, expected one of {SPLITS}")
        seen: set[str] = set()
        for note in self.notes:
            if note.id in seen:
                raise ValueError(f"Duplicate note id {note.id!r}")
            seen.add(note.id)

    def __len__(self) -> int:
        return len(self.notes)

    def __iter__(self) -> Iterator[Note]:
        return iter(self.notes)

    @property
    def labels(self) -> list[int]:
        return [note.label for note in self.notes]

    @property
    def positives(self) -> int:
        return sum(note.label for note in self.notes)

    @property
    def prevalence(self) -> float:
        return prevalence(self)


def prevalence(corpus: Corpus) -> float:
    """Fraction of positively labeled notes.

    Args:
        corpus (Corpus): Corpus with at least one note.

    Returns:
        float: Positives divided by corpus size.

    Raises:
        ValueError: If the corpus is empty.
    """
    if len(corpus) == 0:
        raise ValueError("Prevalence of an empty corpus is undefined")
    return corpus.positives / len(corpus)


def load_corpus(file_path: FilePath, split: SplitName, name: str | None = None) -> Corpus:
    """Load a JSONL corpus, preserving file order.

    Args:
        file_path (FilePath): Path of the JSONL file.
        split (SplitName): Split the file represents ('dev' or 'val').
        name (str | None, optional): Corpus name. Defaults to the file name without extension.

    Returns:
        Corpus: The loaded corpus.

    Raises:
        FileNotFoundError: If the file does not exist.
        CorpusLoadError: If a record is malformed, an id repeats, or the file holds no records.
    """
    file_path = resolve_path(file_path)
    if name is None:
        name = os.path.splitext(os.path.basename(file_path))[0]

    notes: list[Note] = []
    seen: dict[str, int] = {}
    try:
        for line_number, record in jsonl_loader(file_path):
            if not isinstance(record, dict):
                raise CorpusLoadError("record is not a JSON object", line_number)
            missing = _RECORD_KEYS - record.keys()
            if missing:
                raise CorpusLoadError(f"missing keys {sorted(missing)}", line_number)
            unknown = record.keys() - _RECORD_KEYS
            if unknown:
                logger.warning(f"{file_path}:{line_number}: ignoring unknown keys {sorted(unknown)}")
            try:
                note = Note(id=record["id"], text=record["text"], label=record["label"])
            except ValueError as err:
                raise CorpusLoadError(str(err), line_number) from err
            if note.id in seen:
                raise CorpusLoadError(
                    f"duplicate id {note.id!r} (first seen on line {seen[note.id]})",
                    line_number,
                )
            seen[note.id] = line_number
            notes.append(note)
    except JSONDecodeError as err:
        raise CorpusLoadError(f"invalid JSON: {err}", getattr(err, "line_number", None)) from err

    if not notes:
        raise CorpusLoadError(f"empty corpus: {file_path}")
    corpus = Corpus(notes=tuple(notes), split=split, name=name)
    logger.info(f"Loaded {split} corpus {name!r}: n={len(corpus)}, prevalence={corpus.prevalence:.3f}")
    return corpus


def save_corpus(corpus: Corpus, file_path: FilePath) -> None:
    """Write a corpus as JSONL in note order."""
    jsonl_dump(file_path, (note.to_record() for note in corpus.notes))


def round_half_up(value: float) -> int:
    """Round to the nearest integer, halves away from zero.

    The value goes through its shortest decimal representation first, so
    `100 * 0.005` rounds to 1 rather than suffering binary float error.
    """
    return int(Decimal(repr(value)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def positive_count(n: int, prevalence: float) -> int:
    """Number of positives a synthetic corpus of size `n` receives.

    Args:
        n (int): Corpus size.
        prevalence (float): Target prevalence, strictly between 0 and 1.

    Returns:
        int: round_half_up(n * prevalence).

    Raises:
        ValueError: If the prevalence is out of range or yields no positives or no negatives.
    """
    if n < 2:
        raise ValueError(f"Corpus size must be at least 2, got {n}")
    if not 0.0 < prevalence < 1.0:
        raise ValueError(f"Prevalence must be strictly between 0 and 1, got {prevalence}")
    k = round_half_up(float(Decimal(repr(prevalence)) * n))
    if k < 1 or k > n - 1:
        raise ValueError(f"Infeasible prevalence {prevalence} for n={n}: yields {k} positives")
    return k


@dataclass(frozen=True)
class TermModel:
    """How a symptom is planted into synthetic notes.

    Attributes:
        term (str): Bare symptom term, also the initial prompt text.
        families (dict[str, tuple[str, ...]]): Paraphrase families of positive mentions, each a
            clause completing "Patient ...".
        hedged_negatives (tuple[str, ...]): Negated or reassuring mentions planted in negatives.
        fillers (tuple[str, ...]): Neutral sentences shared by all notes.
    """

    term: str
    families: dict[str, tuple[str, ...]]
    hedged_negatives: tuple[str, ...]
    fillers: tuple[str, ...] = field(
        default=(
            "Vital signs stable.",
            "Medications reviewed and reconciled.",
            "Follow-up scheduled in three months.",
            "Seen for a routine visit.",
            "Labs from last week within normal limits.",
            "Discussed diet and exercise.",
            "Sleep reported as adequate.",
            "No recent travel.",
        )
    )

    @property
    def positive_phrasings(self) -> tuple[str, ...]:
        return tuple(phrase for family in self.families.values() for phrase in family)

    def family_of(self, text: str) -> str | None:
        """Name of the first paraphrase family whose phrasing occurs in `text`."""
        lowered = text.lower()
        for family, phrasings in self.families.items():
            if any(phrase.lower() in lowered for phrase in phrasings):
                return family
        return None

    def hedge_in(self, text: str) -> str | None:
        """The planted hedged negative occurring in `text`, if any."""
        lowered = text.lower()
        for hedge in self.hedged_negatives:
            if hedge.lower() in lowered:
                return hedge
        return None


# Illustrative, non-clinical phrasings. No positive phrasing occurs inside a hedge.
TERM_MODELS: dict[str, TermModel] = {
    "brain fog": TermModel(
        term="brain fog",
        families={
            "direct_mention": ("reports brain fog", "complains of brain fog"),
            "cognitive_slowing": ("describes feeling mentally slow", "notes slowed thinking"),
            "concentration": ("has difficulty concentrating", "struggles to focus at work"),
            "memory_lapses": ("reports frequent memory lapses", "describes losing words mid-sentence"),
        },
        hedged_negatives=(
            "denies brain fog",
            "no brain fog noted",
            "denies difficulty concentrating",
            "memory intact per family",
        ),
    ),
    "chest pain": TermModel(
        term="chest pain",
        families={
            "direct_mention": ("reports chest pain", "complains of chest pain"),
            "pressure": ("describes substernal pressure", "feels pressure in the chest"),
            "tightness": ("reports chest tightness", "describes a tight feeling in the chest"),
            "radiation": ("has pain radiating to the left arm",),
        },
        hedged_negatives=(
            "denies chest pain",
            "no chest pain today",
            "chest wall nontender",
            "denies chest tightness",
        ),
    ),
    "shortness of breath": TermModel(
        term="shortness of breath",
        families={
            "direct_mention": ("reports shortness of breath", "complains of shortness of breath"),
            "dyspnea": ("has dyspnea on exertion", "describes exertional dyspnea"),
            "breathlessness": ("feels winded after one flight of stairs", "becomes breathless when walking"),
            "orthopnea": ("needs three pillows to breathe at night",),
        },
        hedged_negatives=(
            "denies shortness of breath",
            "no dyspnea",
            "breathing comfortably on room air",
            "denies orthopnea",
        ),
    ),
}


def generate_synthetic_corpus(
    n: int,
    prevalence: float,
    term_model: TermModel,
    seed: int,
    split: SplitName = "dev",
    name: str | None = None,
) -> Corpus:
    """Generate a deterministic synthetic corpus.

    Exactly round_half_up(n * prevalence) notes are positive. Positives carry one
    planted phrasing from a randomly chosen paraphrase family; about half of the
    negatives carry a hedged negative so naive term matching can misfire. Note
    texts embed the split and index, so texts are unique across splits.

    Args:
        n (int): Corpus size.
        prevalence (float): Target prevalence, strictly between 0 and 1.
        term_model (TermModel): Planting rules.
        seed (int): Random seed; equal arguments give identical corpora.
        split (SplitName, optional): Split tag. Defaults to 'dev'.
        name (str | None, optional): Corpus name. Defaults to '<term>-<split>-s<seed>'.

    Returns:
        Corpus: The generated corpus.

    Raises:
        ValueError: If the prevalence is infeasible for `n`.
    """
    k = positive_count(n, prevalence)
    rng = np.random.default_rng(seed)
    positive_idx = set(int(i) for i in rng.choice(n, size=k, replace=False))
    families = list(term_model.families.values())
    fillers = term_model.fillers

    notes = []
    for i in range(n):
        first, second = (fillers[int(j)] for j in rng.choice(len(fillers), size=2, replace=False))
        header = f"Note {split}-{i:04d}."
        if i in positive_idx:
            family = families[int(rng.integers(len(families)))]
            phrase = family[int(rng.integers(len(family)))]
            text = f"{header} {first} Patient {phrase}. {second}"
            label = 1
        else:
            if rng.random() < 0.5:
                hedge = term_model.hedged_negatives[int(rng.integers(len(term_model.hedged_negatives)))]
                text = f"{header} {first} {hedge[0].upper()}{hedge[1:]}. {second}"
            else:
                text = f"{header} {first} {second}"
            label = 0
        notes.append(Note(id=f"{split}-{i:04d}", text=text, label=label))

    if name is None:
        name = f"{term_model.term.replace(' ', '_')}-{split}-s{seed}"
    return Corpus(notes=tuple(notes), split=split, name=name)
