"""Lexicon baseline.

A note is predicted positive when any lexicon term occurs in it. Matching is
case-insensitive, delimited by word boundaries (so "sob" does not match
"sobbing") and tolerant of any run of whitespace between a term's words.
Negation is not handled.

Lexicon file format: plain UTF-8 text, one term per line, blank lines and
lines starting with '#' ignored.
"""

import functools
import logging
import os
import re
from dataclasses import dataclass

from promptforge.typing import FilePath, Label

from promptforge.dataset import (
    Corpus,
    Note,
    TermModel,
)
from promptforge.metrics import (
    Metrics,
    confusion,
    format_metric,
    metrics_from_counts,
)
from promptforge.path import resolve_path

__all__ = [
    "BaselineResult",
    "Lexicon",
    "lexicon_classify",
    "lexicon_evaluate",
    "lexicon_pattern",
    "load_lexicon",
    "planted_lexicon",
    "run_baseline",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Lexicon:
    """Named list of terms, de-duplicated case-insensitively in first-seen order."""

    name: str
    terms: tuple[str, ...]

    def __post_init__(self) -> None:
        unique: dict[str, str] = {}
        for term in self.terms:
            normalized = " ".join(term.split())
            if not normalized:
                raise ValueError(f"Lexicon {self.name!r} contains an empty term")
            unique.setdefault(normalized.lower(), normalized)
        if not unique:
            raise ValueError(f"Lexicon {self.name!r} has no terms")
        object.__setattr__(self, "terms", tuple(unique.values()))


@functools.lru_cache(maxsize=64)
def lexicon_pattern(terms: tuple[str, ...]) -> re.Pattern:
    """Compile terms into one case-insensitive alternation."""
    # Longest first so overlapping terms prefer the fuller match
    ordered = sorted(terms, key=len, reverse=True)
    alternatives = [r"\s+".join(re.escape(word) for word in term.split()) for term in ordered]
    return re.compile(r"(?<!\w)(?:" + "|".join(alternatives) + r")(?!\w)", re.IGNORECASE)


def lexicon_classify(lexicon: Lexicon, note: Note) -> Label:
    """1 if any lexicon term occurs in the note text, else 0."""
    return 1 if lexicon_pattern(lexicon.terms).search(note.text) else 0


def lexicon_evaluate(lexicon: Lexicon, corpus: Corpus) -> Metrics:
    """Score the lexicon classifier on every note of a corpus.

    Raises:
        ValueError: If the corpus is empty.
    """
    if len(corpus) == 0:
        raise ValueError("Cannot evaluate on an empty corpus")
    predictions = [lexicon_classify(lexicon, note) for note in corpus]
    return metrics_from_counts(confusion(predictions, corpus.labels))


def load_lexicon(file_path: FilePath, name: str | None = None) -> Lexicon:
    """Read a lexicon file.

    Args:
        file_path (FilePath): Path of the lexicon file.
        name (str | None, optional): Lexicon name. Defaults to the file name without extension.

    Returns:
        Lexicon: The lexicon.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If the file holds no terms.
    """
    file_path = resolve_path(file_path)
    if name is None:
        name = os.path.splitext(os.path.basename(file_path))[0]
    with open(file_path, mode="r", encoding="utf-8") as rf:
        terms = [
            line.strip() for line in rf if line.strip() and not line.lstrip().startswith("#")
        ]
    if not terms:
        raise ValueError(f"Lexicon file has no terms: {file_path}")
    lexicon = Lexicon(name=name, terms=tuple(terms))
    logger.info(f"Loaded lexicon {name!r} with {len(lexicon.terms)} terms")
    return lexicon


def planted_lexicon(term_model: TermModel) -> Lexicon:
    """Lexicon of exactly the phrasings planted in positive synthetic notes."""
    return Lexicon(
        name=f"{term_model.term.replace(' ', '_')}-planted",
        terms=term_model.positive_phrasings,
    )


@dataclass(frozen=True)
class BaselineResult:
    """Lexicon metrics on a named corpus."""

    lexicon: Lexicon
    corpus_name: str
    metrics: Metrics


def run_baseline(lexicon: Lexicon, corpus: Corpus) -> BaselineResult:
    metrics = lexicon_evaluate(lexicon, corpus)
    logger.info(f"Lexicon {lexicon.name!r} on {corpus.name!r}: F1 {format_metric(metrics.f1)}")
    return BaselineResult(lexicon=lexicon, corpus_name=corpus.name, metrics=metrics)
