"""Utilities for parsing arguments from the command line.

This module provides `type=` validators for `argparse` arguments.
"""

import logging
from collections.abc import Callable
from typing import Any

from promptforge.errors import JSONDecodeError

from promptforge.constants import DEFAULT_SAFECHARS_ALLOWED_CHARS
from promptforge.restruct import json_loads

__all__ = [
    "config_override",
    "nonempty_string",
    "positive_int",
    "safechars_string",
]

logger = logging.getLogger(__name__)


def nonempty_string(name: str) -> Callable[[str], str]:
    """Ensure a string is non-empty.

    Example Usage:

    ```python
    parser.add_argument(
        "--symptom",
        type=nonempty_string("symptom"),
        help="Symptom term used as the initial prompt",
    )
    ```

    Args:
        name (str): Name of the function, used for debugging.

    Returns:
        Callable[[str], str]: The validator.
    """

    def func(text: str) -> str:
        text = text.strip()
        if not text:
            raise ValueError("Must not be an empty string")
        return text

    func.__name__ = name
    return func


def safechars_string(
    name: str,
    allowed_chars: str | set[str] | tuple[str] | list[str] | None = None,
) -> Callable[[str], str]:
    """Ensure a string contains only safe characters (e.g. a run directory name).

    Args:
        name (str): Name of the function, used for debugging.
        allowed_chars (str | set[str] | tuple[str] | list[str] | None, optional): Custom characters
            allowed. Defaults to None (alphanumerics, '-', '_' and '.').

    Returns:
        Callable[[str], str]: The validator.
    """
    if allowed_chars is None:
        allowed = DEFAULT_SAFECHARS_ALLOWED_CHARS
    else:
        allowed = set(allowed_chars)

    def func(text: str) -> str:
        text = text.strip()
        if not text:
            raise ValueError("Must not be an empty string")
        bad = sorted({char for char in text if char not in allowed})
        if bad:
            raise ValueError(f"Invalid characters {bad!r}")
        return text

    func.__name__ = name
    return func


def positive_int(name: str) -> Callable[[str], int]:
    """Ensure a value parses as an integer of at least 1.

    Args:
        name (str): Name of the function, used for debugging.

    Returns:
        Callable[[str], int]: The validator.
    """

    def func(text: str) -> int:
        value = int(text)
        if value < 1:
            raise ValueError("Must be a positive integer")
        return value

    func.__name__ = name
    return func


def config_override(text: str) -> tuple[str, Any]:
    """Parse a 'dotted.key=value' override.

    The value is decoded as JSON when possible ('3', 'true', '[0.03, 0.12]'),
    otherwise kept as a plain string.

    Args:
        text (str): Override as written on the command line.

    Returns:
        tuple[str, Any]: Dotted key and decoded value.

    Raises:
        ValueError: If there is no '=' or the key is empty.
    """
    key, sep, raw_value = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ValueError(f"Expected KEY=VALUE, got {text!r}")
    try:
        value = json_loads(raw_value)
    except JSONDecodeError:
        value = raw_value
    return key, value
