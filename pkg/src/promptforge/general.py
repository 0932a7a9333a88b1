"""General utilities.

This module provides nested-dictionary helpers used by the configuration layer
and an order-preserving map with bounded parallelism used for per-note model
calls.
"""

import copy
import logging
from collections.abc import (
    Callable,
    Iterable,
    Sequence,
)
from concurrent.futures import ThreadPoolExecutor
from typing import Any, TypeVar

__all__ = [
    "deep_merge",
    "ordered_map",
    "set_nested_key",
]

logger = logging.getLogger(__name__)

_T = TypeVar("_T")
_R = TypeVar("_R")

_MISSING = object()


def set_nested_key(obj: dict, dotted_key: str, value: Any) -> None:
    """Set a value in a nested dictionary using a dotted key, in place.

    Intermediate dictionaries are created as needed.

    Args:
        obj (dict): Dictionary to modify.
        dotted_key (str): Key path such as 'optimizer.t_max'.
        value (Any): Value to store.

    Raises:
        ValueError: If the key is empty or an intermediate value is not a dictionary.
    """
    keys = dotted_key.split(".")
    if not dotted_key or any(not key for key in keys):
        raise ValueError(f"Invalid key: {dotted_key!r}")
    node = obj
    for key in keys[:-1]:
        child = node.get(key, _MISSING)
        if child is _MISSING:
            child = node[key] = {}
        elif not isinstance(child, dict):
            raise ValueError(f"Cannot descend into non-section key {key!r} of {dotted_key!r}")
        node = child
    node[keys[-1]] = value


def deep_merge(base: dict, override: dict) -> dict:
    """Recursively merge two dictionaries without modifying either.

    Args:
        base (dict): Defaults.
        override (dict): Values taking precedence.

    Returns:
        dict: Merged copy.
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def ordered_map(
    func: Callable[[_T], _R],
    items: Iterable[_T],
    parallelism: int = 1,
) -> list[_R]:
    """Apply a function to every item, returning results in input order.

    With `parallelism` above 1 the calls run on a thread pool; completion order
    never affects the order of the results. The first exception raised by any
    call propagates after in-flight calls finish.

    Args:
        func (Callable[[_T], _R]): Function to apply.
        items (Iterable[_T]): Items to process.
        parallelism (int, optional): Maximum concurrent calls. Defaults to 1.

    Returns:
        list[_R]: Results, aligned with `items`.

    Raises:
        ValueError: If `parallelism` is not positive.
    """
    if parallelism < 1:
        raise ValueError("parallelism should be positive")
    items_seq: Sequence[_T] = items if isinstance(items, Sequence) else list(items)
    if parallelism == 1 or len(items_seq) <= 1:
        return [func(item) for item in items_seq]
    with ThreadPoolExecutor(max_workers=parallelism) as executor:
        return list(executor.map(func, items_seq))
