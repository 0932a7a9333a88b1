"""Utilities for working with paths.

This module resolves user-supplied paths and lays out run-artifact directories.

Run directory layout:

```
<output_dir>/<run_name>/
├── run.json
├── trajectory.json
├── validation.json
├── baseline.json            (when a lexicon is configured)
├── corpora/{dev,val}.jsonl  (sim mode only)
├── iteration_<t>/
│   ├── prompt.txt
│   ├── metrics.json
│   ├── critiques.jsonl
│   └── predictions.jsonl
└── report/
```
"""

__all__ = [
    "default_cache_dir",
    "ensure_abspath",
    "iteration_dir",
    "resolve_against",
    "resolve_path",
    "stringify_path",
    "unique_run_dir",
]

import logging
import os

from promptforge.typing import FilePath

logger = logging.getLogger(__name__)


def stringify_path(file_path: FilePath) -> str:
    """Stringify a path-like object, expanding the user directory.

    Args:
        file_path (FilePath): Path-like object to stringify.

    Returns:
        str: Path-like object as a string.

    Raises:
        TypeError: If the object is not path-like.
    """
    if not isinstance(file_path, str):
        try:
            file_path = file_path.__fspath__()
        except AttributeError:
            raise TypeError(f"Object is not path-like: {file_path!r}")
    return os.path.expanduser(file_path)


def ensure_abspath(file_path: str) -> str:
    """Make a path absolute if it is not already.

    Args:
        file_path (str): Path to ensure is absolute.

    Returns:
        str: Absolute path.
    """
    return file_path if os.path.isabs(file_path) else os.path.abspath(file_path)


def resolve_path(file_path: FilePath) -> str:
    """Stringify and resolve a path-like object.

    Args:
        file_path (FilePath): Path-like object to resolve.

    Returns:
        str: Absolute path of the path-like object as a string.
    """
    return ensure_abspath(stringify_path(file_path))


def resolve_against(base_dir: FilePath, file_path: FilePath) -> str:
    """Resolve a path relative to a base directory (e.g. a config file's directory).

    Absolute paths and paths starting with '~' are returned resolved as-is.

    Args:
        base_dir (FilePath): Directory relative paths are anchored to.
        file_path (FilePath): Path to resolve.

    Returns:
        str: Absolute path.
    """
    file_path = stringify_path(file_path)
    if os.path.isabs(file_path):
        return file_path
    return os.path.normpath(os.path.join(resolve_path(base_dir), file_path))


def default_cache_dir() -> str:
    """Default location of the model-call cache.

    Follows the XDG base directory convention, falling back to '~/.cache'.

    Returns:
        str: Path of the cache directory (not created).
    """
    base = os.environ.get("XDG_CACHE_HOME")
    if not base or not os.path.isabs(base):
        base = os.path.join(os.path.expanduser("~"), ".cache")
    return os.path.join(base, "promptforge")


def iteration_dir(run_dir: FilePath, t: int) -> str:
    """Directory holding the artifacts of iteration `t`."""
    return os.path.join(resolve_path(run_dir), f"iteration_{t}")


def unique_run_dir(output_dir: FilePath, run_name: str) -> str:
    """Pick a run directory that does not exist yet.

    Earlier runs are never overwritten: a numeric suffix is appended instead.

    Args:
        output_dir (FilePath): Parent directory of all runs.
        run_name (str): Preferred directory name.

    Returns:
        str: Absolute path of a directory that does not exist yet.
    """
    base = os.path.join(resolve_path(output_dir), run_name)
    candidate = base
    suffix = 1
    while os.path.exists(candidate):
        candidate = f"{base}-{suffix}"
        suffix += 1
    if candidate != base:
        logger.info(f"Run directory {base} exists, writing to {candidate}")
    return candidate
