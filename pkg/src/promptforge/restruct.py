"""Serialization of corpora, artifacts and tables.

This module provides JSON, JSONL and CSV encoding plus stable hashing for
everything the package persists: corpora, run artifacts, cache entries and
configuration files.

JSON

| Python                                 | JSON   |
| :------------------------------------- | :----- |
| dict                                   | object |
| list, tuple                            | array  |
| str                                    | string |
| int, float, int- & float-derived enums | number |
| True                                   | true   |
| False                                  | false  |
| None                                   | null   |

Artifacts are written in a canonical form (sorted keys, two-space indent,
trailing newline) so that re-running a deterministic computation reproduces
files byte for byte.
"""

import collections
import csv
import logging
import os
from collections.abc import (
    Generator,
    Iterable,
    Sequence,
)
from hashlib import sha256

import rapidjson

from promptforge.errors import (
    HashEncodeError,
    JSONDecodeError,
    JSONEncodeError,
)
from promptforge.typing import FilePath, JSONEncodable

from promptforge.path import resolve_path

__all__ = [
    "csv_dump",
    "gen_hash",
    "json_dump",
    "json_dumps",
    "json_load",
    "json_loads",
    "jsonl_dump",
    "jsonl_dumps",
    "jsonl_loader",
]

logger = logging.getLogger(__name__)

_LENIENT_PARSE_MODE = rapidjson.PM_COMMENTS | rapidjson.PM_TRAILING_COMMAS


def _writable_path(file_path: FilePath) -> str:
    """Resolve a path for writing, creating missing parent directories."""
    path = resolve_path(file_path)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    return path


def json_dumps(obj: JSONEncodable, *, pretty: bool = False) -> str:
    """Encode an object as JSON.

    Keys are always sorted so the output is canonical.

    Args:
        obj (JSONEncodable): Object to encode.
        pretty (bool, optional): Indent with two spaces. Defaults to False.

    Returns:
        str: Object encoded as JSON.

    Raises:
        JSONEncodeError: If the object could not be encoded.
    """
    layout = (
        {"write_mode": rapidjson.WM_PRETTY, "indent": 2} if pretty else {"write_mode": rapidjson.WM_COMPACT}
    )
    try:
        return rapidjson.dumps(
            obj,
            number_mode=rapidjson.NM_NATIVE,
            sort_keys=True,
            ensure_ascii=False,
            **layout,
        )
    except (TypeError, ValueError, OverflowError) as err:
        raise JSONEncodeError(str(err)) from err


def jsonl_dumps(objs: Iterable[JSONEncodable]) -> str:
    """Encode objects as JSONL (one compact object per line, trailing newline).

    Args:
        objs (Iterable[JSONEncodable]): Objects to encode.

    Returns:
        str: Objects encoded as JSONL, empty string for no objects.

    Raises:
        JSONEncodeError: If an object could not be encoded.
    """
    return "".join(json_dumps(obj) + "\n" for obj in objs)


def json_dump(file_path: FilePath, obj: JSONEncodable) -> None:
    """Encode an object as pretty, canonical JSON and write it to a file.

    Args:
        file_path (FilePath): Path of the file to write.
        obj (JSONEncodable): Object to encode.

    Raises:
        JSONEncodeError: If the object could not be encoded.
    """
    encoded = json_dumps(obj, pretty=True) + "\n"
    with open(_writable_path(file_path), mode="w", encoding="utf-8", newline="\n") as wf:
        wf.write(encoded)


def jsonl_dump(file_path: FilePath, objs: Iterable[JSONEncodable]) -> None:
    """Encode objects as JSONL and write them to a file.

    Args:
        file_path (FilePath): Path of the file to write.
        objs (Iterable[JSONEncodable]): Objects to encode.

    Raises:
        JSONEncodeError: If an object could not be encoded.
    """
    encoded = jsonl_dumps(objs)
    with open(_writable_path(file_path), mode="w", encoding="utf-8", newline="\n") as wf:
        wf.write(encoded)


def csv_dump(file_path: FilePath, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a CSV table with a header row.

    Lines end with a bare newline on every platform.

    Args:
        file_path (FilePath): Path of the file to write.
        header (Sequence[str]): Column names.
        rows (Iterable[Sequence]): Rows, already formatted as strings or numbers.

    Raises:
        ValueError: If a row does not match the header width.
    """
    with open(_writable_path(file_path), mode="w", encoding="utf-8", newline="") as wf:
        writer = csv.writer(wf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"Row has {len(row)} cells, header has {len(header)}")
            writer.writerow(row)


def json_loads(encoded_obj: str, *, lenient: bool = False) -> JSONEncodable:
    """Decode a JSON-encoded object.

    Args:
        encoded_obj (str): Object to decode.
        lenient (bool, optional): Accept comments and trailing commas. Defaults to False.

    Returns:
        JSONEncodable: Decoded object.

    Raises:
        JSONDecodeError: If the object could not be decoded.
    """
    try:
        return rapidjson.loads(
            encoded_obj,
            number_mode=rapidjson.NM_NATIVE,
            parse_mode=_LENIENT_PARSE_MODE if lenient else rapidjson.PM_NONE,
        )
    except rapidjson.JSONDecodeError as err:
        raise JSONDecodeError(str(err)) from err


def json_load(file_path: FilePath, *, lenient: bool = False) -> JSONEncodable:
    """Decode a file containing a JSON-encoded object.

    Args:
        file_path (FilePath): Path of the file to open.
        lenient (bool, optional): Accept comments and trailing commas. Defaults to False.

    Returns:
        JSONEncodable: Decoded object.

    Raises:
        JSONDecodeError: If the file could not be decoded.
    """
    with open(resolve_path(file_path), mode="r", encoding="utf-8") as rf:
        return json_loads(rf.read(), lenient=lenient)


def jsonl_loader(
    file_path: FilePath,
    *,
    allow_empty_lines: bool = True,
) -> Generator[tuple[int, JSONEncodable], None, None]:
    """Decode a file containing JSON-encoded objects, one per line.

    Args:
        file_path (FilePath): Path of the file to open.
        allow_empty_lines (bool, optional): Whether to skip blank lines. Defaults to True.

    Yields:
        tuple[int, JSONEncodable]: 1-based line number and decoded object.

    Raises:
        JSONDecodeError: If a line is not valid UTF-8 or JSON, or if a blank line was found
            and `allow_empty_lines` is False.
    """
    with open(resolve_path(file_path), mode="rb") as rf:
        for line_number, raw_line in enumerate(rf, start=1):
            try:
                line = raw_line.decode("utf-8").rstrip("\r\n")
            except UnicodeDecodeError as err:
                located = JSONDecodeError(f"line {line_number}: invalid UTF-8: {err}")
                located.line_number = line_number
                raise located from err
            if not line.strip():
                if allow_empty_lines:
                    continue
                raise JSONDecodeError(f"Empty line found at line {line_number}")
            try:
                obj = json_loads(line)
            except JSONDecodeError as err:
                located = JSONDecodeError(f"line {line_number}: {err}")
                located.line_number = line_number
                raise located from err
            yield line_number, obj


def gen_hash(obj: JSONEncodable | bytes | tuple) -> str:
    """Create a stable SHA-256 hex digest of an object.

    Strings and bytes are hashed directly; containers and scalars are hashed
    through their canonical JSON encoding, so equal values hash equally
    regardless of dict ordering.

    Args:
        obj (JSONEncodable | bytes | tuple): Object to hash.

    Returns:
        str: Hex digest.

    Raises:
        HashEncodeError: If the object could not be encoded.
    """
    if isinstance(obj, bytes):
        obj_b = obj
    elif isinstance(obj, str):
        obj_b = obj.encode("utf-8")
    elif isinstance(obj, (tuple, collections.deque)):
        obj_b = json_dumps(list(obj)).encode("utf-8")
    elif obj is None or isinstance(obj, (list, dict, int, float, bool)):
        try:
            obj_b = json_dumps(obj).encode("utf-8")
        except JSONEncodeError as err:
            raise HashEncodeError(str(err)) from err
    else:
        raise HashEncodeError(f"Cannot hash object of type {type(obj).__name__}")
    return sha256(obj_b).hexdigest()
