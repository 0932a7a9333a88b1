"""Custom errors.

This module contains custom exceptions that are used throughout the package.
"""

from rapidjson import JSONDecodeError as RapidJSONDecodeError

__all__ = [
    "ArtifactError",
    "ConfigError",
    "CorpusLoadError",
    "GatewayError",
    "HashEncodeError",
    "JSONDecodeError",
    "JSONEncodeError",
    "NothingToSynthesizeError",
    "ProtocolError",
    "ResponseParseError",
    "TransportError",
    "UnknownRoleError",
]


class JSONEncodeError(TypeError):
    pass


class JSONDecodeError(RapidJSONDecodeError):
    pass


class HashEncodeError(TypeError, ValueError, AttributeError):
    pass


class CorpusLoadError(ValueError):
    """A corpus file could not be loaded.

    Args:
        message (str): Description of the problem.
        line_number (int | None, optional): 1-based line of the offending record. Defaults to None.
    """

    def __init__(self, message: str, line_number: int | None = None) -> None:
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ConfigError(ValueError):
    """A configuration value is missing or invalid.

    Args:
        key (str): Dotted name of the offending key (e.g. 'task.dev_path').
        message (str): Description of the problem.
    """

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError, ConnectionError):
    pass


class ProtocolError(GatewayError):
    def __init__(self, status: int, message: str = "") -> None:
        super().__init__(f"HTTP {status}" + (f": {message}" if message else ""))
        self.status = status


class ResponseParseError(GatewayError, ValueError):
    pass


class UnknownRoleError(ValueError):
    pass


class NothingToSynthesizeError(ValueError):
    pass


class ArtifactError(ValueError):
    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path
