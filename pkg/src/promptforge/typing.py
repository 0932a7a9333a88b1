"""Custom type aliases.

This module contains custom type aliases used throughout the package.
"""

from os import PathLike
from typing import Literal, TypeAlias

__all__ = [
    "BackendTag",
    "ConvergenceDecision",
    "DegradationBaseline",
    "DirectiveKind",
    "Direction",
    "ErrorKind",
    "FilePath",
    "JSONEncodable",
    "Label",
    "Mode",
    "ParseStatus",
    "PromptOrigin",
    "SelectionStrategy",
    "SplitName",
    "TargetMetric",
    "TerminationReason",
]

# Path-like object (likely str or pathlib.Path)
FilePath: TypeAlias = str | PathLike

# Serialization
JSONEncodable: TypeAlias = str | int | float | bool | list | dict | None

# Corpora
Label: TypeAlias = Literal[0, 1]
SplitName: TypeAlias = Literal["dev", "val"]

# Gateway
BackendTag: TypeAlias = Literal["live", "simulated", "cache"]
Mode: TypeAlias = Literal["live", "sim"]

# Agents
PromptOrigin: TypeAlias = Literal[
    "initial",
    "sensitivity_synthesis",
    "specificity_synthesis",
    "revert_synthesis",
]
ParseStatus: TypeAlias = Literal["clean", "normalized", "retried", "defaulted"]
ErrorKind: TypeAlias = Literal["false_positive", "false_negative"]
Direction: TypeAlias = Literal["sensitivity", "specificity"]
DirectiveKind: TypeAlias = Literal["switch_target_metric", "rewrite_strategy"]

# Pipeline
ConvergenceDecision: TypeAlias = Literal["converged", "improve_sensitivity", "improve_specificity"]
TargetMetric: TypeAlias = Literal["sensitivity", "specificity", "none"]
SelectionStrategy: TypeAlias = Literal["final_iteration", "best_dev_f1"]
DegradationBaseline: TypeAlias = Literal["previous", "best_so_far"]
TerminationReason: TypeAlias = Literal[
    "converged",
    "t_max_reached",
    "nothing_to_synthesize",
]
