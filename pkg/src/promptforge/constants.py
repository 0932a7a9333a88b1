"""Constant values.

This module contains constants that are used throughout the package.
"""

from string import ascii_letters, digits

__all__ = [
    "API_KEY_ENV_VAR",
    "DEFAULT_MASKING_TOLERANCE",
    "DEFAULT_MAX_TOKENS",
    "DEFAULT_PARALLELISM",
    "DEFAULT_RETRY_BUDGET",
    "DEFAULT_SAFECHARS_ALLOWED_CHARS",
    "DEFAULT_T_MAX",
    "DEFAULT_TEMPERATURE",
    "DEFAULT_THETA",
    "DEFAULT_TIMEOUT",
    "DIRECTIONS",
    "DEGRADATION_BASELINES",
    "DIRECTIVE_KINDS",
    "EXIT_CONFIG_ERROR",
    "EXIT_OK",
    "EXIT_TRANSPORT_ERROR",
    "NON_ACTIONABLE_MARKER",
    "SELECTION_STRATEGIES",
    "SPLITS",
]

DEFAULT_SAFECHARS_ALLOWED_CHARS: set[str] = {"-", "_", ".", *ascii_letters, *digits}

SPLITS: tuple[str, ...] = ("dev", "val")
DIRECTIONS: tuple[str, ...] = ("sensitivity", "specificity")
DIRECTIVE_KINDS: tuple[str, ...] = ("switch_target_metric", "rewrite_strategy")
SELECTION_STRATEGIES: tuple[str, ...] = ("final_iteration", "best_dev_f1")
DEGRADATION_BASELINES: tuple[str, ...] = ("previous", "best_so_far")

# Model invocation
DEFAULT_TEMPERATURE: float = 0.0
DEFAULT_MAX_TOKENS: int = 2048
DEFAULT_TIMEOUT: float = 120.0
DEFAULT_RETRY_BUDGET: int = 3
DEFAULT_PARALLELISM: int = 4
API_KEY_ENV_VAR: str = "PROMPTFORGE_API_KEY"

# Optimization
DEFAULT_THETA: float = 0.90
DEFAULT_T_MAX: int = 7
DEFAULT_MASKING_TOLERANCE: float = 0.02

# Improver output line meaning "this error carries no usable lesson"
NON_ACTIONABLE_MARKER: str = "NO_ACTIONABLE_CRITIQUE"

# Process exit statuses
EXIT_OK: int = 0
EXIT_CONFIG_ERROR: int = 2
EXIT_TRANSPORT_ERROR: int = 3
