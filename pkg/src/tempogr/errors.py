"""Exception types shared across the pipeline.

Each carries the CLI exit code it maps to.
"""


class EngineError(Exception):
    exit_code = 1


class ConfigError(EngineError, ValueError):
    exit_code = 1


class DataError(EngineError, ValueError):
    exit_code = 2


class DependencyError(EngineError):
    """An upstream artifact is missing or was produced under another fingerprint."""

    exit_code = 3


class NoOutgoingTransitions(EngineError, KeyError):
    exit_code = 2

    def __str__(self):
        return f"no outgoing transitions from item {self.args[0]!r}"
