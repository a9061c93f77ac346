"""Semantic exceptions raised by the public API."""


class PoloptError(Exception):
    """Base class for all library errors."""


class UnknownPassword(PoloptError, KeyError):
    """A password was queried that is not part of the password space."""


class NoAllowedPassword(PoloptError):
    """A preference list contains no password allowed by the policy."""


class ZeroMassPolicy(PoloptError):
    """A normalization-model policy allows only zero-probability passwords."""


class InvalidMode(PoloptError, ValueError):
    """An algorithm was invoked with a policy mode it does not support."""


class TooManyRules(PoloptError, ValueError):
    """An exhaustive enumeration was requested beyond its rule-count guard."""


class OracleExhausted(PoloptError):
    """A sample oracle hit its configured draw budget."""


class MissingDictionary(PoloptError, ValueError):
    """A dictionary-backed rule was requested without supplying a dictionary."""


class ParseError(PoloptError, ValueError):
    """A data file could not be parsed.

    Carries the 1-based line number of the offending record when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyDataset(PoloptError, ValueError):
    """A dataset file contained no records."""


class EmptyDistribution(PoloptError, ValueError):
    """An operation requires a distribution with at least one entry."""
