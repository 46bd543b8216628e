"""Base error type for fuzzyjudge."""


class FuzzyJudgeError(Exception):
    """Base class for every domain error raised by fuzzyjudge.

    The CLI reports these as domain errors (exit code 1); anything else is
    treated as an unexpected failure.
    """
