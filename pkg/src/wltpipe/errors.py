"""Exception types shared across the pipeline."""


class WltpipeError(Exception):
    """Base class for all pipeline errors."""


class CorpusError(WltpipeError):
    """Unreadable corpus file or too many malformed records."""


class CrawlError(WltpipeError):
    """Graph expansion cannot proceed (e.g. every seed unreachable)."""


class SplitError(WltpipeError):
    """Split preconditions violated (missing labels, too few users)."""


class TrainingError(WltpipeError):
    """Model training failed (single-class data, divergence)."""


class ScorerError(WltpipeError):
    """External scorer transport or protocol failure."""


class HitlError(WltpipeError):
    """Human-in-the-loop state machine rejected a transition."""
