"""Exception types raised across the package."""

from ._jsonio import InputError

__all__ = ["InputError", "ClientError", "ScoringError", "NormError", "ExampleNormsError"]


class ClientError(RuntimeError):
    """An external client (ASR, aligner, negation filter) failed."""

    def __init__(self, message: str, diagnostics: str = "", chunk: int | None = None):
        self.diagnostics = diagnostics
        self.chunk = chunk
        super().__init__(message + (f"\n{diagnostics}" if diagnostics else ""))


class ScoringError(ValueError):
    """A record cannot be scored by the requested scorer."""


class NormError(LookupError):
    """No norm table cell for a (subtest, age band, IQ band) triple."""


class ExampleNormsError(RuntimeError):
    """Refusal to score against the bundled synthetic example norms."""
