from __future__ import annotations


class BitextForgeError(Exception):
    """Base class for every error raised by this package."""


class FormatError(BitextForgeError):
    """A malformed line in one of the TSV / dictionary inputs."""

    def __init__(self, path, lineno: int, message: str) -> None:
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{self.path}:{lineno}: {message}")


class ScoringError(BitextForgeError):
    """A divergence score could not be produced."""


class AlignmentError(BitextForgeError):
    """Invalid aligner input or inconsistent alignments."""


class RevisionError(BitextForgeError):
    """Candidates or model scores inconsistent with the bitext being revised."""


class ConfigError(BitextForgeError):
    """Invalid pipeline configuration."""
