"""Exception hierarchy shared by all pipeline stages."""


class PhyloLexError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(PhyloLexError):
    """Missing column, missing prerequisite, bad option value."""


class EmptyInputError(PhyloLexError):
    """An operation was left with nothing to work on."""


class InputError(PhyloLexError):
    """Input data violates a precondition (e.g. missing cognate labels)."""


class ParseError(PhyloLexError):
    """Malformed Newick, PHYLIP or wordlist text."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class DomainError(PhyloLexError):
    """Numerically or mathematically undefined request."""

    exit_code = 2


class TrainingError(PhyloLexError):
    """Training could not proceed or diverged."""

    exit_code = 2
