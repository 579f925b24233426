class UctProverError(Exception):
    """Base class for every error raised by the prover."""


class ConfigurationError(UctProverError):
    pass


class ProblemSyntaxError(UctProverError):
    """
    Raised when a clausal problem file cannot be parsed.

    :param message: Description of the problem.
    :param line: 1-based line of the offending token.
    :param column: 1-based column of the offending token.
    """

    def __init__(self, message, line, column, source=None):
        self.line = line
        self.column = column
        self.source = source
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{column}: {message}")


class ArityClashError(UctProverError):
    pass


class SymbolCollisionError(UctProverError):
    pass


class InapplicableActionError(UctProverError):
    pass


class StaleMarkError(UctProverError):
    pass


class ExampleFormatError(UctProverError):
    def __init__(self, message, line):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ModelFormatError(UctProverError):
    pass


class TrainingError(UctProverError):
    pass


class UnsoundProofError(UctProverError):
    pass


class ProofFormatError(UctProverError):
    def __init__(self, message, line):
        self.line = line
        super().__init__(f"line {line}: {message}")
