"""Exception hierarchy shared across specforge modules."""


class SpecforgeError(Exception):
    """Base class for every error raised by specforge."""


class LexError(SpecforgeError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


class UnterminatedComment(LexError):
    pass


class UnterminatedLiteral(LexError):
    pass


class UnsupportedSyntax(LexError):
    """Trigraphs and backslash-newline splicing are rejected."""
