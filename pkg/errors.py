"""
Exception hierarchy for ttconvex.
Library modules raise these; cli.py and main.py turn them into exit codes / HTTP errors.
"""


class TTConvexError(Exception):
    """Base class for every ttconvex failure"""


class ConfigError(TTConvexError):
    """Unreadable input, bad bounds, unknown fixture"""

    def __init__(self, message: str, line: int | None = None, section: str | None = None):
        self.line = line
        self.section = section
        where = []
        if section:
            where.append(f"section [{section}]")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class AlphabetError(TTConvexError):
    pass


class ResourceLimit(TTConvexError):
    def __init__(self, message: str, witness=None):
        self.witness = witness
        super().__init__(message)


class MissingInverse(TTConvexError):
    pass


class InverseMismatch(TTConvexError):
    pass


class PathError(TTConvexError):
    pass


class FiltrationError(TTConvexError):
    pass


class EmptyRay(TTConvexError):
    pass


class WrongStratumClass(TTConvexError):
    pass


class NotApplicable(TTConvexError):
    pass


class Unknown(TTConvexError):
    """A bounded search could not decide; `reason` says which bound was hit"""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class ThresholdError(TTConvexError):
    def __init__(self, message: str, witness=None):
        self.witness = witness
        super().__init__(message)


class NotNielsen(TTConvexError):
    pass


class IdentityViolation(TTConvexError):
    def __init__(self, message: str, witness=None):
        self.witness = witness
        super().__init__(message)


class HallwayError(TTConvexError):
    pass


class NotCuttable(TTConvexError):
    pass


class MissingInput(TTConvexError):
    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__("missing ledger inputs: " + ", ".join(self.missing))


class EmptyAfterExclusion(TTConvexError):
    pass
