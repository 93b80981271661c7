"""Exception hierarchy shared across the toolkit."""


class CsgenError(Exception):
    """Base class for toolkit errors."""


class DataError(CsgenError):
    """Bad or missing input data (files, corpora, vocabulary mismatches)."""


class NumericError(CsgenError):
    """A non-finite value appeared during a numeric operation."""

    def __init__(self, op: str, detail: str = ""):
        self.op = op
        msg = f"non-finite value produced by op '{op}'"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
