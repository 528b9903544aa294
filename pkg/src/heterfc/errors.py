"""Exception hierarchy shared across the package."""


class HeterFCError(Exception):
    """Base class for all errors raised by this package."""


# --- corpus ---------------------------------------------------------------

class CorpusError(HeterFCError):
    pass


class MalformedLine(CorpusError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        super().__init__(f"malformed JSONL at line {line_no}" + (f": {reason}" if reason else ""))


class UnknownLabel(CorpusError):
    pass


class DuplicateEvidenceId(CorpusError):
    pass


class MissingCellField(CorpusError):
    pass


class CapExceeded(CorpusError):
    pass


class EmptyClaim(CorpusError):
    pass


# --- linearizer / graph ---------------------------------------------------

class MissingField(HeterFCError):
    pass


class EmptyGraph(HeterFCError):
    pass


# --- tensor ---------------------------------------------------------------

class TensorError(HeterFCError):
    pass


class ShapeMismatch(TensorError):
    pass


class EmptySegment(TensorError):
    pass


class NotScalar(TensorError):
    pass


class DetachedLoss(TensorError):
    pass


# --- embed ----------------------------------------------------------------

class MissingKey(HeterFCError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"embedding file has no key {key!r}")


class BadEmbeddingFile(HeterFCError):
    pass


# --- train ----------------------------------------------------------------

class CorruptCheckpoint(HeterFCError):
    pass


class ConfigMismatch(HeterFCError):
    pass
