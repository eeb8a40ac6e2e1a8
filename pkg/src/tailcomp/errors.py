"""Exception types raised across the package."""


class TailcompError(Exception):
    """Base class for all package errors."""


class ZeroVectorError(TailcompError, ValueError):
    """A vector that must be normalized has (near) zero norm."""


class ConfigInvalid(TailcompError, ValueError):
    pass


class EmptyDataset(TailcompError, ValueError):
    pass


class DivergedLoss(TailcompError, RuntimeError):
    pass


class DimensionMismatch(TailcompError, ValueError):
    pass


class AbsentClass(TailcompError, LookupError):
    """A class without a representation was asked to take part in scoring."""


class AbsentPrototype(AbsentClass):
    pass


class EmptyEligibleSet(TailcompError, ValueError):
    pass


class EmptyEnsemble(TailcompError, ValueError):
    pass


class FormatError(TailcompError, ValueError):
    """Base class for malformed EMBD/HEAD files."""


class BadMagic(FormatError):
    pass


class BadVersion(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class LabelOutOfRange(FormatError):
    pass
