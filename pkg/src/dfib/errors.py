"""Exception types raised by the solver."""


class DFIBError(Exception):
    """Base class for errors raised by this package."""


class NonZeroMeanRhs(DFIBError, ValueError):
    """A periodic Poisson right-hand side has a mean beyond roundoff."""


class NonDivFreeInput(DFIBError, ValueError):
    """A velocity field expected to be discretely divergence-free is not."""


class ZeroDt(DFIBError, ValueError):
    pass


class MissingHistory(DFIBError, RuntimeError):
    """The AB2 step was called before an advection history exists."""


class DegenerateSegment(DFIBError, ValueError):
    pass


class DegenerateFace(DFIBError, ValueError):
    pass


class SplineSingular(DFIBError, ValueError):
    pass


class ConfigError(DFIBError, ValueError):
    pass
