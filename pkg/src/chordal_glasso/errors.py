"""Exception types raised by the solver pipeline."""


class ChordalGlassoError(Exception):
    pass


class DimensionMismatch(ChordalGlassoError, ValueError):
    pass


class NotCompletable(ChordalGlassoError):
    """The partial matrix has no positive definite completion (a pivot collapsed)."""


class NotNoFill(ChordalGlassoError):
    """The pattern does not factor without fill in the supplied ordering."""


class NotChordal(ChordalGlassoError):
    def __init__(self, message, component=None, witness=None):
        super().__init__(message)
        self.component = component
        self.witness = witness


class NotACorrelation(ChordalGlassoError, ValueError):
    pass


class AmbiguousLevel(ChordalGlassoError, ValueError):
    """lambda coincides with one of the off-diagonal magnitudes."""


class NotConverged(ChordalGlassoError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class TooLarge(ChordalGlassoError, ValueError):
    pass


class NotPositiveDefinite(ChordalGlassoError, ValueError):
    pass
