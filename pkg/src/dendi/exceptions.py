"""Exception types raised across the package."""


class DendiError(Exception):
    """Base class for all errors raised by this package."""


class RankDeficient(DendiError):
    """The design matrix does not have full column rank."""


class NonFiniteWeights(DendiError):
    """IRLS produced non-finite working weights or coefficients."""


class DegenerateColumn(DendiError):
    """A constructed design column is constant on the data it was built from."""


class EmptyGrid(DendiError):
    """No candidate threshold satisfies the minimum node size."""


class AllCandidatesDegenerate(DendiError):
    """Every candidate of a split search was inadmissible."""


class TooManyFailedFolds(DendiError):
    """More than the tolerated share of LOOCV folds failed to fit."""


class MissingColumn(DendiError, KeyError):
    pass


class NonNumericValue(DendiError, ValueError):
    pass


class EmptyAfterFiltering(DendiError, ValueError):
    pass
