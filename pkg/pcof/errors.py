"""Exceptions raised across pcof."""


class PcofError(Exception):
    """Base class of every pcof exception."""


class NotPrime(PcofError, ValueError):
    pass


class NotGaussianPrime(PcofError, ValueError):
    """p is prime but ℤ[j]/pℤ[j] is not a field (p = 2 or p ≡ 1 mod 4)."""


class DivisionByZero(PcofError, ZeroDivisionError):
    pass


class SingularMatrix(PcofError, ValueError):
    """A matrix over GF(q) has no inverse."""


class RankDeficient(PcofError, ValueError):
    """Lattice basis columns are linearly dependent within tolerance."""


class NonSquare(PcofError, ValueError):
    pass


class DimensionMismatch(PcofError, ValueError):
    pass


class SingularChannel(PcofError, ValueError):
    """A channel or Gram matrix exceeds the condition-number guard."""


class AlignmentDegenerate(PcofError, ValueError):
    """The alignment chain produced a rank-deficient precoder."""


class ZeroTrace(PcofError, ValueError):
    pass


class InvalidAntennaCount(PcofError, ValueError):
    pass


class NotInFineLattice(PcofError, ValueError):
    pass


class NotInRowSpace(PcofError, ValueError):
    pass


class ConfigError(PcofError, ValueError):
    pass


class TrialFailed(PcofError, RuntimeError):
    """A Monte Carlo trial exhausted its resampling budget.

    :param int trial_index: index of the failing trial
    :param Exception cause: last degeneracy error seen
    """

    def __init__(self, trial_index, cause=None):
        self.trial_index = trial_index
        self.cause = cause
        super().__init__("trial %d failed after resampling: %r" % (trial_index, cause))


# Errors that mean "this channel draw is unusable, draw another one".
DegenerateDraw = (SingularChannel, AlignmentDegenerate, RankDeficient, SingularMatrix, ZeroTrace)
