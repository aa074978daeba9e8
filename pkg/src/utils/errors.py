"""errors.py
Exception hierarchy. Every error carries the process exit code used by main.py.
"""


class PNKitError(Exception):
    exit_code = 1

    def to_json(self):
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(PNKitError, ValueError):
    exit_code = 2


class KindMismatch(PNKitError, TypeError):
    exit_code = 2


# numerical guards
class NumericalGuard(PNKitError, ArithmeticError):
    exit_code = 3


class NumericalDegeneracy(NumericalGuard):
    pass


class RankDeficiency(NumericalGuard):
    pass


class NotTangent(NumericalGuard):
    pass


class DegenerateForm(NumericalGuard):
    pass


class FrameSolveFailure(NumericalGuard):
    pass


class SingularNt(NumericalGuard):
    pass


class AsymmetryResidual(NumericalGuard):
    pass


class OddMultiplicity(NumericalGuard):
    pass


class ComplexSpectrum(NumericalGuard):
    pass


class CountMismatch(NumericalGuard):
    pass


class CalibrationFailure(NumericalGuard):
    """Raised when no constant on the search grid matches the spectra.
    `best` holds the closest (c, kappa) found so callers can carry on.
    """
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


# groupoid
class NotComposable(PNKitError, ValueError):
    exit_code = 4


class TargetOutsidePolytope(PNKitError, ValueError):
    exit_code = 5


class SingularLog(PNKitError, ArithmeticError):
    exit_code = 6
