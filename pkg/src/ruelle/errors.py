"""Exception hierarchy.

Every error carries a module-qualified ``code`` so the CLI can report
failures as ``<module>.<Name>``.
"""


class RuelleError(Exception):
    module = "ruelle"

    @property
    def code(self) -> str:
        return f"{self.module}.{type(self).__name__}"


class NotHyperbolic(RuelleError, ValueError):
    module = "torus_maps"


class ConeCertificateMissing(RuelleError):
    module = "torus_maps"


class BudgetExceeded(RuelleError, ValueError):
    module = "periodic_orbits"


class NewtonDivergence(RuelleError):
    module = "periodic_orbits"

    def __init__(self, message: str, m=None):
        super().__init__(message)
        self.m = m


class LocalDiffeoViolation(RuelleError):
    module = "periodic_orbits"


class DegenerateSeries(RuelleError):
    module = "determinant"


class QuadratureOverflow(RuelleError):
    module = "galerkin"


class EigenSolverFailure(RuelleError):
    module = "galerkin"


class GridBelowValidityFloor(RuelleError, ValueError):
    module = "spectral_analysis"


class ParseError(RuelleError, ValueError):
    module = "cli"

    def __init__(self, message: str, key: str | None = None, location: str | None = None):
        where = f" [{key}" + (f" @ {location}" if location else "") + "]" if key else ""
        super().__init__(message + where)
        self.key = key
        self.location = location


class LefschetzMismatch(RuelleError):
    module = "periodic_orbits"
