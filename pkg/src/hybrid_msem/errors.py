"""Exception hierarchy shared by the library and the command line front end."""


class HybridMSEMError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"
    exit_code = 1


class InvalidDegreeError(HybridMSEMError, ValueError):
    code = "invalid-degree"
    exit_code = 2


class ConfigError(HybridMSEMError, ValueError):
    code = "config"
    exit_code = 2


class MeshDegeneracyError(HybridMSEMError):
    """A element map has a non-positive Jacobian determinant."""

    code = "mesh-degeneracy"
    exit_code = 3

    def __init__(self, message: str, element: int | None = None):
        super().__init__(message)
        self.element = element


class AssemblyError(HybridMSEMError):
    code = "assembly"
    exit_code = 4


class IllPosedSystemError(HybridMSEMError):
    """A factorization failed or the solve residual is out of tolerance."""

    code = "solver"
    exit_code = 4
