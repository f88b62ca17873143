"""Exception hierarchy.

Every error carries the CLI exit status it maps to, so the front end never
has to guess.
"""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_OBSTRUCTION = 3
EXIT_NUMERIC = 4
EXIT_VERIFY = 5


class PathSpaceError(Exception):
    exit_code = EXIT_NUMERIC


# -- expressions -------------------------------------------------------------

class ParseError(PathSpaceError):
    exit_code = EXIT_USAGE

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class UnknownIdentifier(ParseError):
    pass


class ArityError(ParseError):
    pass


class DomainError(PathSpaceError):
    """Evaluation left the real domain of an expression (0 division, log <= 0...)."""


# -- manifold kernel ---------------------------------------------------------

class ConfigError(PathSpaceError):
    exit_code = EXIT_USAGE


class OutOfDomain(PathSpaceError):
    pass


class NotInOverlap(PathSpaceError):
    pass


class LeftAtlas(PathSpaceError):
    def __init__(self, message, s_reached=None):
        self.s_reached = s_reached
        super().__init__(message)


class StepUnderflow(PathSpaceError):
    def __init__(self, message, s_reached=None):
        self.s_reached = s_reached
        super().__init__(message)


class RadiusExceeded(PathSpaceError):
    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class AntipodalDegeneracy(PathSpaceError):
    exit_code = EXIT_OBSTRUCTION

    def __init__(self, message, index=None, angle=None):
        self.index = index
        self.angle = angle
        super().__init__(message)


class NoConvergence(PathSpaceError):
    def __init__(self, message, index=None, residual=None):
        self.index = index
        self.residual = residual
        super().__init__(message)


class DegeneratePlane(PathSpaceError):
    pass


# -- path space --------------------------------------------------------------

class TooFewSamples(PathSpaceError):
    exit_code = EXIT_USAGE


class CoverInvalid(PathSpaceError):
    pass


class ChartMismatch(PathSpaceError):
    pass


class GridTooCoarse(PathSpaceError):
    exit_code = EXIT_USAGE


class WrongManifold(PathSpaceError):
    exit_code = EXIT_USAGE


class GeodesicFailure(PathSpaceError):
    """Some transverse geodesics of a homotopy could not be integrated to the end."""

    def __init__(self, message, homotopy=None, failed=()):
        self.homotopy = homotopy
        self.failed = tuple(failed)
        super().__init__(message)


# -- files -------------------------------------------------------------------

class InputError(PathSpaceError):
    """Unreadable or malformed input file."""

    exit_code = EXIT_USAGE
