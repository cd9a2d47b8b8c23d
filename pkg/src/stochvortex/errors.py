"""Exception hierarchy shared by every module."""


class VortexError(Exception):
    """Base class for all errors raised by stochvortex."""


class ZeroCirculationError(VortexError, ValueError):
    """Total strength vanishes, so the center of vorticity is undefined."""


class CoincidentVorticesError(VortexError, ValueError):
    """Two vortices share a position where the singular kernel is required."""


class DegenerateTriangleError(VortexError, ValueError):
    """A side length needed for an angle is below the separation tolerance."""


class NonPositiveSeparationError(VortexError, ValueError):
    pass


class DimensionError(VortexError, ValueError):
    pass


class BlowUpError(VortexError, FloatingPointError):
    """A stage value became non-finite during time stepping."""

    def __init__(self, step, message=None):
        self.step = int(step)
        super().__init__(message or f"non-finite state at step {self.step}")


class IncompatiblePathError(VortexError, ValueError):
    """The driving path cannot drive the requested method."""


class EmbeddingError(VortexError, ValueError):
    """Circulant embedding is not nonnegative definite."""


class IndefiniteCovarianceError(VortexError, ValueError):
    """Symmetric part of a Green-Kubo matrix is not positive definite."""


class UnstableDriftError(VortexError, ValueError):
    """OU drift matrix has an eigenvalue with nonpositive real part."""


class ConfigError(VortexError, ValueError):
    pass
