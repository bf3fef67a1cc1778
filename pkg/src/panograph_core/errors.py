"""
PanoGraph Errors

Every failure raised by the toolkit derives from PanoGraphError so callers
(the CLI in particular) can map them onto exit codes in one place.
"""


class PanoGraphError(Exception):
    """Base class for all toolkit errors."""


class ParseError(PanoGraphError):
    """A file could not be decoded or does not match its schema."""


class ValidationError(PanoGraphError):
    """A domain invariant does not hold. The message names the entity."""


class GenerationError(PanoGraphError):
    """Synthetic scene generation could not satisfy its constraints."""


class GeometryError(PanoGraphError):
    """Ray casting found no intersection; signals a broken scene invariant."""


class DisconnectedError(PanoGraphError):
    """Some node of a pose graph cannot be reached from the origin."""


class NumericalError(PanoGraphError):
    """A solver produced a non-finite cost or Jacobian."""


class ShapeError(PanoGraphError):
    """Loss inputs disagree on node sets or array shapes."""


class DegenerateError(PanoGraphError):
    """The requested quantity is undefined for the given input."""


class DimensionError(PanoGraphError):
    """Message-passing states or update outputs have inconsistent sizes."""
