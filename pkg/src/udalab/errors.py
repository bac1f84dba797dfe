"""Exception types shared across the package."""


class ShapeMismatch(ValueError):
    """Operands have incompatible shapes."""


class DomainError(ValueError):
    """Input is outside an operation's mathematical domain (e.g. log of <= 0)."""


class NonFiniteProbe(ArithmeticError):
    """A probed function returned NaN or Inf during a gradient check."""


class StageMismatch(ValueError):
    """A style vector was fed to the discriminator of the wrong encoder stage."""


class CentroidMismatch(ValueError):
    """Centroid class count disagrees with the prediction map."""


class LabelOutOfRange(ValueError):
    """A label value falls outside [0, C)."""


class InvalidDims(ValueError):
    """Requested dimensions are outside the supported range."""


class StepOutOfRange(ValueError):
    """Schedule queried beyond its defined range."""


class ConfigError(ValueError):
    """Bad or inconsistent configuration."""


class EmptySelection(UserWarning):
    """No pixels were selected corpus-wide in a pseudo-label round."""
