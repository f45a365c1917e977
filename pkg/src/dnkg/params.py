"""Model parameters for the damped focusing Klein-Gordon equation."""

from dataclasses import dataclass

from .errors import InvalidParams


@dataclass(frozen=True)
class ModelParams:
    """Dimension, nonlinearity exponent and damping coefficient.

    The exponent must be energy sub-critical: p > 2 for d = 1, 2 and
    2 < p < (d + 2)/(d - 2) for d = 3, 4, 5.
    """

    d: int
    p: float
    alpha: float = 1.0

    def __post_init__(self):
        if not isinstance(self.d, int) or not 1 <= self.d <= 5:
            raise InvalidParams(f"dimension d must be an integer in [1, 5], got {self.d}")
        if self.p <= 2:
            raise InvalidParams(f"exponent p must exceed 2, got {self.p}")
        if self.d >= 3 and self.p >= (self.d + 2) / (self.d - 2):
            raise InvalidParams(
                f"p={self.p} is not sub-critical for d={self.d} "
                f"(needs p < {(self.d + 2) / (self.d - 2)})"
            )
        if self.alpha <= 0:
            raise InvalidParams(f"damping alpha must be positive, got {self.alpha}")

    def as_dict(self):
        return {"d": self.d, "p": self.p, "alpha": self.alpha}
