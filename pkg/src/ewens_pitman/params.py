"""Model parameters of the Ewens-Pitman partition model."""

from dataclasses import dataclass


class ParameterError(ValueError):
    """Raised when (alpha, theta) lie outside alpha in [0,1), theta > -alpha."""


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    theta: float

    def __post_init__(self):
        alpha = float(self.alpha)
        theta = float(self.theta)
        if not (0.0 <= alpha < 1.0) or not theta > -alpha:
            raise ParameterError(
                f"invalid parameters alpha={alpha!r}, theta={theta!r}: "
                "require α∈[0,1), θ>−α"
            )
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "theta", theta)

    def require_positive_alpha(self):
        if self.alpha <= 0.0:
            raise ParameterError(f"operation requires alpha > 0, got alpha={self.alpha!r}")
        return self

    @property
    def theta_over_alpha(self):
        return self.theta / self.alpha


def as_params(params=None, alpha=None, theta=None):
    if params is not None:
        return params
    return ModelParams(alpha, theta)
