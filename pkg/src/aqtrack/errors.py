"""Exception types shared across the package.

Two broad classes matter for the CLI exit-code contract: configuration or
domain problems (exit code 2) and runtime verification or convergence
failures (exit code 1). Everything derives from AqtrackError so callers can
catch the whole family at once.
"""


class AqtrackError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AqtrackError):
    """Invalid configuration, parameter domain violation, or bad input data."""


class ShapeError(ConfigError):
    """Array dimensions inconsistent with the declared problem sizes."""


class TopologyError(ConfigError):
    """A weight matrix failed validation."""


class NotDoublyStochasticError(TopologyError):
    """Row or column sums deviate from 1 beyond tolerance."""


class NotConnectedError(TopologyError):
    """The digraph of positive off-diagonal weights is not strongly connected."""


class DegenerateSpectrumError(TopologyError):
    """Contraction factor is not strictly below 1."""


class InvalidValueError(AqtrackError, ValueError):
    """Non-finite value where a finite one is required (e.g. quantizer input)."""


class ProtocolError(AqtrackError):
    """Encoder/decoder desynchronization: a received code is out of range."""


class SaturationError(AqtrackError):
    """Strict mode: the quantizer saturated."""

    def __init__(self, round_index: int, count: int):
        self.round_index = round_index
        self.count = count
        super().__init__(f"quantizer saturated {count} coordinate(s) at round {round_index}")


class DivergenceError(AqtrackError):
    """A state component became non-finite; carries the partial trajectory."""

    def __init__(self, round_index: int, trajectory=None):
        self.round_index = round_index
        self.trajectory = trajectory
        super().__init__(f"non-finite state detected at round {round_index}")


class UntunableError(AqtrackError):
    """No convergence certificate exists for the requested parameters."""

    def __init__(self, rho: float, message: str = ""):
        self.rho = rho
        super().__init__(
            message
            or f"spectral radius {rho:.6g} >= 1 at the chosen step size; lower alpha"
        )


class InfeasibleEpsilonError(AqtrackError):
    """gamma - rho(H) - epsilon <= 0: the geometric-series constant is undefined."""


class NoConvergenceError(AqtrackError):
    """Reference gradient descent exhausted max_iter; carries the last iterate."""

    def __init__(self, last_iterate, grad_norm: float):
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm
        super().__init__(f"reference solver stalled with gradient norm {grad_norm:.3e}")
