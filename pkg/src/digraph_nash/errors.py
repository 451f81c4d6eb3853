"""Exception hierarchy shared by all modules."""


class NashError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(NashError, ValueError):
    """Malformed arguments: wrong shapes, out-of-range indices, bad values."""


class DegenerateGameError(NashError):
    """The game constants do not define a usable step-size bound."""


class UnsupportedDiagnosticError(NashError):
    """A diagnostic needs information the game does not provide."""


class TopologyError(NashError):
    """The communication graph violates a connectivity requirement."""


class DomainError(NashError, ValueError):
    """A formula was evaluated outside the region where it is defined."""


class OracleUnavailableError(NashError):
    """No equilibrium oracle exists for the requested game."""


class GenerationError(NashError):
    """Random instance generation ran out of retries."""


class ConfigError(NashError):
    """Invalid experiment configuration.

    ``location`` is a dotted path into the config document (may be empty).
    """

    def __init__(self, message, location=""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class GradientEvaluationError(NashError):
    """A partial-gradient evaluation failed for a specific agent."""

    def __init__(self, agent, cause):
        self.agent = agent
        self.cause = cause
        super().__init__(f"gradient evaluation failed for agent {agent}: {cause}")


class DivergenceError(NashError):
    """Non-finite values appeared during the iteration."""

    def __init__(self, iteration, last_metrics=None):
        self.iteration = iteration
        self.last_metrics = last_metrics
        msg = f"non-finite iterate at iteration {iteration}"
        if last_metrics:
            msg += f" (last recorded metrics: {last_metrics})"
        super().__init__(msg)
