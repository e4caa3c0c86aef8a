"""Exception types shared across the package."""


class DronesimError(Exception):
    """Base class for all package errors."""


class DimensionError(DronesimError, ValueError):
    """A vector does not have the length an agent expects."""

    def __init__(self, agent, expected, got):
        self.agent = agent
        self.expected = expected
        self.got = got
        super().__init__(f"agent {agent}: expected length {expected}, got {got}")


class ParameterError(DronesimError, ValueError):
    """A numeric parameter lies outside its admissible range."""


class ConfigurationError(DronesimError, ValueError):
    """An experiment or problem description is inconsistent."""


class NonDifferentiableError(DronesimError):
    """A gradient was requested where only a supergradient set exists."""


class UnsupportedFamilyError(DronesimError):
    """The utility family does not implement the requested oracle."""


class SampleOutsideBoxError(DronesimError, ValueError):
    """An observed sample violates the declared support bounds."""

    def __init__(self, index, coordinate, value, lo, hi):
        self.index = index
        self.coordinate = coordinate
        super().__init__(
            f"sample {index}, coordinate {coordinate}: value {value!r} outside [{lo!r}, {hi!r}]")


class ConvergenceError(DronesimError, RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, gap=None):
        self.gap = gap
        super().__init__(message if gap is None else f"{message} (final gap {gap:.3e})")


class DivergenceError(DronesimError, RuntimeError):
    """A simulated network state blew up."""


class EvaluationError(DronesimError, RuntimeError):
    """A user-supplied evaluator raised; carries the agent index."""

    def __init__(self, agent, cause):
        self.agent = agent
        super().__init__(f"evaluation failed for agent {agent}: {cause!r}")


class StageError(DronesimError, RuntimeError):
    """A stage of the distributed loop failed."""

    def __init__(self, stage, step, cause):
        self.stage = stage
        self.step = step
        super().__init__(f"stage '{stage}' failed at step {step}: {cause}")
