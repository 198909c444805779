"""Exception hierarchy shared by every module."""


class GfmSimError(Exception):
    pass


class ParameterError(GfmSimError, ValueError):
    """Invalid argument or configuration value."""


class DegenerateSeriesError(GfmSimError, ValueError):
    """A series is constant or otherwise unusable for the requested operation."""


class SimulationDivergenceError(GfmSimError, ArithmeticError):
    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class FitError(GfmSimError, RuntimeError):
    pass


class TrainingError(GfmSimError, RuntimeError):
    def __init__(self, message: str, epoch: int | None = None):
        suffix = "" if epoch is None else f" (epoch {epoch})"
        super().__init__(message + suffix)
        self.epoch = epoch


class MetricError(GfmSimError, ValueError):
    pass


class InternalConsistencyError(GfmSimError, RuntimeError):
    pass


class EnsembleError(GfmSimError, RuntimeError):
    def __init__(self, message: str, failed_seeds: list[int]):
        super().__init__(f"{message}: failed seeds {failed_seeds}")
        self.failed_seeds = failed_seeds


class TuningError(GfmSimError, RuntimeError):
    pass


class ConfigError(GfmSimError, ValueError):
    pass
