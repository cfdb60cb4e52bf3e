"""Exception hierarchy shared by the library and the command-line harness."""


class MDFusionError(Exception):
    """Base class for all package errors."""


class CorpusError(MDFusionError, ValueError):
    """Training or test data is missing, empty or dimensionally inconsistent."""


class ClassSpecError(MDFusionError, ValueError):
    """A function-class descriptor is malformed."""


class OutOfScopeError(MDFusionError, ValueError):
    """The requested estimator is not defined in the unpaired-data regime."""


class StageError(MDFusionError, RuntimeError):
    """A multi-stage estimator failed; the message names the stage."""

    def __init__(self, stage: str, detail: str):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {detail}")


class ConfigError(MDFusionError, ValueError):
    """An experiment configuration is invalid."""


class PropertyCheckError(MDFusionError):
    """An oracle property check failed."""
