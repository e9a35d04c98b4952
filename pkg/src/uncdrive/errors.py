"""Shared exception types."""


class ConfigError(Exception):
    """Invalid configuration file or inconsistent configuration values."""


class ContractViolation(ValueError):
    """An operation was called outside its declared domain."""


class ReplayDivergence(Exception):
    """Re-simulating a logged episode did not reproduce the log."""

    def __init__(self, step: int, field: str, logged, resimulated):
        self.step = step
        self.field = field
        self.logged = logged
        self.resimulated = resimulated
        super().__init__(
            f"replay diverged at step {step}: {field} logged={logged!r} resimulated={resimulated!r}"
        )


class TrainingDiverged(Exception):
    """NaN/Inf encountered during optimization; partial artifacts are preserved."""
