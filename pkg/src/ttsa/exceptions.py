"""Exception hierarchy shared by every module."""


class TTSAError(Exception):
    """Base class for all errors raised by :mod:`ttsa`."""


class StructuralError(TTSAError):
    """Shapes, dimensions or regimes do not fit together."""


class AdmissibilityError(TTSAError, ValueError):
    """Parameters violate a hypothesis the analysis depends on."""


class ConvergenceError(TTSAError):
    """An inner fixed-point solve ran out of iterations."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class NumericBlowupError(TTSAError):
    """Iterates or noise became non-finite."""

    def __init__(self, k, norm, trial_seed=None):
        self.k = k
        self.norm = norm
        self.trial_seed = trial_seed
        where = f" (trial seed {trial_seed})" if trial_seed is not None else ""
        super().__init__(f"non-finite iterate at step k={k}, norm={norm!r}{where}")


class EnsembleError(NumericBlowupError):
    """A trial inside an ensemble blew up."""


class DomainError(TTSAError, ValueError):
    """Input values lie outside the domain of an estimator (e.g. log of <= 0)."""


class SideConditionWarning(UserWarning):
    """A step-size side condition used inside the drift bounds fails at k=0."""


class ConfigError(TTSAError, ValueError):
    """An experiment config field is missing, malformed or out of range."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
