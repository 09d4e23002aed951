"""Exception types shared across the package."""


class SlfError(Exception):
    """Base class for every error this package raises on purpose."""


class DimensionError(SlfError, ValueError):
    """Operands have incompatible shapes; the message names both."""


class DomainError(SlfError, ValueError):
    """An argument lies outside the operation's documented domain."""


class ContractError(SlfError, RuntimeError):
    """A caller-side contract was violated, e.g. a non-scalar loss or a
    non-deterministic closure handed to the gradient checker."""


class DataError(SlfError, ValueError):
    """An example violates the dataset schema."""


class DatasetError(SlfError, ValueError):
    """A dataset or vector file failed to load; the message carries the
    one-based line number of the offending entry."""


class ConfigError(SlfError, ValueError):
    """A run-config document is malformed or references missing paths."""


class CheckpointError(SlfError, ValueError):
    """A checkpoint failed validation; the message names the parameter."""


class DivergenceError(SlfError, RuntimeError):
    """Training produced a non-finite loss."""
