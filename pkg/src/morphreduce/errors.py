"""Exception types shared across the toolkit.

Every error carries a short machine-readable ``code`` that the CLI uses
when reporting failures on stderr (``error: <code>: <message>``).
"""


class ToolkitError(Exception):
    """Base class for all morphreduce domain errors."""

    code = "error"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class MeshFormatError(ToolkitError):
    """A mesh file could not be parsed."""

    code = "mesh_format"


class MeshTopologyError(ToolkitError):
    """Mesh connectivity violates what an operation requires (e.g. open surface)."""

    code = "mesh_topology"


class DomainError(ToolkitError):
    """An input lies outside the mathematical domain of an operation."""

    code = "domain"


class ConfigError(ToolkitError):
    """Invalid configuration document or inconsistent settings."""

    code = "config"


class EvaluatorError(ToolkitError):
    """A builtin or external objective evaluation failed."""

    code = "evaluator"
