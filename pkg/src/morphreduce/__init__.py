"""morphreduce: shape-parametrized design studies at desk scale.

Free-form deformation of triangle meshes, dynamic mode decomposition of
snapshot series, active-subspace reduction with polynomial response
surfaces, quaternion rigid-body dynamics, and a campaign runner gluing
them together.
"""

from . import activesubspace, campaign, dmd, ffd, geometry, rigidbody, surrogate
from .errors import (ConfigError, DomainError, EvaluatorError, MeshFormatError,
                     MeshTopologyError, ToolkitError)

__version__ = "0.1.0"

__all__ = [
    "activesubspace", "campaign", "dmd", "ffd", "geometry", "rigidbody",
    "surrogate", "ToolkitError", "MeshFormatError", "MeshTopologyError",
    "DomainError", "ConfigError", "EvaluatorError", "__version__",
]
