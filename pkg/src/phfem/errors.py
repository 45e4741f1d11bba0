"""Error taxonomy shared across the package.

The CLI maps each class to a distinct exit status, so raising the right
type is part of the public contract.
"""


class PhfemError(Exception):
    """Base class for all package errors."""


class ConfigError(PhfemError):
    """Invalid or incomplete run configuration."""


class MeshError(PhfemError):
    """Mesh syntax or topology violation."""


class AssemblyError(PhfemError):
    """Structural defect detected while building a discrete system."""


class SolverError(PhfemError):
    """Linear-solver or eigensolver failure at run time."""
