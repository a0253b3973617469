"""Exception types shared across the package."""


class MagnetError(Exception):
    """Base class for all package errors."""


class DimensionError(MagnetError):
    """Tensor or layer shapes do not line up."""


class InputError(MagnetError):
    """A caller-supplied value violates an operation's precondition."""


class ContractError(MagnetError):
    """An API contract was violated (e.g. non-scalar loss, reused tape)."""


class NumericError(MagnetError):
    """A computation produced or received non-finite values."""


class AbsentVertexError(MagnetError):
    """A vertex was requested that is not present in the environment."""


class SchemaError(MagnetError):
    """An object kind has no entry in the vertex/edge type schema."""


class GenerationError(MagnetError):
    """Random map generation failed after bounded retries."""


class ConsistencyError(MagnetError):
    """Two structures that must describe the same set of vertices disagree."""


class ConfigError(MagnetError):
    """Experiment configuration is malformed or violates a constraint."""


class CheckpointError(MagnetError):
    """A parameter checkpoint file is missing, corrupt, or wrong version."""
