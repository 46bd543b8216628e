"""Model backend contracts and registry.

Implementations are registered by ``register_builtin_backends()`` and are not
imported here.
"""

from .contracts import (
    BackendFailure,
    CheckpointNotFound,
    ClassifierBackend,
    ClassifierBackendRef,
    Distributions,
    GenerationRequest,
    GenerationTimeout,
    GeneratorBackend,
    generate,
    predict_distributions,
    validate_distributions,
)
from .registry import BackendRegistry, UnknownBackend, register_builtin_backends

__all__ = [
    "BackendFailure",
    "BackendRegistry",
    "CheckpointNotFound",
    "ClassifierBackend",
    "ClassifierBackendRef",
    "Distributions",
    "GenerationRequest",
    "GenerationTimeout",
    "GeneratorBackend",
    "UnknownBackend",
    "generate",
    "predict_distributions",
    "register_builtin_backends",
    "validate_distributions",
]
