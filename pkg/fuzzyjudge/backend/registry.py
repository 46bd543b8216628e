"""Registry for classifier and generator backends."""

from collections.abc import Callable, Iterable
from typing import Any

from ..errors import FuzzyJudgeError
from .contracts import ClassifierBackend, GeneratorBackend


class UnknownBackend(FuzzyJudgeError):
    """Raised when no backend is registered under a name."""

    def __init__(self, kind: str, name: str, available: Iterable[str]):
        self.kind = kind
        self.name = name
        super().__init__(
            f"Unsupported {kind} backend: {name}. "
            f"Supported backends: {', '.join(sorted(available))}"
        )


class BackendRegistry:
    """Registry of backend factories keyed by backend name.

    Factories are classes or callables accepting keyword options; the name is
    taken from an instance's ``get_backend_name()`` unless given explicitly.
    """

    _classifiers: dict[str, Callable[..., ClassifierBackend]] = {}
    _generators: dict[str, Callable[..., GeneratorBackend]] = {}

    @classmethod
    def register_classifier(cls, name: str, factory: Callable[..., ClassifierBackend]) -> None:
        cls._classifiers[name] = factory

    @classmethod
    def register_generator(cls, name: str, factory: Callable[..., GeneratorBackend]) -> None:
        cls._generators[name] = factory

    @classmethod
    def ensure_classifier(cls, name: str, factory: Callable[..., ClassifierBackend]) -> None:
        """Register only if the name is not taken."""
        if name not in cls._classifiers:
            cls._classifiers[name] = factory

    @classmethod
    def ensure_generator(cls, name: str, factory: Callable[..., GeneratorBackend]) -> None:
        if name not in cls._generators:
            cls._generators[name] = factory

    @classmethod
    def classifier(cls, name: str, **options: Any) -> ClassifierBackend:
        """Instantiate a classifier backend by name."""
        if name not in cls._classifiers:
            raise UnknownBackend("classifier", name, cls._classifiers)
        return cls._classifiers[name](**options)

    @classmethod
    def generator(cls, name: str, **options: Any) -> GeneratorBackend:
        """Instantiate a generator backend by name."""
        if name not in cls._generators:
            raise UnknownBackend("generator", name, cls._generators)
        return cls._generators[name](**options)

    @classmethod
    def classifier_names(cls) -> list[str]:
        return sorted(cls._classifiers)

    @classmethod
    def generator_names(cls) -> list[str]:
        return sorted(cls._generators)


def register_builtin_backends() -> None:
    """Register the backends shipped with the package.

    Optional-dependency backends import their libraries lazily, so
    registering them never requires torch or transformers.
    """
    from .bow import BagOfWordsClassifier
    from .remote import ChatCompletionGenerator
    from .stubs import (
        EchoGenerator,
        LookupClassifier,
        RubricStubGenerator,
        ScriptedGenerator,
        UniformClassifier,
    )
    from .transformers_backend import EncoderHeadsClassifier, LocalGenerator

    BackendRegistry.ensure_classifier("bow", BagOfWordsClassifier)
    BackendRegistry.ensure_classifier("uniform", UniformClassifier)
    BackendRegistry.ensure_classifier("lookup", LookupClassifier)
    BackendRegistry.ensure_classifier("transformers", EncoderHeadsClassifier)

    BackendRegistry.ensure_generator("echo", EchoGenerator)
    BackendRegistry.ensure_generator("scripted", ScriptedGenerator)
    BackendRegistry.ensure_generator("rubric-stub", RubricStubGenerator)
    BackendRegistry.ensure_generator("remote", ChatCompletionGenerator)
    BackendRegistry.ensure_generator("local", LocalGenerator)
