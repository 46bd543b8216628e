import math
from pathlib import Path
from types import SimpleNamespace
from typing import Any

import httpx
import openai
import pytest

from fuzzyjudge.backend import (
    BackendFailure,
    BackendRegistry,
    CheckpointNotFound,
    ClassifierBackendRef,
    GenerationRequest,
    GenerationTimeout,
    UnknownBackend,
    generate,
    predict_distributions,
    register_builtin_backends,
    validate_distributions,
)
from fuzzyjudge.backend.bow import BagOfWordsClassifier
from fuzzyjudge.backend.remote import ChatCompletionGenerator
from fuzzyjudge.backend.stubs import (
    EchoGenerator,
    LookupClassifier,
    RubricStubGenerator,
    ScriptedGenerator,
    UniformClassifier,
    uniform_distributions,
)
from fuzzyjudge.finetune.trainer import TrainConfig
from fuzzyjudge.rubric import CRITERIA_ORDER, CriterionId


def test_builtin_backends_are_registered():
    register_builtin_backends()
    assert {"bow", "uniform", "lookup", "transformers"} <= set(BackendRegistry.classifier_names())
    assert {"echo", "scripted", "rubric-stub", "remote", "local"} <= set(BackendRegistry.generator_names())
    assert isinstance(BackendRegistry.classifier("bow", dimensions=64), BagOfWordsClassifier)
    assert isinstance(BackendRegistry.generator("echo"), EchoGenerator)


def test_unknown_backend_lists_supported_names():
    register_builtin_backends()
    with pytest.raises(UnknownBackend) as exc_info:
        BackendRegistry.classifier("svm")
    assert "Supported backends:" in str(exc_info.value)
    assert "bow" in str(exc_info.value)


def test_validate_distributions_accepts_uniform():
    assert validate_distributions([uniform_distributions()], 1) == [uniform_distributions()]


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d.pop(CriterionId.ETHICAL_BEHAVIOR), "lacks head"),
        (lambda d: d.__setitem__(CriterionId.PROFESSIONALISM, [0.5, 0.5]), "has 2 entries"),
        (lambda d: d.__setitem__(CriterionId.PROFESSIONALISM, [1.2, -0.1, -0.1]), "not a distribution"),
        (lambda d: d.__setitem__(CriterionId.PROFESSIONALISM, [0.5, 0.3, 0.3]), "sums to"),
        (lambda d: d.__setitem__(CriterionId.PROFESSIONALISM, [float("nan"), 0.5, 0.5]), "not a distribution"),
    ],
)
def test_validate_distributions_rejects_contract_violations(mutate: Any, fragment: str):
    dists = uniform_distributions()
    mutate(dists)
    with pytest.raises(BackendFailure) as exc_info:
        validate_distributions([dists], 1, "test")
    assert fragment in str(exc_info.value)
    assert str(exc_info.value).startswith("[test] ")


def test_validate_distributions_checks_length():
    with pytest.raises(BackendFailure):
        validate_distributions([uniform_distributions()], 2)


def test_predict_distributions_wraps_unexpected_errors():
    class Exploding(UniformClassifier):
        def predict_distributions(self, texts):  # type: ignore[no-untyped-def]
            raise RuntimeError("boom")

    with pytest.raises(BackendFailure) as exc_info:
        predict_distributions(Exploding(), None, ["hi"])
    assert "boom" in str(exc_info.value)
    assert predict_distributions(Exploding(), None, []) == []


def test_generate_wraps_unexpected_errors():
    with pytest.raises(BackendFailure) as exc_info:
        generate(ScriptedGenerator([RuntimeError("boom")]), GenerationRequest("p"))
    assert str(exc_info.value) == "[scripted] generation failed: boom"
    with pytest.raises(GenerationTimeout):
        generate(ScriptedGenerator([GenerationTimeout("slow")]), GenerationRequest("p"))
    assert generate(ScriptedGenerator(["ok"]), GenerationRequest("p")) == "ok"


def test_bow_classifier_learns_and_round_trips(tmp_path: Path):
    classifier = BagOfWordsClassifier(dimensions=256)
    classifier.initialize(TrainConfig(backbone_id="hashed-bow", learning_rate=1.0, max_sequence_length=32))
    texts = ["you idiot", "what medication do you take"]
    gold = [[0, 0, 1, 0], [2, 2, 4, 3]]
    first = classifier.train_step(texts, gold)
    for _ in range(50):
        last = classifier.train_step(texts, gold)
    assert last < first

    predictions = classifier.predict_distributions(texts)
    validate_distributions(predictions, 2)
    assert max(range(3), key=lambda i: predictions[1][CriterionId.PROFESSIONALISM][i]) == 2

    classifier.save(tmp_path / "ckpt")
    restored = BagOfWordsClassifier()
    restored.load(ClassifierBackendRef("hashed-bow", str(tmp_path / "ckpt")))
    assert restored.predict_distributions(texts) == predictions


def test_bow_initial_loss_is_uniform_cross_entropy():
    classifier = BagOfWordsClassifier(dimensions=32)
    classifier.initialize(TrainConfig(backbone_id="hashed-bow", learning_rate=0.1))
    expected = math.log(3) + math.log(3) + math.log(5) + math.log(4)
    assert classifier.train_step(["hello"], [[0, 0, 0, 0]]) == pytest.approx(expected)


def test_bow_requires_parameters(tmp_path: Path):
    with pytest.raises(BackendFailure):
        BagOfWordsClassifier().predict_distributions(["hi"])
    with pytest.raises(CheckpointNotFound):
        BagOfWordsClassifier().load(ClassifierBackendRef("hashed-bow", str(tmp_path / "nowhere")))


def test_bow_truncates_to_max_sequence_length():
    classifier = BagOfWordsClassifier(dimensions=64, max_sequence_length=2)
    a = classifier.featurize(["alpha beta gamma delta"])
    b = classifier.featurize(["alpha beta"])
    assert (a == b).all()


def test_lookup_classifier_round_trip(tmp_path: Path):
    dists = uniform_distributions()
    dists[CriterionId.PROFESSIONALISM] = [0.1, 0.1, 0.8]
    classifier = LookupClassifier({"hello": dists})
    classifier.save(tmp_path)
    restored = LookupClassifier()
    restored.load(ClassifierBackendRef("lookup", str(tmp_path), "lookup"))
    assert restored.predict_distributions(["hello", "other"]) == [dists, uniform_distributions()]


def test_echo_generator_returns_trailing_line():
    assert EchoGenerator().complete(GenerationRequest('header\nStudent: "hi"\n\n')) == 'Student: "hi"'


def test_uniform_classifier_shapes():
    vectors = UniformClassifier().predict_distributions(["a", "b"])
    assert len(vectors) == 2
    assert [len(vectors[0][c]) for c in CRITERIA_ORDER] == [3, 3, 5, 4]
    assert vectors[1][CriterionId.CONTEXTUAL_DISTRACTION] == [0.25, 0.25, 0.25, 0.25]


def test_scripted_generator_plays_back_and_raises():
    generator = ScriptedGenerator(["first", BackendFailure("down"), "last"])
    request = GenerationRequest("prompt")
    assert generator.complete(request) == "first"
    with pytest.raises(BackendFailure):
        generator.complete(request)
    assert generator.complete(request) == "last"
    assert generator.complete(request) == "last"
    assert generator.calls == 4


def test_rubric_stub_is_deterministic_per_target():
    generator = RubricStubGenerator(seed=3)
    prompt = "header\nStudent: any chest pain?\n"
    reply = generator.complete(GenerationRequest(prompt))
    assert reply == generator.complete(GenerationRequest("other header\n" + prompt))
    assert len(reply.strip().splitlines()) == len(CRITERIA_ORDER)
    assert reply.startswith("Professionalism: ")
    with pytest.raises(BackendFailure):
        generator.complete(GenerationRequest("no target here"))


def test_generation_request_validation():
    with pytest.raises(ValueError):
        GenerationRequest("p", max_output_length=0)
    with pytest.raises(ValueError):
        GenerationRequest("p", temperature=-0.5)


class FakeCompletions:
    def __init__(self, outcomes: list[Any]):
        self.outcomes = outcomes
        self.calls: list[dict[str, Any]] = []

    def create(self, **kwargs: Any) -> Any:
        self.calls.append(kwargs)
        outcome = self.outcomes[min(len(self.calls) - 1, len(self.outcomes) - 1)]
        if isinstance(outcome, Exception):
            raise outcome
        return SimpleNamespace(choices=[SimpleNamespace(message=SimpleNamespace(content=outcome))])


def fake_client(outcomes: list[Any]) -> tuple[Any, FakeCompletions]:
    completions = FakeCompletions(outcomes)
    return SimpleNamespace(chat=SimpleNamespace(completions=completions)), completions


REQUEST = httpx.Request("POST", "http://localhost/v1/chat/completions")


def test_remote_generator_sends_single_user_message():
    client, completions = fake_client(["Professionalism: Appropriate"])
    generator = ChatCompletionGenerator("gpt-test", client=client, sleep=lambda _: None)
    reply = generator.complete(GenerationRequest("the prompt", max_output_length=64))
    assert reply == "Professionalism: Appropriate"
    assert completions.calls == [
        {
            "model": "gpt-test",
            "messages": [{"role": "user", "content": "the prompt"}],
            "temperature": 0.0,
            "max_tokens": 64,
        }
    ]


def test_remote_generator_retries_with_backoff():
    sleeps: list[float] = []
    client, completions = fake_client([openai.APIConnectionError(request=REQUEST), "ok"])
    generator = ChatCompletionGenerator("m", client=client, retries=3, backoff=0.5, sleep=sleeps.append)
    assert generator.complete(GenerationRequest("p")) == "ok"
    assert len(completions.calls) == 2
    assert sleeps == [0.5]


def test_remote_generator_timeout_after_retries():
    sleeps: list[float] = []
    client, completions = fake_client([openai.APITimeoutError(request=REQUEST)])
    generator = ChatCompletionGenerator("m", client=client, retries=3, backoff=1.0, sleep=sleeps.append)
    with pytest.raises(GenerationTimeout) as exc_info:
        generator.complete(GenerationRequest("p"))
    assert "3 attempt(s)" in str(exc_info.value)
    assert len(completions.calls) == 3
    assert sleeps == [1.0, 2.0]


def test_remote_generator_missing_key(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv("FZJ_TEST_UNSET_KEY", raising=False)
    generator = ChatCompletionGenerator("m", api_key_env="FZJ_TEST_UNSET_KEY")
    with pytest.raises(BackendFailure) as exc_info:
        generator.complete(GenerationRequest("p"))
    assert "FZJ_TEST_UNSET_KEY" in str(exc_info.value)


def test_remote_generator_needs_model():
    with pytest.raises(BackendFailure):
        ChatCompletionGenerator("")


def test_remote_generator_wraps_other_client_errors():
    client, completions = fake_client([openai.OpenAIError("unexpected payload")])
    generator = ChatCompletionGenerator("m", client=client, retries=3, sleep=lambda _: None)
    with pytest.raises(BackendFailure) as exc_info:
        generator.complete(GenerationRequest("p"))
    assert "unexpected payload" in str(exc_info.value)
    assert len(completions.calls) == 1


def test_pool_embeddings_first_token_or_last_attended():
    torch = pytest.importorskip("torch")
    from fuzzyjudge.backend.transformers_backend import pool_embeddings

    hidden = torch.arange(16, dtype=torch.float32).reshape(2, 4, 2)
    right_padded = torch.tensor([[1, 1, 1, 0], [1, 1, 0, 0]])
    left_padded = torch.tensor([[0, 1, 1, 1], [0, 0, 1, 1]])
    assert pool_embeddings(torch, hidden, right_padded, causal=False).tolist() == [[0, 1], [8, 9]]
    assert pool_embeddings(torch, hidden, right_padded, causal=True).tolist() == [[4, 5], [10, 11]]
    assert pool_embeddings(torch, hidden, left_padded, causal=True).tolist() == [[6, 7], [14, 15]]


@pytest.mark.parametrize(
    "model_config, causal",
    [
        (SimpleNamespace(architectures=["LlamaForCausalLM"]), True),
        (SimpleNamespace(architectures=["GPT2LMHeadModel"]), True),
        (SimpleNamespace(architectures=["BertForMaskedLM"]), False),
        (SimpleNamespace(architectures=None, is_decoder=True), True),
        (SimpleNamespace(), False),
    ],
)
def test_causal_backbone_detection(model_config: Any, causal: bool):
    from fuzzyjudge.backend.transformers_backend import is_causal_backbone

    assert is_causal_backbone(model_config) is causal


def test_missing_pad_token_falls_back_to_eos():
    from fuzzyjudge.backend.transformers_backend import ensure_pad_token

    tokenizer = SimpleNamespace(pad_token=None, eos_token="</s>")
    ensure_pad_token(tokenizer, "decoder")
    assert tokenizer.pad_token == "</s>"
    with pytest.raises(BackendFailure):
        ensure_pad_token(SimpleNamespace(pad_token=None, eos_token=None), "decoder")
