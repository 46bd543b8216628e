"""Hugging Face backends: encoder with four classification heads, local causal LM.

torch and transformers are imported lazily so the rest of the package works
without the ``train`` extra installed.
"""

import threading
from collections.abc import Sequence
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional

from ..rubric import CRITERIA_ORDER, get_criterion
from .contracts import (
    BackendFailure,
    CheckpointNotFound,
    ClassifierBackend,
    ClassifierBackendRef,
    Distributions,
    GenerationRequest,
    GeneratorBackend,
)

if TYPE_CHECKING:
    from ..finetune.trainer import TrainConfig

WEIGHTS_FILE = "weights.pt"
ENCODER_DIR = "encoder"


def _require_torch() -> tuple[Any, Any]:
    try:
        import torch
        import transformers
    except ImportError as exc:
        raise BackendFailure(
            "torch and transformers are required; install the 'train' extra", "transformers"
        ) from exc
    return torch, transformers


CAUSAL_ARCHITECTURE_SUFFIXES = ("ForCausalLM", "LMHeadModel")


def is_causal_backbone(model_config: Any) -> bool:
    """Decoder-only backbones attend left to right only."""
    if getattr(model_config, "is_decoder", False):
        return True
    architectures = getattr(model_config, "architectures", None) or []
    return any(name.endswith(CAUSAL_ARCHITECTURE_SUFFIXES) for name in architectures)


def pool_embeddings(torch: Any, hidden: Any, attention_mask: Any, causal: bool) -> Any:
    """One vector per sequence: the first token, or the last attended one for causal models.

    Works for left and right padding.
    """
    if not causal:
        return hidden[:, 0, :]
    positions = torch.arange(hidden.shape[1], device=hidden.device)
    last = (attention_mask.long() * positions).argmax(dim=1)
    return hidden[torch.arange(hidden.shape[0], device=hidden.device), last]


def ensure_pad_token(tokenizer: Any, backbone_id: str) -> None:
    if tokenizer.pad_token is not None:
        return
    if tokenizer.eos_token is None:
        raise BackendFailure(f"tokenizer of '{backbone_id}' has neither a pad nor an eos token", "transformers")
    tokenizer.pad_token = tokenizer.eos_token


def _build_module(torch: Any, encoder: Any, causal: Optional[bool] = None) -> Any:
    nn = torch.nn

    class MultiHeadClassifier(nn.Module):  # type: ignore[misc, name-defined]
        """Encoder whose pooled embedding feeds one linear head per criterion."""

        def __init__(self, encoder: Any):
            super().__init__()
            self.encoder = encoder
            self.causal = is_causal_backbone(encoder.config) if causal is None else causal
            hidden = encoder.config.hidden_size
            self.heads = nn.ModuleDict(
                {c.value: nn.Linear(hidden, get_criterion(c).level_count) for c in CRITERIA_ORDER}
            )

        def forward(self, input_ids: Any, attention_mask: Any) -> dict[str, Any]:
            output = self.encoder(input_ids=input_ids, attention_mask=attention_mask)
            pooled = pool_embeddings(torch, output.last_hidden_state, attention_mask, self.causal)
            return {name: head(pooled) for name, head in self.heads.items()}

    return MultiHeadClassifier(encoder)


class EncoderHeadsClassifier(ClassifierBackend):
    """Fine-tunes a pre-trained encoder jointly on the four criteria."""

    def __init__(self, device: Optional[str] = None):
        self._device_name = device
        self._model: Any = None
        self._tokenizer: Any = None
        self._optimizer: Any = None
        self._max_length = 128
        self._backbone_id = ""

    def get_backend_name(self) -> str:
        return "transformers"

    @property
    def single_flight(self) -> bool:
        return True

    def _device(self, torch: Any) -> Any:
        if self._device_name:
            return torch.device(self._device_name)
        return torch.device("cuda" if torch.cuda.is_available() else "cpu")

    def initialize(self, config: "TrainConfig") -> None:
        torch, transformers = _require_torch()
        torch.manual_seed(config.seed)
        self._backbone_id = config.backbone_id
        self._max_length = config.max_sequence_length
        try:
            self._tokenizer = transformers.AutoTokenizer.from_pretrained(config.backbone_id)
            encoder = transformers.AutoModel.from_pretrained(config.backbone_id)
        except OSError as exc:
            raise BackendFailure(f"cannot load backbone '{config.backbone_id}': {exc}", "transformers") from exc
        ensure_pad_token(self._tokenizer, config.backbone_id)
        self._model = _build_module(torch, encoder).to(self._device(torch))
        self._optimizer = torch.optim.AdamW(self._model.parameters(), lr=config.learning_rate)

    def _encode(self, torch: Any, texts: Sequence[str]) -> dict[str, Any]:
        batch = self._tokenizer(
            list(texts),
            padding=True,
            truncation=True,
            max_length=self._max_length,
            return_tensors="pt",
        )
        device = self._device(torch)
        return {k: v.to(device) for k, v in batch.items() if k in ("input_ids", "attention_mask")}

    def train_step(self, texts: Sequence[str], gold: Sequence[Sequence[int]]) -> float:
        torch, _ = _require_torch()
        if self._model is None:
            raise BackendFailure("classifier has no parameters; initialize or load first", "transformers")
        self._model.train()
        inputs = self._encode(torch, texts)
        labels = torch.tensor([list(g) for g in gold], dtype=torch.long, device=self._device(torch))
        logits = self._model(**inputs)
        loss = sum(
            torch.nn.functional.cross_entropy(logits[c.value], labels[:, position])
            for position, c in enumerate(CRITERIA_ORDER)
        )
        self._optimizer.zero_grad()
        loss.backward()
        self._optimizer.step()
        return float(loss.item())

    def predict_distributions(self, texts: Sequence[str]) -> list[Distributions]:
        torch, _ = _require_torch()
        if self._model is None:
            raise BackendFailure("classifier has no parameters; initialize or load first", "transformers")
        self._model.eval()
        with torch.no_grad():
            logits = self._model(**self._encode(torch, texts))
            heads = {
                c: torch.softmax(logits[c.value].double(), dim=-1).cpu().tolist()
                for c in CRITERIA_ORDER
            }
        return [{c: heads[c][row] for c in CRITERIA_ORDER} for row in range(len(texts))]

    def save(self, directory: Path) -> None:
        torch, _ = _require_torch()
        if self._model is None:
            raise BackendFailure("nothing to save", "transformers")
        directory.mkdir(parents=True, exist_ok=True)
        self._model.encoder.save_pretrained(directory / ENCODER_DIR)
        self._tokenizer.save_pretrained(directory / ENCODER_DIR)
        torch.save(
            {"heads": self._model.heads.state_dict(), "max_length": self._max_length, "causal": self._model.causal},
            directory / WEIGHTS_FILE,
        )

    def load(self, ref: ClassifierBackendRef) -> None:
        torch, transformers = _require_torch()
        blob = ref.path / WEIGHTS_FILE
        if not blob.exists() or not (ref.path / ENCODER_DIR).is_dir():
            raise CheckpointNotFound(str(ref.path), f"missing {WEIGHTS_FILE} or {ENCODER_DIR}/")
        self._tokenizer = transformers.AutoTokenizer.from_pretrained(ref.path / ENCODER_DIR)
        encoder = transformers.AutoModel.from_pretrained(ref.path / ENCODER_DIR)
        ensure_pad_token(self._tokenizer, ref.backbone_id)
        state = torch.load(blob, map_location="cpu")
        self._model = _build_module(torch, encoder, state.get("causal"))
        self._model.heads.load_state_dict(state["heads"])
        self._max_length = int(state.get("max_length", self._max_length))
        self._model.to(self._device(torch))
        self._backbone_id = ref.backbone_id


class LocalGenerator(GeneratorBackend):
    """Greedy or sampled generation from a local causal language model."""

    def __init__(self, model: str, device_map: str = "auto"):
        self._model_id = model
        self._device_map = device_map
        self._model: Any = None
        self._tokenizer: Any = None
        self._lock = threading.Lock()

    def get_backend_name(self) -> str:
        return "local"

    @property
    def single_flight(self) -> bool:
        return True

    def _ensure_loaded(self) -> None:
        if self._model is not None:
            return
        _, transformers = _require_torch()
        try:
            self._tokenizer = transformers.AutoTokenizer.from_pretrained(self._model_id)
            self._model = transformers.AutoModelForCausalLM.from_pretrained(
                self._model_id, device_map=self._device_map
            )
        except OSError as exc:
            raise BackendFailure(f"cannot load model '{self._model_id}': {exc}", "local") from exc
        self._model.eval()

    def complete(self, request: GenerationRequest) -> str:
        torch, _ = _require_torch()
        with self._lock:
            self._ensure_loaded()
            messages = [{"role": "user", "content": request.prompt}]
            if getattr(self._tokenizer, "chat_template", None):
                text = self._tokenizer.apply_chat_template(
                    messages, tokenize=False, add_generation_prompt=True
                )
            else:
                text = request.prompt
            inputs = self._tokenizer(text, return_tensors="pt")
            inputs = {k: v.to(self._model.device) for k, v in inputs.items()}
            options: dict[str, Any] = {"max_new_tokens": request.max_output_length}
            if request.temperature > 0:
                options.update(do_sample=True, temperature=request.temperature)
            else:
                options["do_sample"] = False
            with torch.no_grad():
                output = self._model.generate(**inputs, **options)
            prompt_length = inputs["input_ids"].shape[1]
            return str(self._tokenizer.decode(output[0, prompt_length:], skip_special_tokens=True))
