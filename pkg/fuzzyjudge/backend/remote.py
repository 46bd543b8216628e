"""Remote generation over the chat-completion protocol."""

import os
import threading
import time
from collections.abc import Callable
from typing import TYPE_CHECKING, Any, Optional

from .contracts import BackendFailure, GenerationRequest, GenerationTimeout, GeneratorBackend

if TYPE_CHECKING:
    from openai import OpenAI

DEFAULT_API_KEY_ENV = "FUZZYJUDGE_API_KEY"


class ChatCompletionGenerator(GeneratorBackend):
    """Sends the prompt as a single user message and returns the reply text.

    The endpoint is any server speaking the chat-completion protocol; the API
    key is read from the environment variable named by ``api_key_env``.
    Failed calls are retried with exponential backoff.
    """

    def __init__(
        self,
        model: str,
        base_url: Optional[str] = None,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        retries: int = 3,
        timeout: float = 30.0,
        backoff: float = 1.0,
        client: Optional["OpenAI"] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not model:
            raise BackendFailure("no model configured for remote generation", "remote")
        self._model = model
        self._base_url = base_url or None
        self._api_key_env = api_key_env
        self._retries = max(1, retries)
        self._timeout = timeout
        self._backoff = backoff
        self._client = client
        self._client_lock = threading.Lock()
        self._sleep = sleep

    def get_backend_name(self) -> str:
        return "remote"

    def _get_client(self) -> "OpenAI":
        with self._client_lock:
            if self._client is None:
                from openai import OpenAI

                api_key = os.environ.get(self._api_key_env, "").strip()
                if not api_key:
                    raise BackendFailure(
                        f"environment variable {self._api_key_env} is not set", "remote"
                    )
                self._client = OpenAI(
                    api_key=api_key,
                    base_url=self._base_url,
                    timeout=self._timeout,
                    max_retries=0,
                )
            return self._client

    def _create(self, request: GenerationRequest) -> Any:
        return self._get_client().chat.completions.create(
            model=self._model,
            messages=[{"role": "user", "content": request.prompt}],
            temperature=request.temperature,
            max_tokens=request.max_output_length,
        )

    def complete(self, request: GenerationRequest) -> str:
        import openai

        last_error: Optional[Exception] = None
        timed_out = False
        for attempt in range(self._retries):
            try:
                response = self._create(request)
                content = response.choices[0].message.content
                return content or ""
            except openai.APITimeoutError as exc:
                last_error, timed_out = exc, True
            except (openai.APIConnectionError, openai.RateLimitError, openai.InternalServerError) as exc:
                last_error, timed_out = exc, False
            except openai.APIStatusError as exc:
                raise BackendFailure(f"endpoint returned {exc.status_code}: {exc.message}", "remote") from exc
            except (IndexError, AttributeError) as exc:
                raise BackendFailure(f"malformed completion response: {exc}", "remote") from exc
            except openai.OpenAIError as exc:
                raise BackendFailure(f"{type(exc).__name__}: {exc}", "remote") from exc
            if attempt + 1 < self._retries:
                self._sleep(self._backoff * (2**attempt))

        detail = f"request failed after {self._retries} attempt(s): {last_error}"
        if timed_out:
            raise GenerationTimeout(detail, "remote") from last_error
        raise BackendFailure(detail, "remote") from last_error
