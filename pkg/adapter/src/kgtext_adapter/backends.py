"""Prediction backends.

``echo`` answers every request with its own target text at log probability
zero, which closes the protocol loop (downstream exact match must be 1.0).
``chat`` calls an OpenAI-compatible chat completions endpoint; credentials
and endpoint come from environment variables. Chat APIs expose no sequence
log probabilities, so chat candidates carry rank scores -1, -2, ... and
only their order is meaningful.
"""

import logging
import os

import httpx

from .protocol import Request

log = logging.getLogger(__name__)

ENV_API_BASE = "KGTEXT_ADAPTER_API_BASE"
ENV_API_KEY = "KGTEXT_ADAPTER_API_KEY"
ENV_MODEL = "KGTEXT_ADAPTER_MODEL"

BACKENDS = ("echo", "chat")


class BackendError(Exception):
    pass


class EchoBackend:
    """Returns the record's own target text; deterministic by construction."""

    def predict(self, request: Request, k: int) -> list:
        if k < 1:
            return []
        return [(request.target_text, 0.0)]


class ChatBackend:
    """OpenAI-compatible chat completions client.

    Sends the record's prompt pair when present, otherwise wraps the raw
    input text as the user message. Requests n completions (capped at 3,
    matching the up-to-3-predictions evaluation) at temperature 0.
    """

    def __init__(self, base_url=None, api_key=None, model=None, seed=None, transport=None):
        self.base_url = (base_url or os.environ.get(ENV_API_BASE, "")).rstrip("/")
        if not self.base_url:
            raise BackendError(f"chat backend needs {ENV_API_BASE} or --api-base")
        self.api_key = api_key or os.environ.get(ENV_API_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        if not self.model:
            raise BackendError(f"chat backend needs {ENV_MODEL} or --model")
        self.seed = seed
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        self.client = httpx.Client(
            base_url=self.base_url, headers=headers, timeout=60.0, transport=transport
        )

    def predict(self, request: Request, k: int) -> list:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text or request.input_text})
        payload = {
            "model": self.model,
            "messages": messages,
            "temperature": 0,
            "n": min(k, 3),
        }
        if self.seed is not None:
            payload["seed"] = self.seed
        try:
            response = self.client.post("/chat/completions", json=payload)
            response.raise_for_status()
            body = response.json()
            choices = body["choices"]
        except (httpx.HTTPError, KeyError, ValueError) as e:
            raise BackendError(f"chat completion failed: {e}") from e
        texts = [c.get("message", {}).get("content", "") or "" for c in choices]
        return [(text, -float(rank)) for rank, text in enumerate(texts, 1)][:k]

    def close(self):
        self.client.close()


def make_backend(name: str, **kwargs):
    if name == "echo":
        return EchoBackend()
    if name == "chat":
        return ChatBackend(**kwargs)
    raise BackendError(f"unknown backend {name!r}; expected one of {BACKENDS}")
