"""OpenAI-compatible chat-completions client with retries and a concurrency bound."""

import os
import re
import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import backoff
import openai
from dotenv import find_dotenv, load_dotenv

from src.errors import ConfigError
from src.logger import get_logger

logger = get_logger(__name__)

# Model codes accepted in configs, resolved to the endpoint's model identifiers
MODEL_CODES = {
    "llm-gpt4o": "gpt-4o-2024-05-13",
    "llm-gpt35": "gpt-3.5-turbo-1106",
    "llm-llama-3.1-70b": "llama-3.1-70b-instruct",
    "llm-yi-medium": "yi-medium",
    "llm-llama-3.1-8b": "llama-3.1-8b-instruct",
}

Messages = List[Dict[str, str]]
Transport = Callable[[Messages, str, float], str]

_SECRET_PATTERN = re.compile(r"\b(sk-[A-Za-z0-9_\-]{8,})")


class TransportError(RuntimeError):
    """Raised by custom transports for failures worth retrying."""


RETRYABLE_ERRORS = (
    TransportError,
    openai.APIConnectionError,
    openai.APITimeoutError,
    openai.RateLimitError,
    openai.InternalServerError,
)


@dataclass(frozen=True)
class LlmClientConfig:
    base_url: str = "https://api.openai.com/v1"
    model_name: str = "llm-gpt35"
    temperature: float = 0.0
    max_retries: int = 3
    request_timeout: float = 60.0
    max_concurrent_requests: int = 8
    api_key_env: str = "OPENAI_API_KEY"
    backoff_factor: float = 1.0

    def __post_init__(self):
        if not 0 <= self.temperature <= 2:
            raise ConfigError(f"temperature must be within [0, 2], got {self.temperature}")
        if self.max_retries < 1:
            raise ConfigError(f"max_retries must be >= 1, got {self.max_retries}")
        if self.max_concurrent_requests < 1:
            raise ConfigError(f"max_concurrent_requests must be >= 1, got {self.max_concurrent_requests}")
        if self.request_timeout <= 0:
            raise ConfigError(f"request_timeout must be > 0, got {self.request_timeout}")
        if self.backoff_factor < 0:
            raise ConfigError(f"backoff_factor must be >= 0, got {self.backoff_factor}")
        if not self.api_key_env:
            raise ConfigError("api_key_env must name an environment variable")

    @property
    def resolved_model(self) -> str:
        return MODEL_CODES.get(self.model_name.lower(), self.model_name)


def read_api_key(config: LlmClientConfig) -> Optional[str]:
    """API key from the environment; a .env file in the working directory is honoured."""
    load_dotenv(find_dotenv(usecwd=True))
    return os.getenv(config.api_key_env) or None


class ChatClient:
    """
    Shareable across threads. At most `max_concurrent_requests` requests are
    in flight at once; retryable transport errors back off exponentially.
    """

    def __init__(self, config: LlmClientConfig, transport: Optional[Transport] = None):
        self.config = config
        self._api_key: Optional[str] = None
        self._semaphore = threading.BoundedSemaphore(config.max_concurrent_requests)
        self._transport = transport or self._openai_transport()
        self._send = backoff.on_exception(
            backoff.expo,
            RETRYABLE_ERRORS,
            max_tries=config.max_retries,
            factor=config.backoff_factor,
            on_backoff=self._log_backoff,
            logger=None,
        )(self._send_once)

    def _openai_transport(self) -> Transport:
        self._api_key = read_api_key(self.config)
        if not self._api_key:
            raise ConfigError(
                f"Environment variable {self.config.api_key_env} is not set; "
                f"export it or add it to a .env file"
            )
        client = openai.OpenAI(
            api_key=self._api_key,
            base_url=self.config.base_url,
            timeout=self.config.request_timeout,
            max_retries=0,
        )

        def send(messages: Messages, model: str, temperature: float) -> str:
            response = client.chat.completions.create(model=model, messages=messages, temperature=temperature)
            return response.choices[0].message.content or ""

        return send

    def _log_backoff(self, details) -> None:
        logger.warning(
            "LLM request failed (%s); retry %d in %.1fs",
            self.redact(repr(details.get("exception"))),
            details["tries"],
            details["wait"],
        )

    def _send_once(self, messages: Messages) -> str:
        with self._semaphore:
            return self._transport(messages, self.config.resolved_model, self.config.temperature)

    def complete(self, messages: Messages) -> str:
        """Send one chat-completions request and return the reply text."""
        return self._send(messages)

    def redact(self, text: str) -> str:
        if self._api_key:
            text = text.replace(self._api_key, "[REDACTED]")
        return _SECRET_PATTERN.sub("[REDACTED]", text)
