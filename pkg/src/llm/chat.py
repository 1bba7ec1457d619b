"""
Interactive chat against an OpenAI-compatible chat-completion endpoint.

The full history is resent on every turn. Server errors, rate limits and
connection failures are retried with exponential backoff; client errors
(HTTP 4xx) surface immediately with an excerpt of the response body. The
transcript is written on exit, including when the loop ends in an error.
"""
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, List, Optional, Protocol, Sequence, Tuple

import backoff
import httpx
from openai import APIConnectionError, APIStatusError, InternalServerError, OpenAI, RateLimitError
from pydantic import BaseModel, ConfigDict, Field, SecretStr

from src.config import (
    API_KEY_VAR,
    DEFAULT_CHAT_MODEL,
    DEFAULT_ENDPOINT,
    ENDPOINT_VAR,
    MODEL_VAR,
    env_value,
)
from src.errors import ChatRequestError, LlmError
from src.llm.prompt import DEFAULT_PERSONA, ChatMessage

logger = logging.getLogger(__name__)

HISTORY_LIMIT = 32_000
EXCERPT_CHARS = 200
RETRYABLE = (APIConnectionError, InternalServerError, RateLimitError)


class LlmConfig(BaseModel):
    """Chat endpoint settings. The API key is a SecretStr and never leaves this object."""

    model_config = ConfigDict(frozen=True)

    endpoint_url: str = DEFAULT_ENDPOINT
    api_key: Optional[SecretStr] = None
    model_name: str = DEFAULT_CHAT_MODEL
    persona: str = Field(default=DEFAULT_PERSONA, min_length=1)
    temperature: float = Field(default=0.2, ge=0.0, le=2.0)
    timeout: float = Field(default=30.0, gt=0.0)
    max_tries: int = Field(default=3, ge=1)
    backoff_factor: float = Field(default=1.0, ge=0.0)
    history_limit: int = Field(default=HISTORY_LIMIT, ge=1)
    dry_run: bool = False
    transcript_dir: Path = Path("transcripts")

    @classmethod
    def from_env(cls, **overrides) -> "LlmConfig":
        """Defaults from TRUST_LLM_* variables; explicit non-None overrides win."""
        values = {
            "endpoint_url": env_value(ENDPOINT_VAR, DEFAULT_ENDPOINT),
            "model_name": env_value(MODEL_VAR, DEFAULT_CHAT_MODEL),
            "api_key": env_value(API_KEY_VAR),
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


def _excerpt(text: str) -> str:
    text = " ".join(text.split())
    return text if len(text) <= EXCERPT_CHARS else text[:EXCERPT_CHARS] + "..."


def fit_history(messages: Sequence[ChatMessage], limit: int = HISTORY_LIMIT) -> Tuple[List[ChatMessage], int]:
    """Drop the oldest non-system messages until the history fits ``limit`` characters; returns (kept, dropped)."""
    kept = list(messages)
    dropped = 0
    while sum(len(m.content) for m in kept) > limit:
        index = next((k for k, m in enumerate(kept) if m.role != "system"), None)
        if index is None or index == len(kept) - 1:
            break
        del kept[index]
        dropped += 1
    return kept, dropped


class ChatClient:
    """Sends message lists to the endpoint; in dry-run mode no request is ever made."""

    def __init__(self, config: LlmConfig, http_client: Optional[httpx.Client] = None):
        self.config = config
        self.requests_sent = 0
        self._replies = 0
        self._client = None
        if config.dry_run:
            return
        if config.api_key is None or not config.api_key.get_secret_value():
            raise LlmError(f"{API_KEY_VAR} is not set; use --dry-run to chat without an endpoint")
        self._client = OpenAI(
            api_key=config.api_key.get_secret_value(),
            base_url=config.endpoint_url,
            timeout=config.timeout,
            max_retries=0,
            http_client=http_client,
        )

    def _send(self, messages: Sequence[ChatMessage]) -> str:
        self.requests_sent += 1
        response = self._client.chat.completions.create(
            model=self.config.model_name,
            messages=[m.to_dict() for m in messages],
            temperature=self.config.temperature,
        )
        return response.choices[0].message.content or ""

    def _log_retry(self, details) -> None:
        logger.warning("Chat request failed (attempt %d); retrying in %.1fs", details["tries"], details["wait"])

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        if self._client is None:
            self._replies += 1
            return f"[dry-run reply {self._replies}] No endpoint was contacted."
        send = backoff.on_exception(
            backoff.expo,
            RETRYABLE,
            max_tries=self.config.max_tries,
            jitter=None,
            factor=self.config.backoff_factor,
            on_backoff=self._log_retry,
        )(self._send)
        try:
            return send(messages)
        except APIStatusError as exc:
            body = _excerpt(exc.response.text if exc.response is not None else str(exc))
            if exc.status_code < 500:
                raise ChatRequestError(exc.status_code, body) from exc
            raise LlmError(f"chat endpoint failed with HTTP {exc.status_code} after {self.requests_sent} attempts: {body}") from exc
        except APIConnectionError as exc:
            raise LlmError(f"could not reach {self.config.endpoint_url} after {self.requests_sent} attempts") from exc


class LineIO(Protocol):
    def read_line(self, prompt: str) -> Optional[str]: ...

    def write(self, text: str) -> None: ...


class ConsoleIO:
    """Line-oriented terminal IO; end of input reads as None."""

    def __init__(self, reader: Callable[[str], str] = input, writer: Callable[[str], None] = print):
        self._reader = reader
        self._writer = writer

    def read_line(self, prompt: str) -> Optional[str]:
        try:
            return self._reader(prompt)
        except EOFError:
            return None

    def write(self, text: str) -> None:
        self._writer(text)


class ScriptedIO:
    """Replays fixed user lines and records everything written."""

    def __init__(self, lines: Sequence[str]):
        self._lines = list(lines)
        self.output: List[str] = []

    def read_line(self, prompt: str) -> Optional[str]:
        return self._lines.pop(0) if self._lines else None

    def write(self, text: str) -> None:
        self.output.append(text)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class Transcript:
    entries: List[Tuple[str, ChatMessage]] = field(default_factory=list)
    error: Optional[str] = None
    path: Optional[Path] = None

    @property
    def messages(self) -> List[ChatMessage]:
        return [message for _, message in self.entries]

    def add(self, message: ChatMessage) -> None:
        self.entries.append((_now(), message))

    def render(self) -> str:
        blocks = [f"[{stamp}] {message.role}:\n{message.content}\n" for stamp, message in self.entries]
        if self.error:
            blocks.append(f"[{_now()}] error: {self.error}\n")
        return "\n".join(blocks)

    def save(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render(), encoding="utf-8")
        self.path = path
        return path


def chat_loop(
    config: LlmConfig,
    seed_messages: Sequence[ChatMessage],
    io: LineIO,
    *,
    client: Optional[ChatClient] = None,
    transcript_path: Optional[Path] = None,
) -> Transcript:
    """
    Alternate user lines and endpoint replies until an empty line or end of
    input. The transcript is saved on every exit path; errors are re-raised
    after saving.
    """
    client = client or ChatClient(config)
    transcript = Transcript()
    for message in seed_messages:
        transcript.add(message)
    if config.dry_run:
        for message in seed_messages:
            io.write(f"--- {message.role} ---\n{message.content}")

    try:
        while True:
            line = io.read_line("you> ")
            if line is None or not line.strip():
                break
            transcript.add(ChatMessage("user", line.strip()))
            history, dropped = fit_history(transcript.messages, config.history_limit)
            if dropped:
                logger.warning("History over %d characters; dropped %d oldest messages", config.history_limit, dropped)
                io.write(f"(note: {dropped} older messages were left out to fit the history limit)")
            reply = client.complete(history)
            transcript.add(ChatMessage("assistant", reply or "(empty reply)"))
            io.write(reply)
    except LlmError as exc:
        transcript.error = str(exc)
        raise
    finally:
        path = transcript_path or config.transcript_dir / f"chat-{datetime.now(timezone.utc):%Y%m%dT%H%M%S}.txt"
        transcript.save(Path(path))
        logger.info("Transcript saved to %s", path)
    return transcript
