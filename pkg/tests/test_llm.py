import json

import httpx
import pytest

from src.errors import ChatRequestError, LlmError
from src.explain import local_explanation
from src.explain.render import path_conditions
from src.llm import (
    DEFAULT_PERSONA,
    SAME_LEAF_INSTRUCTION,
    ChatClient,
    ChatMessage,
    LlmConfig,
    ScriptedIO,
    build_prompt,
    chat_loop,
    fit_history,
)

ENDPOINT = "http://llm.test/v1"


def completion(content: str) -> dict:
    return {
        "id": "chatcmpl-test",
        "object": "chat.completion",
        "created": 0,
        "model": "test-model",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
    }


class FakeEndpoint:
    """Replies with queued (status, payload) pairs and records every request body."""

    def __init__(self, *responses):
        self.responses = list(responses)
        self.requests = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(json.loads(request.content))
        status, payload = self.responses.pop(0) if len(self.responses) > 1 else self.responses[0]
        if isinstance(payload, dict):
            return httpx.Response(status, json=payload)
        return httpx.Response(status, text=payload)

    def client(self) -> httpx.Client:
        return httpx.Client(transport=httpx.MockTransport(self))


def live_config(**overrides) -> LlmConfig:
    values = {"endpoint_url": ENDPOINT, "api_key": "sk-test", "model_name": "test-model", "backoff_factor": 0.0}
    values.update(overrides)
    return LlmConfig(**values)


@pytest.fixture
def explanation(piecewise_model, piecewise):
    return local_explanation(piecewise_model, piecewise, 2)


class TestPrompt:
    def test_single_system_message_starting_with_persona(self, explanation, piecewise_model):
        messages = build_prompt(explanation, piecewise_model, "loan officer")
        assert len(messages) == 1
        assert messages[0].role == "system"
        assert messages[0].content.startswith("loan officer")

    def test_contains_constraints_and_instruction(self, explanation, piecewise_model):
        content = build_prompt(explanation, piecewise_model)[0].content
        assert content.startswith(DEFAULT_PERSONA)
        for condition in path_conditions(explanation.path):
            assert f"- {condition}" in content
        assert SAME_LEAF_INSTRUCTION in content
        assert f"{explanation.prediction:.6g}" in content

    def test_message_validation(self):
        with pytest.raises(ValueError):
            ChatMessage("narrator", "hello")
        with pytest.raises(ValueError):
            ChatMessage("user", "")


class TestHistory:
    def test_drops_oldest_non_system_messages(self):
        messages = [ChatMessage("system", "s" * 10)] + [ChatMessage("user", "u" * 10) for _ in range(5)]
        kept, dropped = fit_history(messages, limit=35)
        assert dropped == 3
        assert kept[0].role == "system"
        assert len(kept) == 3

    def test_keeps_latest_message(self):
        messages = [ChatMessage("system", "s" * 10), ChatMessage("user", "u" * 100)]
        kept, dropped = fit_history(messages, limit=20)
        assert (len(kept), dropped) == (2, 0)


class TestChatClient:
    def test_successful_request(self):
        endpoint = FakeEndpoint((200, completion("hello back")))
        client = ChatClient(live_config(), http_client=endpoint.client())
        reply = client.complete([ChatMessage("system", "ctx"), ChatMessage("user", "hi")])
        assert reply == "hello back"
        assert endpoint.requests[0]["messages"] == [
            {"role": "system", "content": "ctx"},
            {"role": "user", "content": "hi"},
        ]
        assert endpoint.requests[0]["model"] == "test-model"

    def test_retries_server_errors(self):
        endpoint = FakeEndpoint((500, "boom"), (200, completion("recovered")))
        client = ChatClient(live_config(), http_client=endpoint.client())
        assert client.complete([ChatMessage("user", "hi")]) == "recovered"
        assert client.requests_sent == 2

    def test_gives_up_after_max_tries(self):
        endpoint = FakeEndpoint((503, "unavailable"))
        client = ChatClient(live_config(max_tries=3), http_client=endpoint.client())
        with pytest.raises(LlmError, match="503"):
            client.complete([ChatMessage("user", "hi")])
        assert len(endpoint.requests) == 3

    def test_client_error_is_not_retried(self):
        endpoint = FakeEndpoint((400, {"error": {"message": "bad model name"}}))
        client = ChatClient(live_config(), http_client=endpoint.client())
        with pytest.raises(ChatRequestError) as info:
            client.complete([ChatMessage("user", "hi")])
        assert info.value.status_code == 400
        assert "bad model name" in info.value.excerpt
        assert len(endpoint.requests) == 1

    def test_missing_api_key(self):
        with pytest.raises(LlmError, match="TRUST_LLM_API_KEY"):
            ChatClient(LlmConfig(endpoint_url=ENDPOINT))

    def test_dry_run_sends_nothing(self):
        client = ChatClient(LlmConfig(dry_run=True))
        assert client.complete([ChatMessage("user", "hi")]).startswith("[dry-run reply 1]")
        assert client.requests_sent == 0


class TestConfig:
    def test_api_key_is_secret(self):
        config = live_config()
        assert "sk-test" not in repr(config)
        assert "sk-test" not in str(config.model_dump())

    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("TRUST_LLM_ENDPOINT", "http://env.test/v1")
        monkeypatch.setenv("TRUST_LLM_MODEL", "env-model")
        monkeypatch.delenv("TRUST_LLM_API_KEY", raising=False)
        config = LlmConfig.from_env(model_name="flag-model", persona=None)
        assert config.endpoint_url == "http://env.test/v1"
        assert config.model_name == "flag-model"
        assert config.persona == DEFAULT_PERSONA
        assert config.api_key is None


class TestChatLoop:
    def test_dry_run_transcript(self, explanation, piecewise_model, tmp_path):
        config = LlmConfig(dry_run=True)
        io = ScriptedIO(["What drives this prediction?"])
        client = ChatClient(config)
        path = tmp_path / "chat.txt"
        transcript = chat_loop(config, build_prompt(explanation, piecewise_model), io, client=client, transcript_path=path)

        assert [m.role for m in transcript.messages] == ["system", "user", "assistant"]
        assert client.requests_sent == 0
        assert transcript.path == path
        text = path.read_text(encoding="utf-8")
        assert "What drives this prediction?" in text
        assert io.output[0].startswith("--- system ---")

    def test_history_is_resent_every_turn(self, tmp_path):
        endpoint = FakeEndpoint((200, completion("ok")))
        config = live_config()
        client = ChatClient(config, http_client=endpoint.client())
        chat_loop(config, [ChatMessage("system", "ctx")], ScriptedIO(["one", "two"]), client=client, transcript_path=tmp_path / "t.txt")
        assert [len(body["messages"]) for body in endpoint.requests] == [2, 4]

    def test_transcript_saved_on_error(self, tmp_path):
        endpoint = FakeEndpoint((500, "down"))
        config = live_config(max_tries=2)
        client = ChatClient(config, http_client=endpoint.client())
        path = tmp_path / "failed.txt"
        with pytest.raises(LlmError):
            chat_loop(config, [ChatMessage("system", "ctx")], ScriptedIO(["hello"]), client=client, transcript_path=path)
        text = path.read_text(encoding="utf-8")
        assert "hello" in text
        assert "error:" in text

    def test_empty_line_ends_chat(self, tmp_path):
        config = LlmConfig(dry_run=True)
        transcript = chat_loop(config, [ChatMessage("system", "ctx")], ScriptedIO(["", "ignored"]), transcript_path=tmp_path / "t.txt")
        assert len(transcript.messages) == 1
