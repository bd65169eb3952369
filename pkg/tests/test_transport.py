from __future__ import annotations

import io
import json
from importlib import resources

import numpy as np
import pytest

from ranweave.retrieval import (
    EMBED_BASE_URL_ENV,
    RemoteEmbedder,
    RetrievalUnavailableError,
)
from ranweave.transport import (
    CHAT_BASE_URL_ENV,
    AgentRequest,
    HttpChatTransport,
    TransportError,
)


class _FakeResponse(io.BytesIO):
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def test_http_transport_requires_configuration(monkeypatch):
    monkeypatch.delenv(CHAT_BASE_URL_ENV, raising=False)
    with pytest.raises(TransportError, match="no chat endpoint"):
        HttpChatTransport()


def test_http_transport_sends_messages_and_parses_content(monkeypatch):
    captured = {}

    def fake_urlopen(request, timeout):
        captured["url"] = request.full_url
        captured["body"] = json.loads(request.data.decode("utf-8"))
        captured["auth"] = request.headers.get("Authorization")
        payload = {"choices": [{"message": {"content": "{\"ok\": true}"}}]}
        return _FakeResponse(json.dumps(payload).encode("utf-8"))

    monkeypatch.setattr("urllib.request.urlopen", fake_urlopen)
    transport = HttpChatTransport(base_url="http://ric.example/v1", model="gpt-test", api_key="sk-x")
    text = transport.complete(
        AgentRequest(
            role="reasoning",
            messages=(
                {"role": "system", "content": "be useful"},
                {"role": "user", "content": "compose"},
            ),
            payload={},
        )
    )
    assert text == '{"ok": true}'
    assert captured["url"] == "http://ric.example/v1/chat/completions"
    assert captured["body"]["model"] == "gpt-test"
    assert [m["role"] for m in captured["body"]["messages"]] == ["system", "user"]
    assert captured["auth"] == "Bearer sk-x"


def test_http_transport_wraps_protocol_errors(monkeypatch):
    def fake_urlopen(request, timeout):
        return _FakeResponse(b'{"unexpected": "shape"}')

    monkeypatch.setattr("urllib.request.urlopen", fake_urlopen)
    transport = HttpChatTransport(base_url="http://ric.example/v1")
    with pytest.raises(TransportError, match="chat completion failed"):
        transport.complete(AgentRequest(role="reasoning", messages=(), payload={}))


def test_remote_embedder_requires_endpoint(monkeypatch):
    monkeypatch.delenv(EMBED_BASE_URL_ENV, raising=False)
    with pytest.raises(RetrievalUnavailableError):
        RemoteEmbedder()


def test_remote_embedder_normalizes_response(monkeypatch):
    def fake_urlopen(request, timeout):
        body = json.loads(request.data.decode("utf-8"))
        assert body["input"] == ["hello ran"]
        payload = {"data": [{"embedding": [3.0, 4.0]}]}
        return _FakeResponse(json.dumps(payload).encode("utf-8"))

    monkeypatch.setattr("urllib.request.urlopen", fake_urlopen)
    embedder = RemoteEmbedder(base_url="http://embed.example/v1", model="text-embedding-3-small")
    vector = embedder("hello ran")
    assert np.allclose(vector, [0.6, 0.8])


def test_remote_embedder_surfaces_failures(monkeypatch):
    def fake_urlopen(request, timeout):
        return _FakeResponse(b"not json at all")

    monkeypatch.setattr("urllib.request.urlopen", fake_urlopen)
    embedder = RemoteEmbedder(base_url="http://embed.example/v1")
    with pytest.raises(RetrievalUnavailableError, match="embedding request failed"):
        embedder("anything")


def test_prompt_templates_ship_with_versions():
    prompt_dir = resources.files("ranweave").joinpath("prompts")
    for name in ("perception.txt", "reasoning.txt", "refinement.txt", "single_agent.txt"):
        text = prompt_dir.joinpath(name).read_text(encoding="utf-8")
        assert text.splitlines()[0].startswith("# template:")
        assert "version" in text.splitlines()[0]


def test_wire_schemas_are_valid_json():
    schema_dir = resources.files("ranweave").joinpath("prompts", "schemas")
    for name in ("conflict_report.schema.json", "policy.schema.json", "refinement.schema.json"):
        payload = json.loads(schema_dir.joinpath(name).read_text(encoding="utf-8"))
        assert payload["$id"].startswith("ranweave/")
