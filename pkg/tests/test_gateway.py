"""
Tests for the model gateway client against a stub server.
"""

import socket

import pytest

from src.config.schema import GatewayConfig
from src.errors import GatewayError, ProtocolError
from src.interact.gateway import GatewayClient


def unused_port():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class TestVerbs:
    """Test the four gateway verbs."""

    def test_generate(self, stub_gateway):
        """Test the generate verb."""
        client = GatewayClient(stub_gateway.config())
        assert client.generate("Query: q Facet: f", 0.95) == "do you want to know about f?"

    def test_answer(self, stub_gateway):
        """Test the answer verb."""
        assert GatewayClient(stub_gateway.config()).answer("Query: q Intent: i Question: c") == "yes"

    def test_embed(self, stub_gateway):
        """Test the embed verb."""
        vectors = GatewayClient(stub_gateway.config()).embed(["one", "two"])
        assert len(vectors) == 2
        assert stub_gateway.requests["embed"] == [{"texts": ["one", "two"]}]

    def test_score(self, stub_gateway):
        """Test the score verb."""
        assert GatewayClient(stub_gateway.config()).score("Query: q Document: d") == -0.5


class TestProtocolErrors:
    """Test that malformed gateway answers are rejected."""

    @pytest.mark.parametrize("body", [
        {"logprob_true": 0.5},
        {"logprob_true": "low"},
        {"logprob_true": True},
        {"logprob_true": None},
        {"score": -1.0},
    ])
    def test_score_rejects(self, stub_gateway, body):
        """Test that the score must be a number no greater than zero."""
        stub_gateway.handlers["score"] = lambda payload: (200, body)
        with pytest.raises(ProtocolError):
            GatewayClient(stub_gateway.config()).score("Query: q Document: d")

    def test_score_zero_allowed(self, stub_gateway):
        """Test that log p = 0 is a valid certainty."""
        stub_gateway.handlers["score"] = lambda payload: (200, {"logprob_true": 0})
        assert GatewayClient(stub_gateway.config()).score("Query: q Document: d") == 0.0

    def test_not_json(self, stub_gateway):
        """Test that a non-JSON body is a protocol error."""
        stub_gateway.handlers["answer"] = lambda payload: (200, b"<html>")
        with pytest.raises(ProtocolError):
            GatewayClient(stub_gateway.config()).answer("x")

    def test_not_object(self, stub_gateway):
        """Test that a JSON body must be an object."""
        stub_gateway.handlers["answer"] = lambda payload: (200, b"[1, 2]")
        with pytest.raises(ProtocolError):
            GatewayClient(stub_gateway.config()).answer("x")

    def test_text_not_string(self, stub_gateway):
        """Test that text fields must be strings."""
        stub_gateway.handlers["generate"] = lambda payload: (200, {"text": 3})
        with pytest.raises(ProtocolError):
            GatewayClient(stub_gateway.config()).generate("x", 0.95)

    def test_vectors_not_lists(self, stub_gateway):
        """Test that embed vectors must be lists."""
        stub_gateway.handlers["embed"] = lambda payload: (200, {"vectors": [1.0, 2.0]})
        with pytest.raises(ProtocolError):
            GatewayClient(stub_gateway.config()).embed(["x"])


class TestTransport:
    """Test HTTP failures and retries."""

    def test_http_error(self, stub_gateway):
        """Test that a non-2xx answer is a gateway error carrying status and message."""
        stub_gateway.handlers["score"] = lambda payload: (400, {"error": "bad prompt"})
        with pytest.raises(GatewayError) as excinfo:
            GatewayClient(stub_gateway.config()).score("x")
        assert excinfo.value.status == 400
        assert "bad prompt" in str(excinfo.value)
        assert len(stub_gateway.requests["score"]) == 1

    def test_retries_then_succeeds(self, stub_gateway):
        """Test that transient 503s are retried."""
        calls = []

        def flaky(payload):
            calls.append(payload)
            if len(calls) < 3:
                return 503, {"error": "busy"}
            return 200, {"text": "no"}

        stub_gateway.handlers["answer"] = flaky
        client = GatewayClient(stub_gateway.config(retries=2))
        assert client.answer("x") == "no"
        assert len(calls) == 3

    def test_retries_exhausted(self, stub_gateway):
        """Test that the final status is reported after the retries run out."""
        stub_gateway.handlers["answer"] = lambda payload: (503, {"error": "busy"})
        with pytest.raises(GatewayError) as excinfo:
            GatewayClient(stub_gateway.config(retries=2)).answer("x")
        assert excinfo.value.status == 503
        assert len(stub_gateway.requests["answer"]) == 3

    def test_connection_refused(self):
        """Test that an unreachable gateway is a gateway error."""
        config = GatewayConfig(url=f"http://127.0.0.1:{unused_port()}", retries=0, timeout_ms=1000)
        with pytest.raises(GatewayError):
            GatewayClient(config).answer("x")

    def test_trailing_slash_in_url(self, stub_gateway):
        """Test that a trailing slash in the base URL is tolerated."""
        client = GatewayClient(stub_gateway.config(url=stub_gateway.url + "/"))
        client.answer("x")
        assert len(stub_gateway.requests["answer"]) == 1


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
