from __future__ import annotations

import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest

from vsxplain.backends import base
from vsxplain.backends.adapter import (
    REGISTERED_BACKENDS,
    AdapterCaptioner,
    AdapterClient,
    AdapterEmbedder,
    AdapterEndpoint,
    AdapterSummarizer,
    make_transport,
)
from vsxplain.errors import BackendError, InvalidInputError

FAKE_ADAPTER = Path(__file__).parent / "fake_adapter.py"


def _subprocess_client(backend_id: str, mode: str = "ok", timeout: float = 10.0):
    endpoint = AdapterEndpoint(
        transport="subprocess",
        command=[sys.executable, str(FAKE_ADAPTER), mode],
        timeout=timeout,
    )
    return AdapterClient(backend_id, make_transport(endpoint))


@pytest.fixture
def features(rng):
    return rng.normal(size=(12, 6)).astype(np.float64)


class TestSubprocessProtocol:
    def test_score_frames_roundtrip(self, tmp_path, features):
        client = _subprocess_client("casum-tvsum")
        backend = AdapterSummarizer("casum-tvsum", client, payload_dir=tmp_path)
        try:
            scores = base.score_frames(backend, features)
            assert len(scores) == 12
            assert np.all(scores.scores >= 0) and np.all(scores.scores <= 1)
        finally:
            client.close()

    def test_attention_roundtrip(self, tmp_path, features):
        client = _subprocess_client("casum-summe")
        backend = AdapterSummarizer("casum-summe", client, payload_dir=tmp_path)
        try:
            att = base.attention_signal(backend, features)
            assert att.shape == (12,)
        finally:
            client.close()

    def test_caption_and_merge(self, tmp_path):
        client = _subprocess_client("llava-onevision-7b-4bit")
        backend = AdapterCaptioner("llava-onevision-7b-4bit", client)

        class Clip:
            digest = "ab" * 32
            path = tmp_path / "clip.avi"
            frame_digests = ("cd" * 32,)
            frame_count = 1

        try:
            artifact = base.caption_clip(
                backend, Clip(), "Describe the video.", prompt_id="describe_v1"
            )
            assert artifact.text.startswith("FAKE(abababab)")
            merged = base.summarize_texts(
                backend, ["one", "two"], "merge", prompt_id="merge_v1"
            )
            assert merged.text == "FAKE-MERGE: one | two"
        finally:
            client.close()

    def test_embed_roundtrip(self):
        client = _subprocess_client("custom-embedder")
        backend = AdapterEmbedder("custom-embedder", client, dim=8)
        try:
            vec = base.embed_text(backend, "hello")
            assert vec.shape == (8,)
            again = base.embed_text(backend, "hello")
            assert np.array_equal(vec, again)
        finally:
            client.close()

    def test_unknown_op_surfaces_backend_error(self):
        client = _subprocess_client("x")
        try:
            with pytest.raises(BackendError, match="unknown op"):
                client.call("embedder", "do_magic", {})
        finally:
            client.close()

    def test_out_of_order_responses_are_buffered(self):
        client = _subprocess_client("x", mode="prelude")
        try:
            result = client.call("embedder", "embed_text", {"text": "hi"})
            assert len(result) == 8
        finally:
            client.close()

    def test_timeout_becomes_backend_error(self):
        client = _subprocess_client("x", mode="sleepy", timeout=0.4)
        try:
            with pytest.raises(BackendError, match="transport failure"):
                client.call("embedder", "embed_text", {"text": "hi"})
        finally:
            client.close()

    def test_garbage_output_becomes_backend_error(self):
        client = _subprocess_client("x", mode="garbage", timeout=2.0)
        try:
            with pytest.raises(BackendError, match="transport failure"):
                client.call("embedder", "embed_text", {"text": "hi"})
        finally:
            client.close()

    def test_envelope_is_bit_exact(self, tmp_path, features):
        # the fake adapter rejects any request whose keys differ from the
        # documented envelope, so a working call proves the format
        client = _subprocess_client("casum-tvsum")
        backend = AdapterSummarizer("casum-tvsum", client, payload_dir=tmp_path)
        try:
            base.score_frames(backend, features)
        finally:
            client.close()


class _HttpHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers["Content-Length"])
        request = json.loads(self.rfile.read(length))
        if request["op"] == "embed_text":
            payload = {
                "req_id": request["req_id"],
                "ok": True,
                "result": [1.0, 2.0, 3.0],
            }
        else:
            payload = {
                "req_id": request["req_id"],
                "ok": False,
                "error": "unsupported",
            }
        body = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _HttpHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/"
    server.shutdown()


class TestHttpProtocol:
    def test_embed_roundtrip(self, http_server):
        endpoint = AdapterEndpoint(transport="http", url=http_server, timeout=5.0)
        client = AdapterClient("http-embedder", make_transport(endpoint))
        backend = AdapterEmbedder("http-embedder", client, dim=3)
        assert base.embed_text(backend, "hi").tolist() == [1.0, 2.0, 3.0]

    def test_error_response(self, http_server):
        endpoint = AdapterEndpoint(transport="http", url=http_server, timeout=5.0)
        client = AdapterClient("http-x", make_transport(endpoint))
        with pytest.raises(BackendError, match="unsupported"):
            client.call("captioner", "caption_clip", {})


class TestEndpointValidation:
    def test_subprocess_needs_command(self):
        with pytest.raises(InvalidInputError):
            AdapterEndpoint(transport="subprocess")

    def test_http_needs_url(self):
        with pytest.raises(InvalidInputError):
            AdapterEndpoint(transport="http")

    def test_unknown_transport(self):
        with pytest.raises(InvalidInputError):
            AdapterEndpoint(transport="carrier-pigeon")


class TestRegistry:
    def test_known_backend_ids_and_roles(self):
        assert REGISTERED_BACKENDS["casum-summe"].role == "summarizer"
        assert REGISTERED_BACKENDS["casum-tvsum"].provides_attention
        assert REGISTERED_BACKENDS["llava-onevision-7b-4bit"].role == "captioner"
        assert REGISTERED_BACKENDS["sbert-all-mpnet-base-v2"].dim == 768
        assert REGISTERED_BACKENDS["simcse-sup-bert-base-uncased"].role == "embedder"
