"""External model adapters speaking line-delimited JSON or HTTP POST.

Wire format (bit-exact):

    request:  {"req_id": str, "role": "summarizer"|"captioner"|"embedder",
               "op": str, "args": {...}}
    response: {"req_id": str, "ok": bool, "result": ..., "error": str?}

Large payloads travel by reference: feature matrices are written as ``.npy``
files into a payload directory and the request carries the path plus its
content digest. Clip files are referenced by path and digest the same way.
Responses are matched to requests by ``req_id``; out-of-order responses are
buffered.
"""

from __future__ import annotations

import json
import select
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import requests

from .._digest import digest_array
from ..errors import BackendError, InvalidInputError

ROLE_SUMMARIZER = "summarizer"
ROLE_CAPTIONER = "captioner"
ROLE_EMBEDDER = "embedder"


@dataclass(frozen=True)
class BackendSpec:
    role: str
    provides_attention: bool = False
    dim: int | None = None


#: Backend ids accepted in run configs; each needs an adapter endpoint.
REGISTERED_BACKENDS: dict[str, BackendSpec] = {
    "casum-summe": BackendSpec(ROLE_SUMMARIZER, provides_attention=True),
    "casum-tvsum": BackendSpec(ROLE_SUMMARIZER, provides_attention=True),
    "llava-onevision-7b-4bit": BackendSpec(ROLE_CAPTIONER),
    "sbert-all-mpnet-base-v2": BackendSpec(ROLE_EMBEDDER, dim=768),
    "simcse-sup-bert-base-uncased": BackendSpec(ROLE_EMBEDDER, dim=768),
}


@dataclass
class AdapterEndpoint:
    """How to reach one adapter process or service."""

    transport: str  # "subprocess" | "http"
    command: Sequence[str] | None = None
    url: str | None = None
    timeout: float = 60.0

    def __post_init__(self):
        if self.transport == "subprocess":
            if not self.command:
                raise InvalidInputError("subprocess endpoint needs a command")
        elif self.transport == "http":
            if not self.url:
                raise InvalidInputError("http endpoint needs a url")
        else:
            raise InvalidInputError(f"unknown transport {self.transport!r}")


class SubprocessTransport:
    """One adapter process; requests as JSON lines on stdin, replies on stdout."""

    def __init__(self, command: Sequence[str], timeout: float = 60.0):
        self.command = list(command)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._pending: dict[str, dict] = {}
        self._lock = threading.Lock()

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
            self._pending.clear()
        return self._proc

    def send(self, request: dict) -> dict:
        with self._lock:
            proc = self._ensure_started()
            req_id = request["req_id"]
            try:
                proc.stdin.write(json.dumps(request) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise TimeoutError(f"adapter pipe closed: {exc}") from exc
            deadline = time.monotonic() + self.timeout
            while True:
                if req_id in self._pending:
                    return self._pending.pop(req_id)
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise TimeoutError(f"no response to {req_id} within {self.timeout}s")
                ready, _, _ = select.select([proc.stdout], [], [], remaining)
                if not ready:
                    raise TimeoutError(f"no response to {req_id} within {self.timeout}s")
                line = proc.stdout.readline()
                if not line:
                    raise TimeoutError("adapter closed its stdout")
                response = json.loads(line)
                if not isinstance(response, dict) or "req_id" not in response:
                    raise ValueError(f"malformed response line: {line!r}")
                self._pending[response["req_id"]] = response

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.terminate()
            self._proc.wait(timeout=5)
        self._proc = None


class HttpTransport:
    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url
        self.timeout = timeout

    def send(self, request: dict) -> dict:
        resp = requests.post(self.url, json=request, timeout=self.timeout)
        resp.raise_for_status()
        return resp.json()

    def close(self):
        pass


def make_transport(endpoint: AdapterEndpoint):
    if endpoint.transport == "subprocess":
        return SubprocessTransport(endpoint.command, endpoint.timeout)
    return HttpTransport(endpoint.url, endpoint.timeout)


@dataclass
class AdapterClient:
    """Issues protocol requests for one backend and validates envelopes."""

    backend_id: str
    transport: Any
    _counter: int = field(default=0, repr=False)

    def call(self, role: str, op: str, args: dict) -> Any:
        self._counter += 1
        req_id = f"{self.backend_id}-{self._counter:06d}"
        request = {
            "req_id": req_id,
            "role": role,
            "op": op,
            "args": {"backend_id": self.backend_id, **args},
        }
        try:
            response = self.transport.send(request)
        except BackendError:
            raise
        except Exception as exc:
            raise BackendError(self.backend_id, f"{op} transport failure: {exc}") from exc
        if not isinstance(response, dict):
            raise BackendError(self.backend_id, f"{op} returned a non-object response")
        if response.get("req_id") != req_id:
            raise BackendError(
                self.backend_id,
                f"{op} response req_id {response.get('req_id')!r} != {req_id!r}",
            )
        if "ok" not in response:
            raise BackendError(self.backend_id, f"{op} response missing 'ok'")
        if not response["ok"]:
            raise BackendError(self.backend_id, f"{op} failed: {response.get('error')}")
        if "result" not in response:
            raise BackendError(self.backend_id, f"{op} ok response missing 'result'")
        return response["result"]

    def close(self):
        self.transport.close()


class _PayloadWriter:
    """Content-addressed ``.npy`` payload files shared with adapters."""

    def __init__(self, payload_dir: Path):
        self.payload_dir = Path(payload_dir)
        self.payload_dir.mkdir(parents=True, exist_ok=True)

    def write_array(self, arr: np.ndarray) -> tuple[str, str]:
        digest = digest_array(arr)
        path = self.payload_dir / f"{digest}.npy"
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            with open(tmp, "wb") as fh:
                np.save(fh, np.ascontiguousarray(arr), allow_pickle=False)
            tmp.rename(path)
        return str(path), digest


class AdapterSummarizer:
    def __init__(
        self,
        backend_id: str,
        client: AdapterClient,
        payload_dir: Path,
        provides_attention: bool = True,
        max_concurrency: int | None = 1,
    ):
        self.id = backend_id
        self.client = client
        self.provides_attention = provides_attention
        self.max_concurrency = max_concurrency
        self._payloads = _PayloadWriter(payload_dir)

    def _call(self, op: str, features: np.ndarray) -> np.ndarray:
        ref, digest = self._payloads.write_array(np.asarray(features, dtype=np.float32))
        result = self.client.call(
            ROLE_SUMMARIZER, op, {"features_ref": ref, "features_digest": digest}
        )
        return np.asarray(result, dtype=np.float64)

    def score_frames(self, features: np.ndarray) -> np.ndarray:
        return self._call("score_frames", features)

    def attention_signal(self, features: np.ndarray) -> np.ndarray:
        return self._call("attention_signal", features)


class AdapterCaptioner:
    def __init__(self, backend_id: str, client: AdapterClient, temperature: float = 0.0,
                 max_concurrency: int | None = 1):
        self.id = backend_id
        self.client = client
        self.temperature = temperature
        self.max_concurrency = max_concurrency

    def caption_clip(self, clip, prompt: str) -> str:
        result = self.client.call(
            ROLE_CAPTIONER,
            "caption_clip",
            {
                "clip_ref": str(clip.path) if clip.path else None,
                "clip_digest": clip.digest,
                "prompt": prompt,
                "temperature": self.temperature,
            },
        )
        return result

    def summarize_texts(self, descriptions: Sequence[str], prompt: str) -> str:
        return self.client.call(
            ROLE_CAPTIONER,
            "summarize_texts",
            {
                "descriptions": list(descriptions),
                "prompt": prompt,
                "temperature": self.temperature,
            },
        )


class AdapterEmbedder:
    def __init__(self, backend_id: str, client: AdapterClient, dim: int,
                 max_concurrency: int | None = 1):
        self.id = backend_id
        self.client = client
        self.dim = dim
        self.max_concurrency = max_concurrency

    def embed(self, text: str) -> np.ndarray:
        result = self.client.call(ROLE_EMBEDDER, "embed_text", {"text": text})
        return np.asarray(result, dtype=np.float64)
