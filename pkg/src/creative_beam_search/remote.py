"""Remote log-probability backend: HTTP client and a loopback reference server.

Wire format (JSON):
    GET  /v1/vocab     -> {"tokens": [str, ...], "bos": int, "eos": int}
    POST /v1/logprobs  {"prefix": [int, ...]} -> {"logprobs": [float, ...]}

Log-probabilities travel as decimal text (Python float repr), so a value
round-trips bit-exact; zero probability is the JSON extension literal
``-Infinity``, which json.loads parses back to -inf.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Sequence

import requests

from .model import LanguageModel, Vocabulary


class RemoteTransportError(RuntimeError):
    """Connection-level failure (timeout, refused, reset). Safe to retry."""


class RemoteProtocolError(RuntimeError):
    """The server answered, but not with a valid protocol response."""


class RemoteLM(LanguageModel):
    """Language model proxied over the logprobs protocol.

    The vocabulary is mirrored from the server handshake at construction;
    every response is validated against it. Requests are idempotent, so
    callers may retry RemoteTransportError freely.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()
        handshake = self._get_json(f"{self.endpoint}/v1/vocab")
        try:
            self.vocabulary = Vocabulary(
                tokens=tuple(handshake["tokens"]),
                bos=int(handshake["bos"]),
                eos=int(handshake["eos"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RemoteProtocolError(f"bad handshake payload: {exc}") from exc

    def _get_json(self, url: str) -> dict:
        try:
            response = self._session.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise RemoteTransportError(f"GET {url} failed: {exc}") from exc
        return self._decode(response)

    def _post_json(self, url: str, body: dict) -> dict:
        try:
            response = self._session.post(url, json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise RemoteTransportError(f"POST {url} failed: {exc}") from exc
        return self._decode(response)

    @staticmethod
    def _decode(response: requests.Response) -> dict:
        if response.status_code != 200:
            raise RemoteProtocolError(
                f"server returned {response.status_code}: {response.text[:200]}"
            )
        try:
            payload = json.loads(response.text)
        except json.JSONDecodeError as exc:
            raise RemoteProtocolError(f"unparseable response body: {exc}") from exc
        if not isinstance(payload, dict):
            raise RemoteProtocolError(f"expected a JSON object, got {type(payload).__name__}")
        return payload

    def next_logprobs(self, prefix: Sequence[int]) -> list[float]:
        self._check_prefix(prefix)
        payload = self._post_json(f"{self.endpoint}/v1/logprobs", {"prefix": list(prefix)})
        try:
            logprobs = [float(x) for x in payload["logprobs"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise RemoteProtocolError(f"bad logprobs payload: {exc}") from exc
        if len(logprobs) != len(self.vocabulary):
            raise RemoteProtocolError(
                f"expected {len(self.vocabulary)} logprobs, got {len(logprobs)}"
            )
        return logprobs


class _LogprobHandler(BaseHTTPRequestHandler):
    model: LanguageModel  # set on the handler subclass by LogprobServer

    def log_message(self, *args):  # silence per-request stderr noise
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, allow_nan=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path != "/v1/vocab":
            self._send(404, {"error": "not found"})
            return
        vocab = self.model.vocabulary
        self._send(200, {"tokens": list(vocab.tokens), "bos": vocab.bos, "eos": vocab.eos})

    def do_POST(self):
        if self.path != "/v1/logprobs":
            self._send(404, {"error": "not found"})
            return
        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.loads(self.rfile.read(length))
            prefix = [int(i) for i in body["prefix"]]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            self._send(400, {"error": f"bad request: {exc}"})
            return
        try:
            logprobs = self.model.next_logprobs(prefix)
        except ValueError as exc:
            self._send(400, {"error": str(exc)})
            return
        self._send(200, {"logprobs": logprobs})


class LogprobServer:
    """Serve any local LanguageModel over the logprobs protocol.

    Threaded, so concurrent clients are fine (models are immutable after
    construction). Binds port 0 by default and reports the actual port.
    """

    def __init__(self, model: LanguageModel, host: str = "127.0.0.1", port: int = 0):
        handler = type("Handler", (_LogprobHandler,), {"model": model})
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "LogprobServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self) -> "LogprobServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
