"""Request/response transports shared by every external model role.

Both transports speak the same JSON objects.  Every request carries a string ``id`` and
every response must echo it; anything else is rejected as an :class:`AdapterError`.
"""

from __future__ import annotations

import base64
import itertools
import json
import logging
import subprocess
import threading
import urllib.error
import urllib.request
from collections import deque
from concurrent.futures import Future, TimeoutError as FutureTimeout
from typing import Any, Sequence

from ..errors import AdapterError, TransientAdapterError
from ..imagery import Raster

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0
DEFAULT_RETRIES = 2
DEFAULT_MAX_IN_FLIGHT = 4


def encode_image(image: Raster) -> str:
    return base64.b64encode(image.to_png_bytes()).decode("ascii")


def decode_image(data: str) -> Raster:
    try:
        return Raster.from_png(base64.b64decode(data, validate=True))
    except Exception as exc:  # Pillow raises a zoo of types on bad input
        raise AdapterError(f"undecodable image payload: {exc}", payload=data[:64]) from exc


class Transport:
    """Base: id assignment, bounded concurrency and retries around ``_exchange``."""

    role = "endpoint"

    def __init__(self, timeout: float = DEFAULT_TIMEOUT, retries: int = DEFAULT_RETRIES,
                 max_in_flight: int = DEFAULT_MAX_IN_FLIGHT):
        self.timeout = timeout
        self.retries = retries
        self._slots = threading.BoundedSemaphore(max(1, max_in_flight))
        self._ids = itertools.count(1)
        self._id_lock = threading.Lock()

    def _next_id(self) -> str:
        with self._id_lock:
            return f"r{next(self._ids)}"

    def request(self, payload: dict[str, Any]) -> dict[str, Any]:
        """Send ``payload`` (without id) and return the matching response object."""
        last: TransientAdapterError | None = None
        for attempt in range(self.retries + 1):
            req_id = self._next_id()
            message = dict(payload, id=req_id)
            with self._slots:
                try:
                    response = self._exchange(req_id, message)
                except TransientAdapterError as exc:
                    last = exc
                    log.warning("%s request %s failed (attempt %d): %s", self.role, req_id, attempt + 1, exc)
                    continue
            if not isinstance(response, dict) or response.get("id") != req_id:
                # a mis-correlated answer is a protocol violation, never retried
                raise AdapterError(f"response id {response.get('id') if isinstance(response, dict) else None!r} "
                                   f"does not match request id {req_id!r}", payload=response, role=self.role)
            if "error" in response:
                raise AdapterError(f"endpoint reported error: {response['error']}", payload=response, role=self.role)
            return response
        assert last is not None
        raise TransientAdapterError(f"{self.role} unavailable after {self.retries + 1} attempts: {last}",
                                    payload=last.payload, role=self.role)

    def _exchange(self, req_id: str, message: dict[str, Any]) -> Any:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class JsonLinesTransport(Transport):
    """A child process reading one JSON request per stdin line and answering on stdout.

    Responses may arrive in any order; a reader thread routes them to waiting
    requests by id.  The child is (re)started lazily.
    """

    def __init__(self, command: Sequence[str], role: str = "endpoint", **kwargs):
        super().__init__(**kwargs)
        self.command = list(command)
        self.role = role
        self._proc: subprocess.Popen | None = None
        self._pending: dict[str, Future] = {}
        self._lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._stderr_tail: deque[str] = deque(maxlen=20)

    def _ensure_started(self) -> subprocess.Popen:
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                return self._proc
            try:
                self._proc = subprocess.Popen(
                    self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                    stderr=subprocess.PIPE, text=True, bufsize=1,
                )
            except OSError as exc:
                raise TransientAdapterError(f"cannot start {self.command[0]!r}: {exc}", role=self.role) from exc
            proc = self._proc
        threading.Thread(target=self._read_loop, args=(proc,), daemon=True).start()
        threading.Thread(target=self._stderr_loop, args=(proc,), daemon=True).start()
        return proc

    def _read_loop(self, proc: subprocess.Popen) -> None:
        for line in proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError:
                self._fail_all(AdapterError("malformed response line", payload=line, role=self.role))
                continue
            msg_id = msg.get("id") if isinstance(msg, dict) else None
            if not isinstance(msg_id, str):
                self._fail_all(AdapterError("response without a string id", payload=msg, role=self.role))
                continue
            with self._lock:
                fut = self._pending.pop(msg_id, None)
            if fut is None:
                log.warning("%s: dropping response for unknown id %r", self.role, msg_id)
            else:
                fut.set_result(msg)
        tail = " | ".join(self._stderr_tail)
        self._fail_all(TransientAdapterError(f"{self.role} process exited; stderr: {tail}", role=self.role))

    def _stderr_loop(self, proc: subprocess.Popen) -> None:
        for line in proc.stderr:
            self._stderr_tail.append(line.rstrip())

    def _fail_all(self, exc: AdapterError) -> None:
        # the offending line cannot be attributed to one request, so every waiter fails
        with self._lock:
            pending, self._pending = self._pending, {}
        for fut in pending.values():
            if not fut.done():
                fut.set_exception(exc)

    def _exchange(self, req_id: str, message: dict[str, Any]) -> Any:
        proc = self._ensure_started()
        fut: Future = Future()
        with self._lock:
            self._pending[req_id] = fut
        try:
            with self._write_lock:
                proc.stdin.write(json.dumps(message) + "\n")
                proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            with self._lock:
                self._pending.pop(req_id, None)
            raise TransientAdapterError(f"cannot write to {self.role} process: {exc}", role=self.role) from exc
        try:
            return fut.result(timeout=self.timeout)
        except FutureTimeout:
            with self._lock:
                self._pending.pop(req_id, None)
            raise TransientAdapterError(f"{self.role} timed out after {self.timeout}s", role=self.role) from None

    def close(self) -> None:
        with self._lock:
            proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()


class HttpTransport(Transport):
    """HTTP POST of the JSON request to ``url``; the body of the reply is the response."""

    def __init__(self, url: str, role: str = "endpoint", **kwargs):
        super().__init__(**kwargs)
        self.url = url
        self.role = role

    def _exchange(self, req_id: str, message: dict[str, Any]) -> Any:
        body = json.dumps(message).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                raw = resp.read()
        except (urllib.error.URLError, OSError) as exc:
            raise TransientAdapterError(f"POST {self.url} failed: {exc}", role=self.role) from exc
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise AdapterError("malformed JSON response", payload=raw[:200], role=self.role) from exc
