"""
Verifier server and prover client speaking newline-delimited JSON.

One authentication per connection::

    prover -> {"type":"auth_request","id":...}
    verifier <- {"type":"challenge","record_index":i,"challenge":{...}}
    prover -> {"type":"response","record_index":i,"bits":"0110..."}
    verifier <- {"type":"result","accept":...,"distance":...,"threshold":...}

The challenged record is burned and persisted before the challenge is sent.
"""
from __future__ import annotations

import asyncio
import json
import logging
import socket
import threading
from dataclasses import dataclass
from pathlib import Path

from .authn import AuthOutcome, CrpDatabase
from .core import Challenge, bits_to_str, evaluate, str_to_bits
from .errors import DimensionError, ExhaustedError, NotFoundError, PufkitError
from .oscillator import Environment, PufInstance

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 5.0
MAX_LINE = 1 << 20


class TransportError(PufkitError):
    """The connection failed, timed out, or the peer broke framing."""


class ServerError(PufkitError):
    """The verifier answered with an error message."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


def encode_message(message: dict) -> bytes:
    return json.dumps(message, separators=(",", ":")).encode("utf-8") + b"\n"


def decode_message(line: bytes) -> dict:
    message = json.loads(line.decode("utf-8"))
    if not isinstance(message, dict) or not isinstance(message.get("type"), str):
        raise ValueError("message must be a JSON object with a string 'type'")
    return message


def _error(code: str, detail: str) -> dict:
    return {"type": "error", "code": code, "detail": detail}


@dataclass
class SessionState:
    state: str = "awaiting_request"
    entity_id: str | None = None
    record_index: int | None = None

    _NEXT = {"awaiting_request": "challenged", "challenged": "done"}

    def advance(self, to: str) -> None:
        if self._NEXT.get(self.state) != to:
            raise RuntimeError(f"illegal session transition {self.state} -> {to}")
        self.state = to


class VerifierServer:
    """Asyncio verifier bound to a CRP database file.

    ``start()`` runs the event loop on a background thread and returns the
    bound ``(host, port)``; ``serve_forever()`` blocks the calling thread.
    """

    def __init__(
        self,
        db: CrpDatabase | str | Path,
        host: str = "127.0.0.1",
        port: int = 0,
        threshold: int | None = None,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        self.db = db if isinstance(db, CrpDatabase) else CrpDatabase.load(db)
        if threshold is not None:
            self.db.threshold = threshold
        self.host, self.port = host, port
        self.timeout = timeout
        self._loop: asyncio.AbstractEventLoop | None = None
        self._server: asyncio.AbstractServer | None = None
        self._thread: threading.Thread | None = None
        self._ready = threading.Event()

    @property
    def address(self) -> tuple[str, int]:
        return self.host, self.port

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        session = SessionState()
        peer = writer.get_extra_info("peername")
        try:
            reply = await self._request(reader, session)
            if reply is not None:
                writer.write(encode_message(reply))
                await writer.drain()
            if session.state == "challenged":
                writer.write(encode_message(await self._response(reader, session)))
                await writer.drain()
        except asyncio.TimeoutError:
            log.info("session %s timed out in state %s", peer, session.state)
        except (ConnectionError, asyncio.IncompleteReadError):
            log.info("session %s dropped in state %s", peer, session.state)
        except _Reject as exc:
            try:
                writer.write(encode_message(exc.message))
                await writer.drain()
            except ConnectionError:
                pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionError:
                pass

    async def _read(self, reader: asyncio.StreamReader) -> dict | None:
        try:
            line = await asyncio.wait_for(reader.readline(), self.timeout)
        except ValueError:
            raise _Reject(_error("bad_message", "line too long")) from None
        if not line:
            return None
        if not line.endswith(b"\n"):
            raise _Reject(_error("bad_message", "unterminated line"))
        try:
            return decode_message(line)
        except (ValueError, UnicodeDecodeError) as exc:
            raise _Reject(_error("bad_message", str(exc))) from None

    async def _request(self, reader, session: SessionState) -> dict | None:
        message = await self._read(reader)
        if message is None:
            return None
        if message["type"] != "auth_request" or not isinstance(message.get("id"), str):
            raise _Reject(_error("bad_message", f"expected auth_request, got {message['type']!r}"))
        entity_id = message["id"]
        try:
            challenge, index = self.db.issue_challenge(entity_id)
        except NotFoundError:
            raise _Reject(_error("unknown_id", f"no entity {entity_id!r}")) from None
        except ExhaustedError:
            raise _Reject(_error("exhausted", f"no unused CRPs left for {entity_id!r}")) from None
        session.entity_id, session.record_index = entity_id, index
        session.advance("challenged")
        return {"type": "challenge", "record_index": index, "challenge": challenge.to_dict()}

    async def _response(self, reader, session: SessionState) -> dict:
        message = await self._read(reader)
        if message is None:
            raise ConnectionError("prover closed before responding")
        if (
            message["type"] != "response"
            or message.get("record_index") != session.record_index
            or not isinstance(message.get("bits"), str)
        ):
            raise _Reject(_error("bad_message", "expected response for the issued record"))
        try:
            outcome = self.db.verify_response(session.entity_id, session.record_index, str_to_bits(message["bits"]))
        except DimensionError as exc:
            raise _Reject(_error("bad_message", str(exc))) from None
        session.advance("done")
        log.info("%s record %d: distance %d, accept=%s", session.entity_id, outcome.record_index, outcome.distance, outcome.accept)
        return {"type": "result", "accept": outcome.accept, "distance": outcome.distance, "threshold": outcome.threshold}

    async def _main(self) -> None:
        self._server = await asyncio.start_server(self._handle, self.host, self.port, limit=MAX_LINE)
        self.port = self._server.sockets[0].getsockname()[1]
        self._ready.set()
        async with self._server:
            try:
                await self._server.serve_forever()
            except asyncio.CancelledError:
                pass
        pending = [t for t in asyncio.all_tasks() if t is not asyncio.current_task()]
        for task in pending:
            task.cancel()
        await asyncio.gather(*pending, return_exceptions=True)

    def serve_forever(self) -> None:
        self._loop = asyncio.new_event_loop()
        try:
            self._loop.run_until_complete(self._main())
        finally:
            self._loop.close()

    def start(self) -> tuple[str, int]:
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        if not self._ready.wait(5):
            raise TransportError("verifier failed to start")
        return self.address

    def join(self) -> None:
        if self._thread is not None:
            self._thread.join()

    def stop(self) -> None:
        if self._loop is not None and self._server is not None and not self._loop.is_closed():
            try:
                self._loop.call_soon_threadsafe(self._server.close)
            except RuntimeError:
                pass  # loop closed concurrently
        if self._thread is not None:
            self._thread.join(5)

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()


class _Reject(Exception):
    def __init__(self, message: dict):
        super().__init__(message["code"])
        self.message = message


def serve_verifier(listen_address: tuple[str, int], db_path: str | Path, threshold: int | None = None, timeout: float = DEFAULT_TIMEOUT) -> None:
    host, port = listen_address
    VerifierServer(db_path, host, port, threshold, timeout).serve_forever()


def parse_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {text!r}")
    return host, int(port)


class _Connection:
    def __init__(self, address: tuple[str, int], timeout: float):
        try:
            self.sock = socket.create_connection(address, timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {address[0]}:{address[1]}: {exc}") from exc
        self.file = self.sock.makefile("rb")

    def send(self, message: dict) -> None:
        try:
            self.sock.sendall(encode_message(message))
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def receive(self) -> dict:
        try:
            line = self.file.readline(MAX_LINE)
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from exc
        if not line.endswith(b"\n"):
            raise TransportError("connection closed by verifier")
        try:
            message = decode_message(line)
        except (ValueError, UnicodeDecodeError) as exc:
            raise TransportError(f"malformed message from verifier: {exc}") from exc
        if message["type"] == "error":
            raise ServerError(str(message.get("code")), str(message.get("detail", "")))
        return message

    def close(self) -> None:
        self.file.close()
        self.sock.close()


def run_prover(
    server_address: tuple[str, int],
    entity_id: str,
    instance: PufInstance,
    env: Environment | None = None,
    measurement_index: int = 0,
    timeout: float = DEFAULT_TIMEOUT,
) -> AuthOutcome:
    """Authenticate ``instance`` as ``entity_id`` with one noisy measurement.

    Raises ``TransportError`` for connection problems and ``ServerError`` for
    verifier-reported errors; a rejection is a normal outcome.
    """
    conn = _Connection(server_address, timeout)
    try:
        conn.send({"type": "auth_request", "id": entity_id})
        message = conn.receive()
        if message["type"] != "challenge":
            raise TransportError(f"expected challenge, got {message['type']!r}")
        try:
            challenge = Challenge.from_dict(message["challenge"])
            index = int(message["record_index"])
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed challenge: {exc}") from exc
        response = evaluate(instance, challenge, env, measurement_index)
        conn.send({"type": "response", "record_index": index, "bits": bits_to_str(response.bits)})
        result = conn.receive()
        if result["type"] != "result":
            raise TransportError(f"expected result, got {result['type']!r}")
        return AuthOutcome(bool(result["accept"]), int(result["distance"]), int(result["threshold"]), index)
    finally:
        conn.close()
