"""Networked demo authentication: framed verifier service and prover client.

One handshake per TCP connection:

    client HELLO(identity) -> [client BLIND(B) if the protocol is blinded]
    -> server CHALLENGE(A) -> client RESPONSE(z) -> server DECISION

Frames are a 1-byte type tag plus a 32-bit big-endian payload length.
Payloads reuse the text serializations from :mod:`gf2core`, so sessions log
in exactly the transcript file format.  The verifier never sends secrets or
noise; only the prover ever adds noise.
"""

from __future__ import annotations

import socket
import socketserver
import threading
from dataclasses import dataclass

import numpy as np

from .gf2core import (
    DimensionError,
    FormatError,
    ParameterError,
    RandomSource,
    as_bits,
    dump_bits,
    dump_matrix,
    load_bits,
    load_matrix,
)
from .nlfunc import format_spec, parse_spec
from .protocols import (
    ProtocolParams,
    SecretKey,
    SessionTranscript,
    expected_response,
    format_transcript,
    verify,
)

HELLO, BLIND, CHALLENGE, RESPONSE, DECISION, ERROR = 1, 2, 3, 4, 5, 6
_TAG_NAMES = {1: "HELLO", 2: "BLIND", 3: "CHALLENGE", 4: "RESPONSE", 5: "DECISION", 6: "ERROR"}
MAX_PAYLOAD = 16 * 1024 * 1024


class ServiceError(Exception):
    """Transport- or handshake-level failure on the client side."""


class FramingError(ServiceError):
    """Stream ended mid-frame or carried an undecodable frame."""


class OversizeError(FramingError):
    """Declared payload length beyond the 16 MiB cap; the connection drops."""


class RemoteError(ServiceError):
    """The peer reported a protocol problem in an ERROR frame."""


# ---------------------------------------------------------------------------
# frame codec
# ---------------------------------------------------------------------------

def encode_frame(tag: int, payload: bytes) -> bytes:
    if tag not in _TAG_NAMES:
        raise ParameterError("unknown frame tag %d" % tag)
    if len(payload) > MAX_PAYLOAD:
        raise ParameterError("payload exceeds the 16 MiB frame limit")
    return bytes([tag]) + len(payload).to_bytes(4, "big") + payload


def _recv_exact(sock: socket.socket, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining:
        piece = sock.recv(min(remaining, 65536))
        if not piece:
            raise FramingError("connection closed mid-frame (%d bytes short)" % remaining)
        chunks.append(piece)
        remaining -= len(piece)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> tuple[int, bytes]:
    """Read one frame; oversize length fields abort the connection."""
    header = _recv_exact(sock, 5)
    tag = header[0]
    length = int.from_bytes(header[1:5], "big")
    if tag not in _TAG_NAMES:
        raise FramingError("unknown frame tag %d" % tag)
    if length > MAX_PAYLOAD:
        raise OversizeError("declared payload of %d bytes exceeds the 16 MiB limit" % length)
    return tag, _recv_exact(sock, length)


def _send(sock: socket.socket, tag: int, payload: bytes, log=None) -> None:
    sock.sendall(encode_frame(tag, payload))
    if log is not None:
        log.append((tag, payload))


def _expect(sock: socket.socket, tag: int, log=None) -> bytes:
    got, payload = read_frame(sock)
    if log is not None:
        log.append((got, payload))
    if got == ERROR:
        raise RemoteError(payload.decode("utf-8", "replace"))
    if got != tag:
        raise ServiceError(
            "expected %s frame, got %s" % (_TAG_NAMES[tag], _TAG_NAMES[got])
        )
    return payload


# ---------------------------------------------------------------------------
# keystore
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KeystoreEntry:
    identity: str
    params: ProtocolParams
    key: SecretKey


def _key_to_hex(bits) -> str:
    return np.packbits(as_bits(bits)).tobytes().hex()


def _key_from_hex(text: str, k: int) -> np.ndarray:
    try:
        raw = bytes.fromhex(text.strip())
    except ValueError:
        raise FormatError("invalid hex key %r" % text)
    if len(raw) != (k + 7) // 8:
        raise FormatError("hex key holds %d bytes, expected %d for k=%d" % (len(raw), (k + 7) // 8, k))
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    if bits[k:].any():
        raise FormatError("hex key has nonzero padding past k=%d bits" % k)
    return bits[:k].copy()


def format_keystore_entry(entry: KeystoreEntry) -> str:
    p = entry.params
    lines = [
        "identity=%s" % entry.identity,
        "proto=%s" % p.proto,
        "k=%d" % p.k,
        "n=%d" % p.n,
        "eps=%s" % p.eps,
        "epsp=%s" % p.eps_prime,
        "spec=%s" % format_spec(p.spec),
        "s1=%s" % _key_to_hex(entry.key.s1),
    ]
    if p.blinded:
        lines.append("s2=%s" % _key_to_hex(entry.key.s2))
    return "\n".join(lines) + "\n"


def write_keystore(path, entries) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        fp.write("\n".join(format_keystore_entry(e) for e in entries))


def parse_keystore(text: str) -> dict[str, KeystoreEntry]:
    entries: dict[str, KeystoreEntry] = {}
    for chunk in text.split("\n\n"):
        if not chunk.strip():
            continue
        fields: dict[str, str] = {}
        for raw in chunk.splitlines():
            raw = raw.strip()
            if not raw or raw.startswith("#"):
                continue
            if "=" not in raw:
                raise FormatError("keystore line %r is not key=value" % raw)
            key, value = raw.split("=", 1)
            fields[key.strip()] = value.strip()
        missing = {"identity", "proto", "k", "n", "eps", "epsp", "spec", "s1"} - fields.keys()
        if missing:
            raise FormatError("keystore entry missing %s" % ", ".join(sorted(missing)))
        params = ProtocolParams(
            proto=fields["proto"],
            k=int(fields["k"]),
            n=int(fields["n"]),
            eps=fields["eps"],
            eps_prime=fields["epsp"],
            spec=parse_spec(fields["spec"]),
        )
        s1 = _key_from_hex(fields["s1"], params.k)
        s2 = None
        if params.blinded:
            if "s2" not in fields:
                raise FormatError("blinded entry %r lacks s2" % fields["identity"])
            s2 = _key_from_hex(fields["s2"], params.k)
        identity = fields["identity"]
        if identity in entries:
            raise FormatError("duplicate identity %r" % identity)
        entries[identity] = KeystoreEntry(identity, params, SecretKey(s1=s1, s2=s2))
    return entries


def read_keystore(path) -> dict[str, KeystoreEntry]:
    with open(path, "r", encoding="utf-8") as fp:
        return parse_keystore(fp.read())


# ---------------------------------------------------------------------------
# verifier service
# ---------------------------------------------------------------------------

class AuthService:
    """Threaded verifier bound to ``bind_address`` with a parsed keystore.

    Each connection runs one handshake on its own RandomSource derived from
    the service seed and a session counter, so transcripts reproduce exactly
    under an injected seed.  Accepted and rejected sessions append to the
    transcript log; aborted handshakes log nothing.
    """

    def __init__(
        self,
        bind_address,
        keystore: dict[str, KeystoreEntry],
        *,
        seed: int = 0,
        mute_decisions: bool = False,
        log_path=None,
    ):
        self.keystore = dict(keystore)
        self.mute_decisions = mute_decisions
        self.log_path = log_path
        self.transcripts: list[SessionTranscript] = []
        self._root = RandomSource(seed)
        self._counter = 0
        self._lock = threading.Lock()
        service = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                service._handle(self.request)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server(bind_address, Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address

    def start(self) -> "AuthService":
        self._thread.start()
        return self

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.shutdown()

    def _session_rng(self) -> RandomSource:
        with self._lock:
            label = "session-%d" % self._counter
            self._counter += 1
        return self._root.derive(label)

    def _log(self, transcript: SessionTranscript) -> None:
        with self._lock:
            self.transcripts.append(transcript)
            if self.log_path is not None:
                with open(self.log_path, "a", encoding="utf-8") as fp:
                    if transcript is not self.transcripts[0]:
                        fp.write("\n")
                    fp.write(format_transcript(transcript))

    def _handle(self, sock: socket.socket) -> None:
        try:
            tag, payload = read_frame(sock)
            if tag != HELLO:
                _send(sock, ERROR, b"expected HELLO, got %s" % _TAG_NAMES[tag].encode())
                return
            identity = payload.decode("utf-8", "replace")
            entry = self.keystore.get(identity)
            if entry is None:
                _send(sock, ERROR, b"unknown identity %s" % identity.encode())
                return
            params, key = entry.params, entry.key
            rng = self._session_rng()

            b = None
            if params.blinded:
                tag, payload = read_frame(sock)
                if tag != BLIND:
                    _send(sock, ERROR, b"blinded protocol requires a BLIND frame")
                    return
                b = load_matrix(payload.decode("utf-8"))
                if b.shape != (params.k, params.n):
                    _send(sock, ERROR, b"blinding matrix has the wrong shape")
                    return

            a = rng.uniform_matrix(params.k, params.n)
            _send(sock, CHALLENGE, dump_matrix(a).encode("utf-8"))

            tag, payload = read_frame(sock)
            if tag != RESPONSE:
                _send(sock, ERROR, b"expected RESPONSE frame")
                return
            z = load_bits(payload.decode("utf-8"))
            if z.shape[0] != params.d:
                _send(sock, ERROR, b"response has the wrong length")
                return

            accepted, distance = verify(params, key, a, z, b=b)
            self._log(SessionTranscript(params, b, a, z, accepted, distance))
            if self.mute_decisions:
                _send(sock, DECISION, b"muted")
            else:
                _send(
                    sock,
                    DECISION,
                    b"%s distance=%d" % (b"accept" if accepted else b"reject", distance),
                )
        except OversizeError:
            pass  # drop the connection without a reply
        except (FormatError, FramingError, DimensionError, ParameterError) as exc:
            try:
                _send(sock, ERROR, str(exc).encode("utf-8"))
            except OSError:
                pass
        except OSError:
            pass
        finally:
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass


def serve(bind_address, keystore_path, **kwargs) -> AuthService:
    """Construct and start a service for the keystore file; caller shuts down."""
    return AuthService(bind_address, read_keystore(keystore_path), **kwargs).start()


# ---------------------------------------------------------------------------
# prover client
# ---------------------------------------------------------------------------

def authenticate(
    server_address,
    identity: str,
    key: SecretKey,
    params: ProtocolParams,
    *,
    rng: RandomSource,
    timeout: float = 10.0,
    frame_log: list | None = None,
):
    """Run the prover half of the handshake; returns (accepted, distance).

    A muted server yields (None, None).  ERROR frames surface as
    :class:`RemoteError`; unreachable or silent servers as
    :class:`ServiceError` mentioning the timeout.
    """
    try:
        with socket.create_connection(server_address, timeout=timeout) as sock:
            _send(sock, HELLO, identity.encode("utf-8"), frame_log)
            b = None
            if params.blinded:
                b = rng.uniform_matrix(params.k, params.n)
                _send(sock, BLIND, dump_matrix(b).encode("utf-8"), frame_log)
            payload = _expect(sock, CHALLENGE, frame_log)
            a = load_matrix(payload.decode("utf-8"))
            if a.shape != (params.k, params.n):
                raise ServiceError("challenge matrix has the wrong shape")
            noise = rng.bernoulli_bits(params.d, params.eps)
            z = expected_response(params, key, a, b=b) ^ noise
            _send(sock, RESPONSE, dump_bits(z).encode("utf-8"), frame_log)
            payload = _expect(sock, DECISION, frame_log)
    except socket.timeout as exc:
        raise ServiceError("timeout waiting for the server: %s" % exc) from exc
    except ConnectionError as exc:
        raise ServiceError("connection failed: %s" % exc) from exc

    text = payload.decode("utf-8", "replace")
    if text == "muted":
        return None, None
    try:
        word, dist_field = text.split()
        accepted = {"accept": True, "reject": False}[word]
        distance = int(dist_field.split("=", 1)[1])
    except (ValueError, KeyError, IndexError):
        raise ServiceError("undecodable decision %r" % text)
    return accepted, distance
