"""Blocking client for the groundsim environment server.

Frames are a 4-byte big-endian length followed by UTF-8 JSON. Every request
gets exactly one response, so a handle is a plain request/response loop over
one TCP connection.
"""

import json
import socket
import struct
from dataclasses import dataclass

MAX_FRAME_LEN = 1 << 20
DEFAULT_PORT = 7878

__all__ = ["RemoteEnv", "Spec", "ServerError", "ProtocolError", "connect", "DEFAULT_PORT", "MAX_FRAME_LEN"]


class ServerError(RuntimeError):
    """The server answered with an error object."""


class ProtocolError(RuntimeError):
    """The connection broke or carried something that is not a valid frame."""


@dataclass(frozen=True)
class Spec:
    obs_dim: int
    act_dim: int
    preset: str
    task: str
    max_steps: int
    collision_radius: float
    sample_time: float


def _recv_exact(sock, n):
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ProtocolError("connection closed by server")
        buf.extend(chunk)
    return bytes(buf)


def write_frame(sock, body):
    if len(body) > MAX_FRAME_LEN:
        raise ProtocolError(f"frame of {len(body)} bytes exceeds the {MAX_FRAME_LEN} byte limit")
    sock.sendall(struct.pack(">I", len(body)) + body)


def read_frame(sock):
    (n,) = struct.unpack(">I", _recv_exact(sock, 4))
    if n > MAX_FRAME_LEN:
        raise ProtocolError(f"incoming frame of {n} bytes exceeds the {MAX_FRAME_LEN} byte limit")
    return _recv_exact(sock, n)


class RemoteEnv:
    """One connection to a served environment. Not safe for concurrent use."""

    def __init__(self, sock):
        self._sock = sock
        self._active = False
        self.spec = Spec(**self.request({"cmd": "spec"}))

    def request(self, message):
        """Sends one request and returns the decoded reply, raising on errors."""
        if self._sock is None:
            raise ProtocolError("handle is closed")
        write_frame(self._sock, json.dumps(message).encode())
        try:
            reply = json.loads(read_frame(self._sock))
        except ValueError as e:
            raise ProtocolError(f"undecodable reply: {e}") from e
        if isinstance(reply, dict) and "error" in reply:
            raise ServerError(reply["error"])
        return reply

    def reset(self, seed=None):
        msg = {"cmd": "reset"}
        if seed is not None:
            msg["seed"] = int(seed)
        obs = self.request(msg)["obs"]
        self._active = True
        return obs

    def step(self, action):
        """Returns (observation, reward, terminated, truncated, info)."""
        if not self._active:
            raise ServerError("episode is not active; call reset first")
        throttle, steer = action
        r = self.request({"cmd": "step", "action": [float(throttle), float(steer)]})
        if r["terminated"] or r["truncated"]:
            self._active = False
        return r["obs"], r["reward"], r["terminated"], r["truncated"], r["info"]

    def close(self):
        if self._sock is None:
            return
        try:
            self.request({"cmd": "close"})
        except (OSError, ProtocolError, ServerError):
            pass
        finally:
            self._sock.close()
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def connect(host="127.0.0.1", port=DEFAULT_PORT, timeout=10.0):
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    try:
        return RemoteEnv(sock)
    except BaseException:
        sock.close()
        raise
