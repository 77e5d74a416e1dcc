"""Blocking client for the newline-delimited JSON environment protocol."""

import json
import socket

import numpy as np

OBS_SHAPE = (10, 98)


class RemoteEnvError(RuntimeError):
    """Error reported by the server for a request."""


class RemoteEnv:
    """One protocol session; not shareable across threads."""

    def __init__(self, host="127.0.0.1", port=5555, timeout=60.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._reader = self._sock.makefile("r", encoding="utf-8", newline="\n")
        self.state = "unreset"

    def _call(self, request):
        if self.state == "closed":
            raise RemoteEnvError("closed")
        self._sock.sendall((json.dumps(request) + "\n").encode("utf-8"))
        line = self._reader.readline()
        if not line:
            self.state = "closed"
            raise ConnectionError("server closed the connection")
        reply = json.loads(line)
        if "error" in reply:
            raise RemoteEnvError(reply["error"])
        return reply

    def reset(self, seed=0):
        reply = self._call({"cmd": "reset", "seed": int(seed)})
        self.state = "active"
        return np.asarray(reply["obs"], dtype=np.float64).reshape(OBS_SHAPE)

    def step(self, action):
        reply = self._call({"cmd": "step", "action": float(action)})
        obs = np.asarray(reply["obs"], dtype=np.float64).reshape(OBS_SHAPE)
        terminated, truncated = reply["terminal"], reply["truncated"]
        if terminated or truncated:
            self.state = "unreset"
        return obs, reply["reward"], terminated, truncated, reply["info"]

    def configure(self, scenario):
        self._call({"cmd": "configure", "scenario": scenario})
        self.state = "unreset"

    def close(self):
        if self.state != "closed":
            try:
                self._call({"cmd": "close"})
            except (OSError, RemoteEnvError):
                pass
            self.state = "closed"
        self._reader.close()
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def connect(address):
    """Opens a session at "host:port"."""
    host, _, port = address.rpartition(":")
    return RemoteEnv(host or "127.0.0.1", int(port))
