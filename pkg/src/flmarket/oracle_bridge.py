"""Bridge to an external accuracy oracle over newline-delimited JSON.

The oracle is a spawned child process; each request is one JSON object on
one line of its stdin and each response one JSON object on one line of
its stdout.  Request: {"v": 1, "id", "dataset", "size", "emd", "seed"}.
Response: {"id", "accuracy", ...} or {"id", "error"}.
"""

from __future__ import annotations

import json
import subprocess

from .market import ServiceSpec

PROTOCOL_VERSION = 1


class ExternalOracle:
    """Accuracy oracle served by a child process; usable as the
    environment's oracle callable."""

    def __init__(self, cmd: tuple[str, ...], seed: int = 0):
        self.cmd = cmd
        self.seed = seed
        self._next_id = 0
        self._proc = subprocess.Popen(
            list(cmd),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def __call__(self, service: ServiceSpec, cum_size: float, cum_emd: float) -> float:
        self._next_id += 1
        request = {
            "v": PROTOCOL_VERSION,
            "id": self._next_id,
            "dataset": service.name,
            "size": int(round(cum_size)),
            "emd": float(cum_emd),
            "seed": self.seed,
        }
        if self._proc.poll() is not None:
            raise RuntimeError("oracle process has exited")
        self._proc.stdin.write(json.dumps(request) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise RuntimeError("oracle process closed its output")
        response = json.loads(line)
        if response.get("id") != request["id"]:
            raise RuntimeError(f"oracle answered id {response.get('id')}, expected {request['id']}")
        if "error" in response:
            raise RuntimeError(f"oracle error: {response['error']}")
        accuracy = float(response["accuracy"])
        if not 0.0 <= accuracy <= 1.0:
            raise RuntimeError(f"oracle returned accuracy {accuracy} outside [0, 1]")
        return accuracy

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=30)

    def __enter__(self) -> "ExternalOracle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
