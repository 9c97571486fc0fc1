"""Line-oriented protocol for oracles that live in another process.

The child announces itself with a single handshake line::

    optattack-oracle 1 <d> <k>

(protocol name, version, input dimension, class count). Each query is then
one line of ``d`` space-separated decimals, answered by one line holding the
integer label. Closing the child's stdin ends the session.

Run ``python -m optattack.external MODEL.json`` to serve a built-in model
over this protocol.
"""
import subprocess
import sys
import threading

from .errors import InvalidInputError, ModelLoadError

PROTOCOL = "optattack-oracle"
VERSION = 1


def format_query(x):
    return " ".join(repr(float(v)) for v in x)


class ExternalProcessModel:
    """Model proxy that forwards every prediction to a child process."""

    kind = "external"

    def __init__(self, command, cwd=None):
        if isinstance(command, str):
            command = command.split()
        self.command = list(command)
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1, cwd=cwd,
            )
        except OSError as exc:
            raise ModelLoadError(f"cannot start oracle process: {exc}", "command") from None
        hello = self._proc.stdout.readline().split()
        if len(hello) != 4 or hello[0] != PROTOCOL:
            self.close()
            raise ModelLoadError(f"bad handshake {' '.join(hello)!r}", "command")
        if int(hello[1]) != VERSION:
            self.close()
            raise ModelLoadError(f"protocol version {hello[1]} unsupported (want {VERSION})", "command")
        self.dim = int(hello[2])
        self.n_classes = int(hello[3])

    def predict(self, x):
        with self._lock:
            self._proc.stdin.write(format_query(x) + "\n")
            self._proc.stdin.flush()
            reply = self._proc.stdout.readline()
        try:
            label = int(reply.strip())
        except ValueError:
            raise InvalidInputError(f"oracle process replied {reply!r}") from None
        if not 0 <= label < self.n_classes:
            raise InvalidInputError(f"oracle process returned label {label} outside [0, {self.n_classes})")
        return label

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def to_dict(self):
        return {"type": self.kind, "command": self.command}


def serve(model, stdin=sys.stdin, stdout=sys.stdout):
    """Answer protocol queries for ``model`` until stdin closes."""
    import numpy as np

    dim = model.dim if model.dim is not None else 0
    stdout.write(f"{PROTOCOL} {VERSION} {dim} {model.n_classes}\n")
    stdout.flush()
    for line in stdin:
        if not line.strip():
            continue
        x = np.array([float(v) for v in line.split()], dtype=np.float64)
        stdout.write(f"{model.predict(x)}\n")
        stdout.flush()


def main(argv=None):
    from .models import model_from_dict, read_model_file

    args = sys.argv[1:] if argv is None else argv
    if len(args) != 1:
        print("usage: python -m optattack.external MODEL.json", file=sys.stderr)
        return 1
    serve(model_from_dict(read_model_file(args[0])))
    return 0


if __name__ == "__main__":
    sys.exit(main())
