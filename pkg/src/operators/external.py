"""
External Operators
Runs a translation stage in child processes speaking the framed float raster
protocol: one request frame per patch on the child's stdin, one response frame on
its stdout. Children are long-lived and reused; stderr is kept for error reports.

Running this module (``python -m src.operators.external``) starts an echo worker.
"""

import logging
import queue
import subprocess
import sys
import threading
from collections import deque
from typing import BinaryIO, Callable, Dict, List, Optional, Sequence

import numpy as np

from ..errors import OperatorError, ProtocolError
from ..raster.io import RMAP_HEADER, RMAP_MAGIC, decode_frame, decode_header, encode_frame, read_exact
from ..raster.maps import ColorSpace
from .base import CONTRACTS, Origin, OperatorContract, TranslationOperator

logger = logging.getLogger(__name__)

STDERR_TAIL = 20
EXIT_GRACE = 5.0


class _Worker:
    """One child process plus the thread draining its stderr"""

    def __init__(self, command: Sequence[str], cwd: Optional[str], env: Optional[Dict[str, str]]):
        try:
            self.proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                cwd=cwd,
                env=env,
            )
        except OSError as e:
            raise OperatorError(f"Cannot start operator command {list(command)}: {e}") from e
        self.stderr: deque = deque(maxlen=STDERR_TAIL)
        self._drain = threading.Thread(target=self._drain_stderr, daemon=True)
        self._drain.start()
        logger.debug(f"Started operator worker pid={self.proc.pid}")

    def _drain_stderr(self):
        for line in iter(self.proc.stderr.readline, b""):
            self.stderr.append(line.decode("utf8", errors="replace").rstrip())

    def stderr_tail(self) -> str:
        self._drain.join(timeout=0.2)
        return " | ".join(self.stderr) if self.stderr else "(no stderr)"

    def request(self, data: np.ndarray, expected: tuple, timeout: float, origin: Origin) -> np.ndarray:
        """
        Send one frame and wait for the reply

        Args:
            expected: (height, width, channels) the reply must have
        """
        frame = encode_frame(np.asarray(data, dtype=np.float32), ColorSpace.SIGNED_UNIT)
        box: Dict[str, object] = {}

        def write():
            try:
                self.proc.stdin.write(frame)
                self.proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                box["write_error"] = e

        def read():
            try:
                box["reply"] = self._read_reply(expected)
            except Exception as e:
                box["error"] = e

        writer = threading.Thread(target=write, daemon=True)
        reader = threading.Thread(target=read, daemon=True)
        writer.start()
        reader.start()
        reader.join(timeout)
        if reader.is_alive():
            self.kill()
            raise OperatorError(f"Operator child timed out after {timeout:g}s", origin)
        writer.join(EXIT_GRACE)

        if "error" in box:
            error = box["error"]
            if isinstance(error, EOFError):
                try:
                    code = self.proc.wait(timeout=EXIT_GRACE)
                except subprocess.TimeoutExpired:
                    code = None
                raise OperatorError(
                    f"Operator child closed its output (exit status {code}): {self.stderr_tail()}", origin
                )
            if isinstance(error, ProtocolError):
                raise ProtocolError(str(error), origin)
            raise OperatorError(f"Operator child I/O failed: {error}", origin)
        return box["reply"]

    def _read_reply(self, expected: tuple) -> np.ndarray:
        stream: BinaryIO = self.proc.stdout
        header = read_exact(stream, RMAP_HEADER.size)
        if not header:
            raise EOFError("no reply")
        if len(header) != RMAP_HEADER.size:
            raise ProtocolError(f"Truncated reply header ({len(header)} of {RMAP_HEADER.size} bytes)")
        magic, width, height, channels, _ = RMAP_HEADER.unpack(header)
        if magic != RMAP_MAGIC:
            raise ProtocolError(f"Bad reply magic: expected {RMAP_MAGIC!r}, got {magic!r}")
        got = (height, width, channels)
        if got != tuple(expected):
            raise ProtocolError(
                f"Reply dimensions mismatch: expected {expected[1]}x{expected[0]}x{expected[2]}, "
                f"got {width}x{height}x{channels}"
            )
        size = width * height * channels * 4
        payload = read_exact(stream, size)
        if len(payload) != size:
            raise ProtocolError(f"Truncated reply payload ({len(payload)} of {size} bytes)")
        return np.frombuffer(payload, dtype="<f4").reshape(got).astype(np.float32)

    def close(self):
        """Close stdin so the child sees end of input, then reap it"""
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=EXIT_GRACE)
        except subprocess.TimeoutExpired:
            self.kill()
        self.proc.stdout.close()

    def kill(self):
        if self.proc.poll() is None:
            self.proc.kill()
        self.proc.wait()
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass


class ExternalOperator(TranslationOperator):
    """
    Translation stage backed by a child-process command

    Up to ``workers`` children are started on demand; a child that fails is killed
    and replaced on the next request.
    """

    backend = "external"

    def __init__(
        self,
        contract: OperatorContract,
        command: Sequence[str],
        timeout: float = 120.0,
        workers: int = 1,
        deterministic: bool = True,
        cwd: Optional[str] = None,
        env: Optional[Dict[str, str]] = None,
    ):
        super().__init__(contract)
        if not command:
            raise OperatorError("External operator needs a command")
        if timeout <= 0:
            raise OperatorError(f"Timeout must be > 0, got {timeout}")
        self.command = list(command)
        self.timeout = timeout
        self.max_workers = max(int(workers), 1)
        self.deterministic = deterministic
        self.cwd = cwd
        self.env = env
        self._idle: "queue.Queue[_Worker]" = queue.Queue()
        self._workers: List[_Worker] = []
        self._lock = threading.Lock()

    def _acquire(self) -> _Worker:
        # A discarded worker frees a slot without ever reaching the idle queue
        while True:
            try:
                return self._idle.get_nowait()
            except queue.Empty:
                pass
            with self._lock:
                if len(self._workers) < self.max_workers:
                    worker = _Worker(self.command, self.cwd, self.env)
                    self._workers.append(worker)
                    return worker
            try:
                return self._idle.get(timeout=0.1)
            except queue.Empty:
                continue

    def _discard(self, worker: _Worker):
        worker.kill()
        with self._lock:
            if worker in self._workers:
                self._workers.remove(worker)

    def apply_array(self, data: np.ndarray, origin: Origin = None) -> np.ndarray:
        h, w = data.shape[:2]
        expected = (h * self.scale, w * self.scale, len(self.output_layout))
        worker = self._acquire()
        try:
            out = worker.request(data, expected, self.timeout, origin)
        except BaseException:
            self._discard(worker)
            raise
        self._idle.put(worker)
        return out.astype(np.float64)

    def close(self):
        with self._lock:
            workers, self._workers = self._workers, []
        for worker in workers:
            worker.close()
        while not self._idle.empty():
            self._idle.get_nowait()
        if workers:
            logger.debug(f"Closed {len(workers)} '{self.name}' operator worker(s)")


def external_operator(
    name: str,
    command: Sequence[str],
    timeout: float = 120.0,
    workers: int = 1,
    contract: Optional[OperatorContract] = None,
    **kwargs,
) -> ExternalOperator:
    """Build an external backend for a named stage (or an explicit contract)"""
    if contract is None:
        if name not in CONTRACTS:
            raise OperatorError(f"Unknown operator '{name}'; choose from {sorted(CONTRACTS)}")
        contract = CONTRACTS[name]
    return ExternalOperator(contract, command, timeout=timeout, workers=workers, **kwargs)


# ==================== Worker side ====================


def serve(
    transform: Callable[[np.ndarray], np.ndarray],
    stdin: Optional[BinaryIO] = None,
    stdout: Optional[BinaryIO] = None,
) -> int:
    """
    Child-side loop: read frames until end of input, reply with transform(frame)

    Returns:
        Number of frames served
    """
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    served = 0
    while True:
        header = read_exact(stdin, RMAP_HEADER.size)
        if not header:
            break
        width, height, channels, _ = decode_header(header)
        data, colorspace = decode_frame(header + read_exact(stdin, width * height * channels * 4))
        stdout.write(encode_frame(np.asarray(transform(data), dtype=np.float32), colorspace))
        stdout.flush()
        served += 1
    return served


if __name__ == "__main__":
    serve(lambda frame: frame)
