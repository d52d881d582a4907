"""Simulated cameras, frame streams with drop-oldest backpressure, PGM io.

A frame's pixel payload is a synthetic test pattern: the first 8 bytes are
the frame seq big-endian, the next 8 the capture time in ms, the rest a
gradient. The pattern is the determinism hook: tests decode payloads back
to (seq, at) instead of comparing screenshots.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .clock import BaseClock
from .errors import NoFrameYet, UnknownCamera


def encode_pattern(seq: int, at_ms: int, width: int, height: int) -> bytes:
    buf = bytearray(width * height)
    buf[0:8] = seq.to_bytes(8, "big")
    buf[8:16] = at_ms.to_bytes(8, "big")
    for i in range(16, len(buf)):
        buf[i] = (i + seq) & 0xFF
    return bytes(buf)


def decode_pattern(pixels: bytes) -> tuple[int, int]:
    return int.from_bytes(pixels[0:8], "big"), int.from_bytes(pixels[8:16], "big")


def write_pgm(path: Path, width: int, height: int, pixels: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels)


def read_pgm(path: Path) -> tuple[int, int, bytes]:
    data = Path(path).read_bytes()
    header, _, rest = data.partition(b"255\n")
    magic, dims = header.split(b"\n", 1)
    if magic != b"P5":
        raise ValueError(f"not a P5 file: {path}")
    width, height = (int(t) for t in dims.split())
    return width, height, rest[: width * height]


@dataclass(frozen=True)
class Frame:
    camera: str
    seq: int
    at_ms: int
    width: int
    height: int
    pixels: bytes


class StreamSession:
    """Per-client bounded frame queue; full queue evicts the oldest frame."""

    def __init__(self, camera: str, k: int):
        self.camera = camera
        self._k = k
        self._queue: deque[Frame] = deque()
        self._lock = threading.Lock()
        self.produced = 0
        self.delivered = 0
        self.dropped = 0
        self.closed = False
        self.on_offer = None   # optional wake hook for a pumping writer

    def offer(self, frame: Frame) -> None:
        with self._lock:
            self.produced += 1
            if len(self._queue) == self._k:
                self._queue.popleft()
                self.dropped += 1
            self._queue.append(frame)
        wake = self.on_offer
        if wake is not None:
            wake()

    def pop(self) -> Frame | None:
        with self._lock:
            if not self._queue:
                return None
            self.delivered += 1
            return self._queue.popleft()

    def queued(self) -> int:
        with self._lock:
            return len(self._queue)

    def peek_all(self) -> list[Frame]:
        with self._lock:
            return list(self._queue)


class _Camera:
    def __init__(self, camera_id: str, width: int, height: int, fps: int):
        if width * height < 16:
            raise ValueError("camera resolution below pattern size")
        self.id = camera_id
        self.width = width
        self.height = height
        self.fps = fps
        self.seq = 0
        self.latest: Frame | None = None


class CameraDeck:
    def __init__(self, clock: BaseClock, emit, queue_k: int = 8):
        self._clock = clock
        self._emit = emit
        self._queue_k = queue_k
        self._cameras: dict[str, _Camera] = {}
        self._streams: dict[str, list[StreamSession]] = {}
        self._lock = threading.Lock()

    def add(self, camera_id: str, width: int, height: int, fps: int) -> None:
        with self._lock:
            self._cameras[camera_id] = _Camera(camera_id, width, height, fps)
            self._streams[camera_id] = []

    def ids(self) -> list[str]:
        with self._lock:
            return list(self._cameras)

    def geometry(self, camera_id: str) -> tuple[int, int, int]:
        cam = self._get(camera_id)
        return cam.width, cam.height, cam.fps

    def _get(self, camera_id: str) -> _Camera:
        with self._lock:
            try:
                return self._cameras[camera_id]
            except KeyError:
                raise UnknownCamera(f"no camera {camera_id}") from None

    def tick(self, camera_id: str) -> Frame:
        with self._lock:
            cam = self._cameras.get(camera_id)
            if cam is None:
                raise UnknownCamera(f"no camera {camera_id}")
            cam.seq += 1
            at = self._clock.now_ms()
            frame = Frame(camera_id, cam.seq, at, cam.width, cam.height,
                          encode_pattern(cam.seq, at, cam.width, cam.height))
            cam.latest = frame
            watchers = list(self._streams[camera_id])
        for stream in watchers:
            stream.offer(frame)
        return frame

    def snapshot(self, camera_id: str) -> Frame:
        cam = self._get(camera_id)
        if cam.latest is None:
            raise NoFrameYet(f"{camera_id} has produced no frame")
        return cam.latest

    def open_stream(self, camera_id: str) -> StreamSession:
        cam = self._get(camera_id)
        stream = StreamSession(cam.id, self._queue_k)
        with self._lock:
            self._streams[camera_id].append(stream)
        self._emit("stream-open", camera_id)
        return stream

    def close_stream(self, stream: StreamSession) -> None:
        with self._lock:
            sessions = self._streams.get(stream.camera, [])
            if stream not in sessions:
                return
            sessions.remove(stream)
        stream.closed = True
        self._emit("stream-close", stream.camera,
                   delivered=stream.delivered, dropped=stream.dropped)
