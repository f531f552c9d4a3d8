"""Per-camera capture subprocess and the preview pipeline.

The capture subprocess writes raw BGR24 frames contiguously to its
stdout; the reader frames the stream by exact byte count and hands
complete frames to a sink in order. `virtual:` devices are served by the
pure-Python pattern generator; real devices go through the toolchain's
rawvideo output.

Each camera gets one PreviewPipeline, which applies the transform chain
(mirror, BGR→RGBA, resize to tile, JPEG encode) and retains the latest
encoded tile for streaming to consoles.
"""

from __future__ import annotations

import logging
import subprocess
import sys
import threading
import time
from dataclasses import dataclass

from . import frames as frame_ops
from .devices import CameraBinding, resolve_toolchain
from .errors import FrameSyncLost, SpawnFailure
from .frames import PixelFormat, RawFrame
from .urls import VIRTUAL_DEVICE_PREFIX, capture_input_args

logger = logging.getLogger(__name__)

DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 480
DEFAULT_FRAME_RATE = 15
DEFAULT_JPEG_QUALITY = 80

# How long to watch a freshly spawned real-device capture for an
# immediate failure (missing device, busy device).
_SPAWN_PROBE_S = 0.3


@dataclass(frozen=True)
class CaptureSettings:
    device: CameraBinding
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    frame_rate: int = DEFAULT_FRAME_RATE

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.frame_rate < 1:
            raise ValueError("capture dimensions and frame rate must be positive")

    @property
    def frame_bytes(self) -> int:
        return self.width * self.height * 3


def build_capture_argv(settings: CaptureSettings,
                       toolchain_path: str | None = None) -> list[str]:
    """Full command line (executable included) for the capture subprocess."""
    name = settings.device.device_name
    if name.startswith(VIRTUAL_DEVICE_PREFIX):
        return [
            sys.executable, "-m", "camgrid.virtualsrc",
            "--width", str(settings.width),
            "--height", str(settings.height),
            "--rate", str(settings.frame_rate),
        ]
    executable = resolve_toolchain(toolchain_path)
    argv = [executable, "-hide_banner", "-loglevel", "error"]
    argv += capture_input_args(name, settings.width, settings.height,
                               settings.frame_rate, sys.platform)
    argv += ["-f", "rawvideo", "-pix_fmt", "bgr24", "-"]
    return argv


class CaptureHandle:
    """A running capture subprocess plus its frame reader thread."""

    def __init__(self, process: subprocess.Popen, settings: CaptureSettings,
                 sink, on_fault=None):
        self._process = process
        self._settings = settings
        self._sink = sink
        self._on_fault = on_fault
        self._stopped = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, daemon=True,
                                        name=f"capture-{settings.device.camera_id}")
        self._reader.start()

    def _read_exact(self, size: int) -> bytes:
        chunks = []
        remaining = size
        stdout = self._process.stdout
        while remaining > 0:
            chunk = stdout.read(remaining)
            if not chunk:
                break
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def _read_loop(self):
        sequence_no = 0
        frame_bytes = self._settings.frame_bytes
        while not self._stopped.is_set():
            data = self._read_exact(frame_bytes)
            if self._stopped.is_set():
                return
            if len(data) < frame_bytes:
                if data and self._on_fault is not None:
                    # Pipe closed mid-frame: report, never deliver torn data.
                    self._on_fault(FrameSyncLost(
                        f"capture ended {frame_bytes - len(data)} bytes into a frame",
                        camera_id=self._settings.device.camera_id,
                    ))
                return
            frame = RawFrame(self._settings.width, self._settings.height,
                             PixelFormat.BGR24, data, sequence_no)
            sequence_no += 1
            self._sink(frame)

    def stop(self):
        """Terminate the capture and release the device.

        No sink call happens after this returns.
        """
        self._stopped.set()
        if self._process.poll() is None:
            self._process.terminate()
        try:
            self._process.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._process.kill()
            self._process.wait(timeout=5)
        if threading.current_thread() is not self._reader:
            self._reader.join(timeout=5)
        if self._process.stdout is not None:
            self._process.stdout.close()

    def is_running(self) -> bool:
        return self._process.poll() is None and not self._stopped.is_set()


def start_capture(settings: CaptureSettings, sink, on_fault=None,
                  toolchain_path: str | None = None) -> CaptureHandle:
    """Spawn the capture subprocess and stream its frames to `sink`."""
    argv = build_capture_argv(settings, toolchain_path)
    logger.debug("starting capture for camera %d: %s",
                 settings.device.camera_id, " ".join(argv))
    is_virtual = settings.device.device_name.startswith(VIRTUAL_DEVICE_PREFIX)
    try:
        process = subprocess.Popen(
            argv, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL if is_virtual else subprocess.PIPE,
            stdin=subprocess.DEVNULL,
        )
    except OSError as exc:
        raise SpawnFailure(f"cannot start capture: {exc}",
                           camera_id=settings.device.camera_id) from exc
    if not is_virtual:
        # A bad device name makes the toolchain exit almost immediately;
        # catch that here instead of reporting an empty stream later.
        deadline = time.monotonic() + _SPAWN_PROBE_S
        while time.monotonic() < deadline:
            if process.poll() is not None:
                stderr = b""
                if process.stderr is not None:
                    stderr = process.stderr.read() or b""
                raise SpawnFailure(
                    "capture process exited immediately: "
                    + stderr.decode(errors="replace").strip(),
                    camera_id=settings.device.camera_id,
                )
            time.sleep(0.02)
    return CaptureHandle(process, settings, sink, on_fault)


class PreviewPipeline:
    """Capture → mirror → BGR→RGBA → resize → JPEG, retaining the last tile."""

    def __init__(self, settings: CaptureSettings, tile_width: int,
                 tile_height: int, quality: int = DEFAULT_JPEG_QUALITY,
                 mirror: bool = True, on_fault=None,
                 toolchain_path: str | None = None):
        self.settings = settings
        self.tile_width = tile_width
        self.tile_height = tile_height
        self.quality = quality
        self.mirror = mirror
        self._on_fault = on_fault
        self._toolchain_path = toolchain_path
        self._handle: CaptureHandle | None = None
        self._cond = threading.Condition()
        self._latest: tuple[bytes, int] | None = None

    def start(self):
        self._handle = start_capture(self.settings, self._process_frame,
                                     on_fault=self._fault,
                                     toolchain_path=self._toolchain_path)

    def _fault(self, error):
        if self._on_fault is not None:
            self._on_fault(error)

    def _process_frame(self, frame: RawFrame):
        if self.mirror:
            frame = frame_ops.flip_horizontal(frame)
        frame = frame_ops.bgr_to_rgba(frame)
        frame = frame_ops.resize_frame(frame, self.tile_width, self.tile_height)
        tile = frame_ops.encode_preview_tile(frame, self.quality)
        with self._cond:
            self._latest = (tile, frame.sequence_no)
            self._cond.notify_all()

    def latest(self) -> tuple[bytes, int] | None:
        with self._cond:
            return self._latest

    def wait_for_frame(self, after_seq: int, timeout: float) -> tuple[bytes, int] | None:
        """Block until a tile newer than `after_seq` exists, or time out."""
        deadline = time.monotonic() + timeout
        with self._cond:
            while self._latest is None or self._latest[1] <= after_seq:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                self._cond.wait(remaining)
            return self._latest

    def stop(self) -> bytes | None:
        """Stop capture and return the last encoded tile, if any."""
        if self._handle is not None:
            self._handle.stop()
            self._handle = None
        with self._cond:
            return self._latest[0] if self._latest else None
