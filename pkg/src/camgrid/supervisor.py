"""Per-camera lifecycle state machine and publish process supervision.

One supervisor owns every camera's phase (Idle, Previewing, Streaming,
Error) and enforces the exclusivity rule: a camera's preview capture is
released before a publisher opens the same device, and the two never
coexist. Operations may be called from any thread; transitions are
applied in arrival order under a single lock, and process-exit
notifications merge into the same serialized stream. Reads hand out
immutable snapshots.
"""

from __future__ import annotations

import collections
import logging
import subprocess
import threading
import time
from dataclasses import dataclass
from enum import Enum
from functools import partial

from . import capture as capture_mod
from .capture import CaptureSettings, PreviewPipeline
from .config import ConfigStore
from .devices import CameraBinding, CameraRegistry, resolve_toolchain
from .errors import (NotShowing, NotStreaming, SpawnFailure,
                     StreamingConflict, UnknownCamera)
from .frames import PixelFormat, RawFrame, encode_preview_tile
from .layout import LayoutParams, compute_layout
from .urls import StreamTarget, analyze_url, synthesize_publish_command

logger = logging.getLogger(__name__)

DEFAULT_GRACE_PERIOD_S = 3.0
_STDERR_RING_BYTES = 64 * 1024
_EVENT_CAP = 4096


class Phase(Enum):
    IDLE = "idle"
    PREVIEWING = "previewing"
    STREAMING = "streaming"
    ERROR = "error"


class EventKind(Enum):
    STREAM_STARTED = "stream_started"
    STREAM_EXITED = "stream_exited"
    PREVIEW_STARTED = "preview_started"
    PREVIEW_STOPPED = "preview_stopped"
    FAULT = "fault"


@dataclass(frozen=True)
class CameraState:
    camera_id: int
    phase: Phase
    publish_target: StreamTarget | None = None
    process_ref: object | None = None
    last_error: str | None = None


@dataclass(frozen=True)
class SupervisorEvent:
    kind: EventKind
    camera_id: int
    detail: str
    timestamp: int  # monotonic milliseconds


class ToolchainProcess:
    """A supervised publisher subprocess with a bounded stderr ring."""

    def __init__(self, process: subprocess.Popen):
        self._process = process
        self._stderr_ring = collections.deque(maxlen=_STDERR_RING_BYTES // 256)

    @property
    def pid(self) -> int:
        return self._process.pid

    def watch(self, on_exit):
        thread = threading.Thread(target=self._watch, args=(on_exit,),
                                  daemon=True, name=f"publish-{self.pid}")
        thread.start()

    def _watch(self, on_exit):
        stderr = self._process.stderr
        if stderr is not None:
            for chunk in iter(lambda: stderr.read1(256), b""):
                self._stderr_ring.append(chunk)
        returncode = self._process.wait()
        on_exit(returncode, self.stderr_tail())

    def stderr_tail(self) -> str:
        return b"".join(self._stderr_ring).decode(errors="replace")

    def poll(self):
        return self._process.poll()

    def signal_stop(self):
        if self._process.poll() is None:
            self._process.terminate()

    def force_kill(self):
        if self._process.poll() is None:
            self._process.kill()

    def wait(self, timeout=None):
        return self._process.wait(timeout=timeout)


def toolchain_spawner(toolchain_path: str | None = None):
    """Default publisher spawner: runs argv under the resolved toolchain."""

    def spawn(argv) -> ToolchainProcess:
        executable = resolve_toolchain(toolchain_path)
        try:
            process = subprocess.Popen(
                [executable] + list(argv),
                stdin=subprocess.DEVNULL,
                stdout=subprocess.DEVNULL,
                stderr=subprocess.PIPE,
            )
        except OSError as exc:
            raise SpawnFailure(f"cannot start publisher: {exc}") from exc
        return ToolchainProcess(process)

    return spawn


class _Slot:
    __slots__ = ("phase", "target", "process", "pipeline", "frozen_jpeg",
                 "last_error")

    def __init__(self):
        self.phase = Phase.IDLE
        self.target = None
        self.process = None
        self.pipeline = None
        self.frozen_jpeg = None
        self.last_error = None


class StreamSupervisor:
    """Owner of camera lifecycle state; see module docstring."""

    def __init__(self, registry: CameraRegistry,
                 config_store: ConfigStore | None = None,
                 toolchain_path: str | None = None,
                 capture_defaults: tuple[int, int, int] = (
                     capture_mod.DEFAULT_WIDTH,
                     capture_mod.DEFAULT_HEIGHT,
                     capture_mod.DEFAULT_FRAME_RATE),
                 layout_params: LayoutParams | None = None,
                 preview_factory=None, spawner=None,
                 grace_period: float = DEFAULT_GRACE_PERIOD_S,
                 mirror_preview: bool | dict[int, bool] = True,
                 clock=time.monotonic):
        self._registry = registry
        self._store = config_store
        self._toolchain_path = toolchain_path
        self._capture_defaults = capture_defaults
        self._layout_params = layout_params or LayoutParams(screen_width=1920)
        self._preview_factory = preview_factory or self._default_preview_factory
        self._spawner = spawner or toolchain_spawner(toolchain_path)
        self._grace_period = grace_period
        self._mirror_preview = mirror_preview
        self._clock = clock
        self._lock = threading.Lock()
        self._slots: dict[int, _Slot] = {}
        self._events: collections.deque[SupervisorEvent] = collections.deque(
            maxlen=_EVENT_CAP)
        self._last_ts = 0
        self._placeholder_jpeg: bytes | None = None
        self._tile_dims_cache: dict[int, tuple[int, int]] = {}

    # -- helpers ---------------------------------------------------------

    def _mirror_for(self, camera_id: int) -> bool:
        if isinstance(self._mirror_preview, dict):
            return self._mirror_preview.get(camera_id, True)
        return self._mirror_preview

    def _default_preview_factory(self, settings, tile_width, tile_height,
                                 on_fault):
        return PreviewPipeline(settings, tile_width, tile_height,
                               mirror=self._mirror_for(settings.device.camera_id),
                               on_fault=on_fault,
                               toolchain_path=self._toolchain_path)

    def _emit(self, kind: EventKind, camera_id: int, detail: str):
        # Strictly increasing stamps so poll_events(since=last.timestamp)
        # never drops a same-millisecond burst.
        now = int(self._clock() * 1000)
        self._last_ts = max(self._last_ts + 1, now)
        self._events.append(SupervisorEvent(kind, camera_id, detail,
                                            self._last_ts))

    def now_ms(self) -> int:
        """Current event-clock value; safe cursor for poll_events."""
        with self._lock:
            return max(self._last_ts, int(self._clock() * 1000))

    def _slot(self, camera_id: int) -> _Slot:
        slot = self._slots.get(camera_id)
        if slot is None:
            slot = self._slots[camera_id] = _Slot()
        return slot

    def _require_bound(self, camera_id: int) -> str:
        name = self._registry.device_name(camera_id)
        if name is None:
            raise UnknownCamera(f"camera {camera_id} is not bound",
                                camera_id=camera_id)
        return name

    def _tile_dims(self, shown_count: int) -> tuple[int, int]:
        count = max(1, shown_count)
        dims = self._tile_dims_cache.get(count)
        if dims is None:
            grid = compute_layout(range(count), self._layout_params)
            dims = self._tile_dims_cache[count] = (grid.tile_width,
                                                   grid.tile_height)
        return dims

    def _capture_settings(self, camera_id: int, device_name: str) -> CaptureSettings:
        width, height, rate = self._capture_defaults
        return CaptureSettings(device=CameraBinding(camera_id, device_name),
                               width=width, height=height, frame_rate=rate)

    def _state_of(self, camera_id: int, slot: _Slot) -> CameraState:
        return CameraState(camera_id=camera_id, phase=slot.phase,
                           publish_target=slot.target,
                           process_ref=slot.process,
                           last_error=slot.last_error)

    def _start_preview_locked(self, camera_id: int, device_name: str,
                              tile_dims: tuple[int, int]):
        slot = self._slot(camera_id)
        settings = self._capture_settings(camera_id, device_name)
        pipeline = self._preview_factory(
            settings, tile_dims[0], tile_dims[1],
            on_fault=partial(self._on_preview_fault, camera_id))
        try:
            pipeline.start()
        except Exception as exc:
            slot.phase = Phase.ERROR
            slot.last_error = str(exc)
            self._emit(EventKind.FAULT, camera_id, f"preview start failed: {exc}")
            return
        slot.pipeline = pipeline
        slot.phase = Phase.PREVIEWING
        slot.last_error = None
        self._emit(EventKind.PREVIEW_STARTED, camera_id, device_name)

    def _stop_preview_locked(self, camera_id: int, slot: _Slot,
                             keep_frozen: bool):
        if slot.pipeline is None:
            return
        frozen = slot.pipeline.stop()
        slot.pipeline = None
        if keep_frozen and frozen is not None:
            slot.frozen_jpeg = frozen
        self._emit(EventKind.PREVIEW_STOPPED, camera_id, "")

    def _terminate_locked(self, camera_id: int, slot: _Slot, detail: str):
        """Graceful-then-forced stop of a publisher, slot left Idle."""
        process = slot.process
        slot.process = None
        slot.target = None
        slot.phase = Phase.IDLE
        slot.frozen_jpeg = None
        if process is None:
            return
        process.signal_stop()
        try:
            returncode = process.wait(timeout=self._grace_period)
        except subprocess.TimeoutExpired:
            process.force_kill()
            returncode = process.wait(timeout=5)
            self._emit(EventKind.FAULT, camera_id,
                       "publisher ignored graceful stop; killed")
        self._emit(EventKind.STREAM_EXITED, camera_id,
                   f"{detail}; exit code {returncode}")

    # -- operations ------------------------------------------------------

    def show_all(self) -> list[CameraState]:
        """Preview every bound, non-stale camera; streaming ones untouched."""
        with self._lock:
            bindings = self._registry.snapshot()
            for binding in bindings:
                self._slot(binding.camera_id)
            startable = [
                b for b in bindings
                if not self._registry.is_stale(b.camera_id)
                and self._slots[b.camera_id].phase is Phase.IDLE
            ]
            already_shown = sum(
                1 for b in bindings
                if self._slots[b.camera_id].phase in (Phase.PREVIEWING,
                                                      Phase.STREAMING))
            tile_dims = self._tile_dims(len(startable) + already_shown)
            for binding in startable:
                self._start_preview_locked(binding.camera_id,
                                           binding.device_name, tile_dims)
            return [self._state_of(b.camera_id, self._slots[b.camera_id])
                    for b in bindings]

    def show_one(self, camera_id: int) -> CameraState:
        """Preview one camera; stop every other preview."""
        with self._lock:
            device_name = self._require_bound(camera_id)
            slot = self._slot(camera_id)
            if slot.phase is Phase.STREAMING:
                raise StreamingConflict(
                    f"camera {camera_id} is streaming; stop the flow first",
                    camera_id=camera_id)
            for other_id, other in self._slots.items():
                if other_id != camera_id and other.phase is Phase.PREVIEWING:
                    self._stop_preview_locked(other_id, other, keep_frozen=False)
                    other.phase = Phase.IDLE
            if slot.phase is not Phase.PREVIEWING:
                self._start_preview_locked(camera_id, device_name,
                                           self._tile_dims(1))
            return self._state_of(camera_id, slot)

    def close_all(self) -> None:
        """Stop every preview and terminate every publisher; all Idle."""
        with self._lock:
            for camera_id, slot in self._slots.items():
                if slot.pipeline is not None:
                    self._stop_preview_locked(camera_id, slot, keep_frozen=False)
            self._terminate_all_locked()
            for slot in self._slots.values():
                slot.phase = Phase.IDLE
                slot.frozen_jpeg = None
                slot.last_error = None

    def _terminate_all_locked(self):
        streaming = [(camera_id, slot) for camera_id, slot in self._slots.items()
                     if slot.phase is Phase.STREAMING and slot.process is not None]
        for _, slot in streaming:
            slot.process.signal_stop()
        deadline = time.monotonic() + self._grace_period
        for camera_id, slot in streaming:
            process = slot.process
            slot.process = None
            slot.target = None
            slot.phase = Phase.IDLE
            try:
                returncode = process.wait(
                    timeout=max(0.0, deadline - time.monotonic()))
            except subprocess.TimeoutExpired:
                process.force_kill()
                returncode = process.wait(timeout=5)
                self._emit(EventKind.FAULT, camera_id,
                           "publisher ignored graceful stop; killed")
            self._emit(EventKind.STREAM_EXITED, camera_id,
                       f"closed; exit code {returncode}")

    def plug_flow(self, camera_id: int, raw_url: str) -> CameraState:
        """Publish one camera to a network target, releasing its preview."""
        with self._lock:
            device_name = self._require_bound(camera_id)
            slot = self._slot(camera_id)
            if slot.phase is Phase.STREAMING:
                raise StreamingConflict(
                    f"camera {camera_id} is already streaming", camera_id=camera_id)
            target = analyze_url(raw_url)
            if slot.phase is Phase.PREVIEWING:
                self._stop_preview_locked(camera_id, slot, keep_frozen=True)
                slot.phase = Phase.IDLE
            command = synthesize_publish_command(
                CameraBinding(camera_id, device_name), target,
                self._capture_settings(camera_id, device_name))
            try:
                process = self._spawner(command.argv)
            except SpawnFailure as exc:
                slot.phase = Phase.ERROR
                slot.last_error = str(exc)
                self._emit(EventKind.FAULT, camera_id, str(exc))
                raise
            slot.phase = Phase.STREAMING
            slot.target = target
            slot.process = process
            slot.last_error = None
            process.watch(partial(self._on_publish_exit, camera_id, process))
            self._emit(EventKind.STREAM_STARTED, camera_id, target.raw)
            logger.info("camera %d publishing to %s", camera_id, target.raw)
            if self._store is not None:
                try:
                    self._store.set_plugflow_url(camera_id, target.raw)
                except Exception as exc:
                    self._terminate_locked(camera_id, slot,
                                           "persist failed, stream aborted")
                    slot.phase = Phase.ERROR
                    slot.last_error = str(exc)
                    raise
            return self._state_of(camera_id, slot)

    def stop_flow(self, camera_id: int) -> CameraState:
        """Terminate one camera's publisher; preview is not auto-resumed."""
        with self._lock:
            self._require_bound(camera_id)
            slot = self._slot(camera_id)
            if slot.phase is not Phase.STREAMING:
                raise NotStreaming(f"camera {camera_id} is not streaming",
                                   camera_id=camera_id)
            self._terminate_locked(camera_id, slot, "stopped by operator")
            return self._state_of(camera_id, slot)

    def poll_events(self, since: int = 0) -> list[SupervisorEvent]:
        """Events with timestamp strictly after `since`, in order."""
        with self._lock:
            return [e for e in self._events if e.timestamp > since]

    # -- notifications and reads ------------------------------------------

    def _on_publish_exit(self, camera_id: int, process, returncode: int,
                         stderr_tail: str):
        with self._lock:
            slot = self._slots.get(camera_id)
            if slot is None or slot.process is not process:
                return  # already handled by stop_flow/close_all
            slot.process = None
            slot.target = None
            slot.frozen_jpeg = None
            if returncode == 0:
                slot.phase = Phase.IDLE
            else:
                slot.phase = Phase.ERROR
                slot.last_error = stderr_tail or f"publisher exit code {returncode}"
                logger.warning("camera %d publisher exited with code %d",
                               camera_id, returncode)
            self._emit(EventKind.STREAM_EXITED, camera_id,
                       f"exit code {returncode}")

    def _on_preview_fault(self, camera_id: int, error):
        with self._lock:
            slot = self._slots.get(camera_id)
            if slot is None or slot.pipeline is None:
                return
            pipeline = slot.pipeline
            slot.pipeline = None
            slot.phase = Phase.ERROR
            slot.last_error = str(error)
            self._emit(EventKind.FAULT, camera_id, str(error))
        # Outside the lock: the fault may originate from the pipeline's own
        # reader thread, and stop() joins it.
        pipeline.stop()

    def state(self, camera_id: int) -> CameraState:
        with self._lock:
            self._require_bound(camera_id)
            return self._state_of(camera_id, self._slot(camera_id))

    def states(self) -> list[CameraState]:
        with self._lock:
            return [self._state_of(b.camera_id, self._slot(b.camera_id))
                    for b in self._registry.snapshot()]

    def phase_map(self) -> dict[int, Phase]:
        with self._lock:
            slots = self._slots
            return {camera_id: (slots[camera_id].phase if camera_id in slots
                                else Phase.IDLE)
                    for camera_id in self._registry.bound_ids()}

    def exclusivity_violations(self) -> list[int]:
        """Cameras holding both a preview capture and a publish process."""
        with self._lock:
            return [camera_id for camera_id, slot in self._slots.items()
                    if slot.pipeline is not None and slot.process is not None]

    def _placeholder_tile(self) -> bytes:
        if self._placeholder_jpeg is None:
            width, height = self._tile_dims(1)
            gray = RawFrame(width, height, PixelFormat.BGR24,
                            b"\x50" * (width * height * 3))
            self._placeholder_jpeg = encode_preview_tile(gray, 70)
        return self._placeholder_jpeg

    def preview_channel(self, camera_id: int):
        """("live", pipeline) for previews, ("frozen", jpeg) while streaming."""
        with self._lock:
            self._require_bound(camera_id)
            slot = self._slot(camera_id)
            if slot.phase is Phase.PREVIEWING and slot.pipeline is not None:
                return ("live", slot.pipeline)
            if slot.phase is Phase.STREAMING:
                return ("frozen", slot.frozen_jpeg or self._placeholder_tile())
            raise NotShowing(
                f"camera {camera_id} is {slot.phase.value}, not showing",
                camera_id=camera_id)
