"""Media device enumeration and the camera ID ↔ device name registry.

Devices are discovered by running the media toolchain in its listing
mode and parsing the diagnostic output. Three listing grammars are
recognized: the directshow inline form (`"Name" (video)`), the older
sectioned directshow/avfoundation form (a kind header followed by
entries), and the `-sources` form used on Linux. Unknown lines are
skipped silently.

Camera IDs are operator-assigned labels. Binding to a device that is
currently absent is legal (hot-plug makes absence transient); such
bindings are flagged stale in status snapshots once a device listing
is available to compare against.
"""

from __future__ import annotations

import logging
import os
import re
import shutil
import subprocess
import sys
import threading
from dataclasses import dataclass
from enum import Enum

from .config import ConfigStore
from .errors import ParseFailure, ToolchainMissing
from .urls import VIRTUAL_DEVICE_PREFIX

logger = logging.getLogger(__name__)

TOOLCHAIN_ENV_VAR = "CAMGRID_FFMPEG"
_LIST_TIMEOUT_S = 15


class DeviceKind(Enum):
    VIDEO = "video"
    AUDIO = "audio"


@dataclass(frozen=True)
class DeviceRecord:
    name: str
    kind: DeviceKind
    platform_hint: str = ""

    def __post_init__(self):
        if not self.name:
            raise ValueError("device name must be non-empty")


@dataclass(frozen=True)
class CameraBinding:
    camera_id: int
    device_name: str

    def __post_init__(self):
        if self.camera_id < 0:
            raise ValueError("camera_id must be non-negative")
        if not self.device_name:
            raise ValueError("device_name must be non-empty")


# "[dshow @ 0x...]  "Name" (video)"; greedy name keeps embedded quotes intact.
_DSHOW_INLINE = re.compile(
    r'^\[(?P<hint>[^\s@\]]+)[^\]]*\]\s*"(?P<name>.*)"\s*\((?P<kind>video|audio)\)\s*$'
)
# "[dshow @ 0x...] DirectShow video devices ..." section header.
_DSHOW_SECTION = re.compile(
    r"^\[(?P<hint>[^\s@\]]+)[^\]]*\]\s*DirectShow (?P<kind>video|audio) devices"
)
# "[AVFoundation indev @ 0x...] AVFoundation video devices:"
_AVF_SECTION = re.compile(
    r"^\[(?P<hint>[^\s@\]]+)[^\]]*\]\s*AVFoundation (?P<kind>video|audio) devices"
)
# Bare quoted entry inside a dshow section.
_QUOTED_ENTRY = re.compile(r'^\[[^\]]*\]\s*"(?P<name>.*)"\s*$')
# "[AVFoundation indev @ 0x...] [0] FaceTime HD Camera"
_INDEXED_ENTRY = re.compile(r"^\[[^\]]*\]\s*\[\d+\]\s(?P<name>.+)$")
# "Auto-detected sources for video4linux2,v4l2:"
_SOURCES_HEADER = re.compile(r"^Auto-detected sources for (?P<api>[^:]+):\s*$")
# "* /dev/video0 [HP Webcam]" (leading '*' marks the default device)
_SOURCES_ENTRY = re.compile(r"^[* ] (?P<name>\S+)(?: \[(?P<desc>.*)\])?\s*$")

_AUDIO_APIS = {"alsa", "pulse", "oss", "sndio", "openal", "jack"}


def _sources_kind(api: str) -> DeviceKind:
    tokens = {t.strip() for t in api.lower().split(",")}
    if tokens & _AUDIO_APIS:
        return DeviceKind.AUDIO
    return DeviceKind.VIDEO


def parse_device_listing(raw_output: str) -> list[DeviceRecord]:
    """Extract device records from toolchain listing output.

    Pure and total: any text yields a (possibly empty) record list, or
    ParseFailure when no device line matched and no listing header is
    present either.
    """
    records: list[DeviceRecord] = []
    header_seen = False
    section: tuple[str, DeviceKind] | None = None
    for line in raw_output.splitlines():
        inline = _DSHOW_INLINE.match(line)
        if inline and inline.group("name"):
            records.append(DeviceRecord(
                name=inline.group("name"),
                kind=DeviceKind(inline.group("kind")),
                platform_hint=inline.group("hint"),
            ))
            continue
        for header in (_DSHOW_SECTION, _AVF_SECTION):
            m = header.match(line)
            if m:
                header_seen = True
                section = (m.group("hint"), DeviceKind(m.group("kind")))
                break
        else:
            m = _SOURCES_HEADER.match(line)
            if m:
                header_seen = True
                section = (m.group("api").strip(), _sources_kind(m.group("api")))
                continue
            if section is None or "Alternative name" in line:
                continue
            hint, kind = section
            if line.startswith("["):
                entry = _QUOTED_ENTRY.match(line) or _INDEXED_ENTRY.match(line)
            else:
                entry = _SOURCES_ENTRY.match(line)
            if entry and entry.group("name"):
                records.append(DeviceRecord(
                    name=entry.group("name"), kind=kind, platform_hint=hint
                ))
            continue
    if not records and not header_seen:
        raise ParseFailure("no device lines and no listing header found",
                           raw_output=raw_output)
    return records


def resolve_toolchain(explicit_path: str | None = None) -> str:
    """Locate the media toolchain executable.

    Resolution order: explicit path, CAMGRID_FFMPEG, then the search
    path. Raises ToolchainMissing when nothing usable is found.
    """
    candidates = [explicit_path, os.environ.get(TOOLCHAIN_ENV_VAR)]
    for candidate in candidates:
        if not candidate:
            continue
        resolved = shutil.which(candidate) or (
            candidate if os.path.isfile(candidate) and os.access(candidate, os.X_OK)
            else None
        )
        if resolved:
            return resolved
        raise ToolchainMissing(f"configured toolchain not executable: {candidate}")
    found = shutil.which("ffmpeg")
    if found:
        return found
    raise ToolchainMissing("ffmpeg not found on PATH; set --toolchain-path "
                           f"or {TOOLCHAIN_ENV_VAR}")


def _listing_invocations() -> list[list[str]]:
    if sys.platform.startswith("win"):
        return [["-hide_banner", "-list_devices", "true", "-f", "dshow", "-i", "dummy"]]
    if sys.platform == "darwin":
        return [["-hide_banner", "-f", "avfoundation", "-list_devices", "true", "-i", ""]]
    return [["-hide_banner", "-sources", "v4l2"],
            ["-hide_banner", "-sources", "alsa"]]


def list_devices(toolchain_path: str | None = None) -> list[DeviceRecord]:
    """Enumerate capture devices via the toolchain's listing mode."""
    executable = resolve_toolchain(toolchain_path)
    chunks = []
    for args in _listing_invocations():
        try:
            result = subprocess.run(
                [executable] + args,
                capture_output=True, text=True, errors="replace",
                timeout=_LIST_TIMEOUT_S,
            )
        except FileNotFoundError as exc:
            raise ToolchainMissing(str(exc)) from exc
        except subprocess.TimeoutExpired as exc:
            raise ParseFailure(f"device listing timed out: {exc}") from exc
        # Listing modes exit nonzero by design (no real input is opened);
        # the diagnostics are what matters.
        chunks.append(result.stdout)
        chunks.append(result.stderr)
    return parse_device_listing("\n".join(chunks))


class CameraRegistry:
    """Shared camera ID ↔ device name map with copy-on-read snapshots."""

    def __init__(self, store: ConfigStore | None = None,
                 toolchain_path: str | None = None, lister=None):
        self._store = store
        self._toolchain_path = toolchain_path
        self._lister = lister
        self._lock = threading.Lock()
        self._bindings: dict[int, str] = {}
        self._devices: list[DeviceRecord] = []
        self._devices_known = False
        if store is not None:
            self._bindings = dict(store.load().cameras)

    @property
    def devices_known(self) -> bool:
        return self._devices_known

    def refresh_devices(self) -> list[DeviceRecord]:
        """Re-enumerate devices; reflects hot-plug changes."""
        if self._lister is not None:
            records = list(self._lister())
        else:
            records = list_devices(self._toolchain_path)
        with self._lock:
            self._devices = records
            self._devices_known = True
        return list(records)

    def devices(self) -> list[DeviceRecord]:
        with self._lock:
            return list(self._devices)

    def bind_camera(self, camera_id: int, device_name: str) -> CameraBinding:
        """Record (and persist) a binding; rebinding replaces the old one."""
        binding = CameraBinding(camera_id=camera_id, device_name=device_name)
        with self._lock:
            self._bindings[camera_id] = device_name
            bindings = dict(self._bindings)
        if self._store is not None:
            self._store.update_cameras(bindings)
        return binding

    def snapshot(self) -> list[CameraBinding]:
        """Current bindings, ascending by camera ID."""
        with self._lock:
            return [CameraBinding(camera_id, name)
                    for camera_id, name in sorted(self._bindings.items())]

    def bound_ids(self) -> list[int]:
        """Bound camera IDs, ascending; cheaper than a full snapshot."""
        with self._lock:
            return sorted(self._bindings)

    def is_stale(self, camera_id: int) -> bool:
        """True when the bound device is known to be absent right now."""
        with self._lock:
            name = self._bindings.get(camera_id)
            if name is None or name.startswith(VIRTUAL_DEVICE_PREFIX):
                return False
            if not self._devices_known:
                return False
            present = {r.name for r in self._devices if r.kind is DeviceKind.VIDEO}
            return name not in present

    def snapshot_status(self) -> list[tuple[CameraBinding, bool]]:
        """Bindings paired with their staleness flag."""
        return [(binding, self.is_stale(binding.camera_id))
                for binding in self.snapshot()]

    def device_name(self, camera_id: int) -> str | None:
        with self._lock:
            return self._bindings.get(camera_id)
