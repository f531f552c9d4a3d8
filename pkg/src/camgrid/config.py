"""Persisted configuration: camera bindings and per-camera plug-flow URLs.

Two JSON documents live under the config directory, `cameras.json` and
`plugflow.json`, each a flat object mapping decimal camera-ID strings to
a device name or a streaming URL. Optional layout overrides go to
`layout.json`. Writes are atomic (write-then-rename) and byte
deterministic: keys sorted numerically, two-space indent, UTF-8 with
non-ASCII preserved verbatim.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigCorrupt, IoFailure

CAMERAS_FILE = "cameras.json"
PLUGFLOW_FILE = "plugflow.json"
LAYOUT_FILE = "layout.json"
DEFAULT_CONFIG_DIR = Path("./config")


@dataclass(frozen=True)
class LayoutOverrides:
    adjust: float | None = None
    adjust_w_h: float | None = None
    max_columns: int | None = None


@dataclass
class PersistedConfig:
    cameras: dict[int, str] = field(default_factory=dict)
    plugflow: dict[int, str] = field(default_factory=dict)
    layout_overrides: LayoutOverrides | None = None


def _dump_id_map(mapping: dict[int, str]) -> str:
    ordered = {str(k): mapping[k] for k in sorted(mapping)}
    return json.dumps(ordered, indent=2, ensure_ascii=False) + "\n"


def _atomic_write(path: Path, text: str):
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except OSError:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def save_config(config: PersistedConfig, config_dir) -> None:
    """Write the config documents under `config_dir`, creating it if needed."""
    directory = Path(config_dir)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        _atomic_write(directory / CAMERAS_FILE, _dump_id_map(config.cameras))
        _atomic_write(directory / PLUGFLOW_FILE, _dump_id_map(config.plugflow))
        if config.layout_overrides is not None:
            overrides = {
                key: value
                for key, value in (
                    ("adjust", config.layout_overrides.adjust),
                    ("adjust_w_h", config.layout_overrides.adjust_w_h),
                    ("max_columns", config.layout_overrides.max_columns),
                )
                if value is not None
            }
            _atomic_write(directory / LAYOUT_FILE,
                          json.dumps(overrides, indent=2, ensure_ascii=False) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write config under {directory}: {exc}") from exc


def _load_id_map(path: Path) -> dict[int, str]:
    if not path.exists():
        return {}
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigCorrupt(f"{path.name}: {exc}", path=path) from exc
    if not isinstance(raw, dict):
        raise ConfigCorrupt(f"{path.name}: expected a JSON object", path=path)
    result = {}
    for key, value in raw.items():
        if (not (key.isascii() and key.isdigit())
                or not isinstance(value, str) or not value):
            raise ConfigCorrupt(
                f"{path.name}: bad entry {key!r}: {value!r}", path=path
            )
        result[int(key)] = value
    return result


def load_config(config_dir) -> PersistedConfig:
    """Read persisted config; missing files mean a first run (empty maps)."""
    directory = Path(config_dir)
    cameras = _load_id_map(directory / CAMERAS_FILE)
    plugflow = _load_id_map(directory / PLUGFLOW_FILE)
    overrides = None
    layout_path = directory / LAYOUT_FILE
    if layout_path.exists():
        try:
            raw = json.loads(layout_path.read_text(encoding="utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise ConfigCorrupt(f"{layout_path.name}: {exc}", path=layout_path) from exc
        if not isinstance(raw, dict):
            raise ConfigCorrupt(f"{layout_path.name}: expected a JSON object",
                                path=layout_path)
        overrides = LayoutOverrides(
            adjust=raw.get("adjust"),
            adjust_w_h=raw.get("adjust_w_h"),
            max_columns=raw.get("max_columns"),
        )
    return PersistedConfig(cameras=cameras, plugflow=plugflow,
                           layout_overrides=overrides)


class ConfigStore:
    """Single-writer view over one config directory.

    Mutations are read-modify-write under a lock; concurrent loads are
    safe whenever no writer is active.
    """

    def __init__(self, config_dir):
        self.config_dir = Path(config_dir)
        self._lock = threading.Lock()

    def load(self) -> PersistedConfig:
        return load_config(self.config_dir)

    def save(self, config: PersistedConfig) -> None:
        with self._lock:
            save_config(config, self.config_dir)

    def update_cameras(self, cameras: dict[int, str]) -> None:
        with self._lock:
            config = load_config(self.config_dir)
            config.cameras = dict(cameras)
            save_config(config, self.config_dir)

    def set_plugflow_url(self, camera_id: int, url: str | None) -> None:
        with self._lock:
            config = load_config(self.config_dir)
            if url is None:
                config.plugflow.pop(camera_id, None)
            else:
                config.plugflow[camera_id] = url
            save_config(config, self.config_dir)
