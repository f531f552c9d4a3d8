"""HTTP surface: console actions, camera resources, MJPEG previews.

Thin translation layer over the registry, supervisor and config store.
Handlers run on the threading HTTP server; every mutation goes through
the supervisor's serialized interface, so concurrent requests are safe.
Each package error maps to exactly one wire code and status.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import re
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from . import __version__
from .config import ConfigStore
from .devices import CameraRegistry
from .errors import (BindFailure, CamgridError, NotShowing, ParseFailure,
                     ToolchainMissing)
from .layout import (DEFAULT_ADJUST, DEFAULT_ADJUST_W_H, DEFAULT_MAX_COLUMNS,
                     LayoutParams, compute_layout)
from .supervisor import StreamSupervisor
from .urls import VIRTUAL_DEVICE_PREFIX

logger = logging.getLogger(__name__)

DEFAULT_BIND = "127.0.0.1:8750"
MJPEG_BOUNDARY = "camgridframe"
FROZEN_REFRESH_S = 1.0

# Wire status for every error code; 4xx are caller faults, 5xx are
# spawn/IO faults on our side of the wire.
ERROR_STATUS = {
    "bad_request": 400,
    "unknown_camera": 404,
    "streaming_conflict": 409,
    "not_streaming": 409,
    "not_showing": 409,
    "unsupported_protocol": 422,
    "malformed_url": 422,
    "empty_camera_set": 422,
    "toolchain_missing": 503,
    "parse_failure": 502,
    "spawn_failure": 502,
    "io_failure": 500,
    "config_corrupt": 500,
    "wrong_pixel_format": 500,
    "frame_sync_lost": 500,
    "bind_failure": 500,
    "internal": 500,
}


class BadRequest(CamgridError):
    code = "bad_request"


class App:
    """Wired-together service components plus the HTTP routing table."""

    def __init__(self, registry: CameraRegistry, supervisor: StreamSupervisor,
                 store: ConfigStore, layout_params: LayoutParams,
                 static_dir: Path | None = None):
        self.registry = registry
        self.supervisor = supervisor
        self.store = store
        self.layout_params = layout_params
        self.static_dir = static_dir

    def layout_for_width(self, screen_width: int | None) -> LayoutParams:
        base = self.layout_params
        if screen_width is None or screen_width < 1:
            return base
        return LayoutParams(screen_width=screen_width, adjust=base.adjust,
                            adjust_w_h=base.adjust_w_h,
                            max_columns=base.max_columns)


def build_app(config_dir, toolchain_path: str | None = None,
              virtual_cameras: int = 0, max_columns: int | None = None,
              screen_width: int = 1920, grace_period: float = 3.0,
              static_dir=None, mirror_preview: bool | dict[int, bool] = True,
              preview_factory=None, spawner=None, lister=None) -> App:
    """Construct the service: restore persisted state, wire components."""
    store = ConfigStore(config_dir)
    config = store.load()
    overrides = config.layout_overrides
    params = LayoutParams(
        screen_width=screen_width,
        adjust=(overrides.adjust if overrides and overrides.adjust
                else DEFAULT_ADJUST),
        adjust_w_h=(overrides.adjust_w_h if overrides and overrides.adjust_w_h
                    else DEFAULT_ADJUST_W_H),
        max_columns=(max_columns if max_columns is not None
                     else (overrides.max_columns if overrides and
                           overrides.max_columns else DEFAULT_MAX_COLUMNS)),
    )
    registry = CameraRegistry(store=store, toolchain_path=toolchain_path,
                              lister=lister)
    for index in range(virtual_cameras):
        registry.bind_camera(index, f"{VIRTUAL_DEVICE_PREFIX}{index}")
    try:
        registry.refresh_devices()
    except (ToolchainMissing, ParseFailure) as exc:
        logger.warning("device enumeration unavailable at boot: %s", exc)
    supervisor = StreamSupervisor(
        registry, config_store=store, toolchain_path=toolchain_path,
        layout_params=params, grace_period=grace_period,
        mirror_preview=mirror_preview,
        preview_factory=preview_factory, spawner=spawner)
    return App(registry, supervisor, store, params,
               static_dir=Path(static_dir) if static_dir else None)


def _device_json(record):
    return {"name": record.name, "kind": record.kind.value,
            "platform_hint": record.platform_hint}


def _state_json(state):
    return {
        "camera_id": state.camera_id,
        "phase": state.phase.value,
        "publish_url": state.publish_target.raw if state.publish_target else None,
        "last_error": state.last_error,
    }


def _event_json(event):
    return {"kind": event.kind.value, "camera_id": event.camera_id,
            "detail": event.detail, "timestamp": event.timestamp}


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "camgrid"

    # -- plumbing ---------------------------------------------------------

    @property
    def app(self) -> App:
        return self.server.app

    def log_message(self, format, *args):
        logger.debug("%s %s", self.address_string(), format % args)

    def _send_json(self, status: int, payload: dict):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_payload(self, error: CamgridError):
        status = ERROR_STATUS.get(error.code, 500)
        self._send_json(status, {"error": {
            "code": error.code,
            "message": str(error),
            "camera_id": error.camera_id,
        }})

    def _read_json_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise BadRequest("missing request body")
        try:
            parsed = json.loads(raw)
        except ValueError as exc:
            raise BadRequest(f"invalid JSON body: {exc}") from exc
        if not isinstance(parsed, dict):
            raise BadRequest("request body must be a JSON object")
        return parsed

    def _dispatch(self, method: str):
        split = urlsplit(self.path)
        query = parse_qs(split.query)
        try:
            for route_method, pattern, handler in ROUTES:
                if route_method != method:
                    continue
                match = pattern.match(split.path)
                if match:
                    handler(self, match, query)
                    return
            raise BadRequest(f"no route for {method} {split.path}")
        except CamgridError as exc:
            self._send_error_payload(exc)
        except (BrokenPipeError, ConnectionResetError):
            pass
        except Exception:
            logger.exception("unhandled error for %s %s", method, self.path)
            self._send_error_payload(CamgridError("internal error"))

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    def do_DELETE(self):
        self._dispatch("DELETE")

    # -- endpoints --------------------------------------------------------

    def h_devices(self, match, query):
        records = self.app.registry.devices()
        self._send_json(200, {"devices": [_device_json(r) for r in records],
                              "devices_known": self.app.registry.devices_known})

    def h_devices_refresh(self, match, query):
        records = self.app.registry.refresh_devices()
        self._send_json(200, {"devices": [_device_json(r) for r in records],
                              "devices_known": True})

    def h_cameras(self, match, query):
        states = {s.camera_id: s for s in self.app.supervisor.states()}
        saved = self.app.store.load().plugflow
        cameras = []
        for binding, stale in self.app.registry.snapshot_status():
            state = states.get(binding.camera_id)
            entry = {
                "camera_id": binding.camera_id,
                "device_name": binding.device_name,
                "stale": stale,
                "saved_url": saved.get(binding.camera_id),
            }
            if state is not None:
                entry.update(_state_json(state))
            cameras.append(entry)
        self._send_json(200, {"cameras": cameras})

    def h_bind_camera(self, match, query):
        body = self._read_json_body()
        device_name = body.get("device_name")
        if not isinstance(device_name, str) or not device_name:
            raise BadRequest("device_name must be a non-empty string")
        binding = self.app.registry.bind_camera(int(match.group(1)), device_name)
        self._send_json(200, {"camera_id": binding.camera_id,
                              "device_name": binding.device_name})

    def h_show_all(self, match, query):
        states = self.app.supervisor.show_all()
        self._send_json(200, {"states": [_state_json(s) for s in states]})

    def h_show_one(self, match, query):
        state = self.app.supervisor.show_one(int(match.group(1)))
        self._send_json(200, _state_json(state))

    def h_close_all(self, match, query):
        self.app.supervisor.close_all()
        self._send_json(200, {"ok": True})

    def h_plug_flow(self, match, query):
        body = self._read_json_body()
        url = body.get("url")
        if not isinstance(url, str) or not url:
            raise BadRequest("url must be a non-empty string")
        state = self.app.supervisor.plug_flow(int(match.group(1)), url)
        self._send_json(200, _state_json(state))

    def h_stop_flow(self, match, query):
        state = self.app.supervisor.stop_flow(int(match.group(1)))
        self._send_json(200, _state_json(state))

    def h_layout(self, match, query):
        width = None
        if "width" in query:
            try:
                width = int(query["width"][0])
            except ValueError as exc:
                raise BadRequest("width must be an integer") from exc
        params = self.app.layout_for_width(width)
        bound = [b.camera_id for b in self.app.registry.snapshot()]
        if not bound:
            self._send_json(200, {"tile_width": 0, "tile_height": 0,
                                  "rows": 0, "placements": [],
                                  "max_columns": params.max_columns})
            return
        grid = compute_layout(bound, params)
        self._send_json(200, {
            "tile_width": grid.tile_width,
            "tile_height": grid.tile_height,
            "rows": grid.rows,
            "max_columns": params.max_columns,
            "placements": [
                {"camera_id": camera_id, "row": row, "col": col}
                for camera_id, row, col in grid.placements
            ],
        })

    def h_events(self, match, query):
        since = 0
        if "since" in query:
            try:
                since = int(query["since"][0])
            except ValueError as exc:
                raise BadRequest("since must be an integer") from exc
        events = self.app.supervisor.poll_events(since)
        self._send_json(200, {"now": self.app.supervisor.now_ms(),
                              "events": [_event_json(e) for e in events]})

    def h_about(self, match, query):
        self._send_json(200, {
            "name": "camgrid",
            "version": __version__,
            "protocols": ["udp", "rtp", "tcp"],
        })

    def h_preview_mjpeg(self, match, query):
        camera_id = int(match.group(1))
        supervisor = self.app.supervisor
        # Raises UnknownCamera / NotShowing before headers go out.
        channel = supervisor.preview_channel(camera_id)
        self.send_response(200)
        self.send_header("Content-Type",
                         f"multipart/x-mixed-replace; boundary={MJPEG_BOUNDARY}")
        self.send_header("Cache-Control", "no-cache, no-store")
        self.end_headers()
        last_seq = -1
        try:
            while True:
                kind, payload = channel
                if kind == "live":
                    result = payload.wait_for_frame(last_seq, timeout=2.0)
                    if result is not None:
                        jpeg, last_seq = result
                        self._write_part(jpeg)
                else:
                    self._write_part(payload)
                    time.sleep(FROZEN_REFRESH_S)
                channel = supervisor.preview_channel(camera_id)
        except (NotShowing, BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.close_connection = True

    def _write_part(self, jpeg: bytes):
        self.wfile.write(
            f"--{MJPEG_BOUNDARY}\r\n"
            f"Content-Type: image/jpeg\r\n"
            f"Content-Length: {len(jpeg)}\r\n\r\n".encode("ascii"))
        self.wfile.write(jpeg)
        self.wfile.write(b"\r\n")
        self.wfile.flush()

    def h_static(self, match, query):
        path = urlsplit(self.path).path
        if path == "/":
            path = "/index.html"
        static_dir = self.app.static_dir
        if static_dir is not None:
            candidate = (static_dir / path.lstrip("/")).resolve()
            if candidate.is_file() and candidate.is_relative_to(static_dir.resolve()):
                body = candidate.read_bytes()
                content_type = (mimetypes.guess_type(candidate.name)[0]
                                or "application/octet-stream")
                self.send_response(200)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
                return
        if path == "/index.html":
            body = _FALLBACK_PAGE.encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "text/html; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        raise BadRequest(f"no such asset: {path}")


_FALLBACK_PAGE = """<!DOCTYPE html>
<html><head><title>camgrid</title></head>
<body><h1>camgrid</h1>
<p>The web console assets are not built. API endpoints:</p>
<ul>
<li>GET /devices, POST /devices/refresh</li>
<li>GET /cameras, PUT /cameras/{id}</li>
<li>POST /actions/show-all, /actions/show-one/{id}, /actions/close-all</li>
<li>POST /cameras/{id}/plugflow, DELETE /cameras/{id}/plugflow</li>
<li>GET /cameras/{id}/preview.mjpeg, GET /layout, GET /events, GET /about</li>
</ul></body></html>
"""

ROUTES = [
    ("GET", re.compile(r"^/devices$"), ApiHandler.h_devices),
    ("POST", re.compile(r"^/devices/refresh$"), ApiHandler.h_devices_refresh),
    ("GET", re.compile(r"^/cameras$"), ApiHandler.h_cameras),
    ("PUT", re.compile(r"^/cameras/(\d+)$"), ApiHandler.h_bind_camera),
    ("POST", re.compile(r"^/actions/show-all$"), ApiHandler.h_show_all),
    ("POST", re.compile(r"^/actions/show-one/(\d+)$"), ApiHandler.h_show_one),
    ("POST", re.compile(r"^/actions/close-all$"), ApiHandler.h_close_all),
    ("POST", re.compile(r"^/cameras/(\d+)/plugflow$"), ApiHandler.h_plug_flow),
    ("DELETE", re.compile(r"^/cameras/(\d+)/plugflow$"), ApiHandler.h_stop_flow),
    ("GET", re.compile(r"^/cameras/(\d+)/preview\.mjpeg$"),
     ApiHandler.h_preview_mjpeg),
    ("GET", re.compile(r"^/layout$"), ApiHandler.h_layout),
    ("GET", re.compile(r"^/events$"), ApiHandler.h_events),
    ("GET", re.compile(r"^/about$"), ApiHandler.h_about),
    ("GET", re.compile(r"^/(?!cameras|devices|actions|layout|events|about).*"),
     ApiHandler.h_static),
]


class ApiServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, app: App):
        self.app = app
        super().__init__(address, ApiHandler)


def parse_bind_addr(bind_addr: str) -> tuple[str, int]:
    host, colon, port_text = bind_addr.rpartition(":")
    if not colon or not (port_text.isascii() and port_text.isdigit()):
        raise BindFailure(f"bind address must be host:port, got {bind_addr!r}")
    return host or "127.0.0.1", int(port_text)


def serve(bind_addr: str, app: App) -> ApiServer:
    """Bind the service; caller runs serve_forever on the result."""
    host, port = parse_bind_addr(bind_addr)
    try:
        return ApiServer((host, port), app)
    except OSError as exc:
        raise BindFailure(f"cannot bind {bind_addr}: {exc}") from exc
