"""Command-line entrypoint.

Subcommands: `serve` runs the HTTP service, `list-media` prints the
device table, `plugflow` publishes one camera until interrupted,
`layout` prints the computed grid for a camera count.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading

from . import api
from .config import DEFAULT_CONFIG_DIR
from .devices import list_devices
from .errors import CamgridError
from .layout import (DEFAULT_ADJUST, DEFAULT_ADJUST_W_H, DEFAULT_MAX_COLUMNS,
                     LayoutParams, compute_layout)
from .urls import VIRTUAL_DEVICE_PREFIX

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camgrid",
        description="Multi-camera monitoring and streaming orchestrator.")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--bind", default=api.DEFAULT_BIND,
                       help="host:port to listen on")
    serve.add_argument("--config-dir", default=str(DEFAULT_CONFIG_DIR))
    serve.add_argument("--toolchain-path", default=None,
                       help="media toolchain executable (default: ffmpeg on PATH)")
    serve.add_argument("--virtual-cameras", type=int, default=0, metavar="N",
                       help="bind N synthetic test-pattern cameras")
    serve.add_argument("--max-columns", type=int, default=None,
                       help="grid columns per row (default 3 or config)")
    serve.add_argument("--screen-width", type=int, default=1920)
    serve.add_argument("--static-dir", default=None,
                       help="directory with built console assets")
    serve.add_argument("--no-mirror", action="store_true",
                       help="disable the horizontal preview mirror")

    listing = sub.add_parser("list-media", help="print the device table")
    listing.add_argument("--toolchain-path", default=None)

    plugflow = sub.add_parser("plugflow",
                              help="publish one camera until interrupted")
    plugflow.add_argument("--cam", type=int, required=True, metavar="N")
    plugflow.add_argument("url", help="udp://, rtp:// or tcp:// target")
    plugflow.add_argument("--config-dir", default=str(DEFAULT_CONFIG_DIR))
    plugflow.add_argument("--toolchain-path", default=None)
    plugflow.add_argument("--virtual", action="store_true",
                          help="bind the camera to a synthetic source first")

    layout = sub.add_parser("layout", help="print the computed grid")
    layout.add_argument("--n", type=int, required=True, help="camera count")
    layout.add_argument("--screen-width", type=int, default=1920)
    layout.add_argument("--max-columns", type=int, default=DEFAULT_MAX_COLUMNS)
    layout.add_argument("--adjust", type=float, default=DEFAULT_ADJUST)
    layout.add_argument("--adjust-w-h", type=float, default=DEFAULT_ADJUST_W_H)
    return parser


def _cmd_serve(args) -> int:
    app = api.build_app(
        args.config_dir,
        toolchain_path=args.toolchain_path,
        virtual_cameras=args.virtual_cameras,
        max_columns=args.max_columns,
        screen_width=args.screen_width,
        static_dir=args.static_dir,
        mirror_preview=not args.no_mirror,
    )
    server = api.serve(args.bind, app)
    host, port = server.server_address[:2]
    print(f"camgrid listening on http://{host}:{port}/", flush=True)

    def _sigterm(signum, frame):
        raise KeyboardInterrupt

    signal.signal(signal.SIGTERM, _sigterm)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        app.supervisor.close_all()
        server.server_close()
    return 0


def _cmd_list_media(args) -> int:
    records = list_devices(args.toolchain_path)
    if not records:
        print("no media devices found")
        return 0
    width = max(len(r.kind.value) for r in records)
    for record in records:
        hint = f"  [{record.platform_hint}]" if record.platform_hint else ""
        print(f"{record.kind.value:<{width}}  {record.name}{hint}")
    return 0


def _cmd_plugflow(args) -> int:
    from .config import ConfigStore
    from .devices import CameraRegistry
    from .supervisor import StreamSupervisor

    store = ConfigStore(args.config_dir)
    registry = CameraRegistry(store=store, toolchain_path=args.toolchain_path)
    if args.virtual:
        registry.bind_camera(args.cam, f"{VIRTUAL_DEVICE_PREFIX}{args.cam}")
    supervisor = StreamSupervisor(registry, config_store=store,
                                  toolchain_path=args.toolchain_path)
    state = supervisor.plug_flow(args.cam, args.url)
    print(f"camera {args.cam} streaming to {state.publish_target.raw} "
          "(Ctrl-C to stop)")
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        while not stop.is_set():
            stop.wait(0.5)
            if supervisor.state(args.cam).phase.value != "streaming":
                failed = supervisor.state(args.cam)
                print(f"publisher exited: {failed.last_error or 'done'}",
                      file=sys.stderr)
                return 1
    except KeyboardInterrupt:
        pass
    finally:
        supervisor.close_all()
    return 0


def _cmd_layout(args) -> int:
    params = LayoutParams(screen_width=args.screen_width, adjust=args.adjust,
                          adjust_w_h=args.adjust_w_h,
                          max_columns=args.max_columns)
    grid = compute_layout(range(args.n), params)
    print(f"tile {grid.tile_width}x{grid.tile_height}, "
          f"{grid.rows} row(s) of up to {params.max_columns}")
    for camera_id, row, col in grid.placements:
        print(f"  camera {camera_id}: row {row}, col {col}")
    return 0


_COMMANDS = {
    "serve": _cmd_serve,
    "list-media": _cmd_list_media,
    "plugflow": _cmd_plugflow,
    "layout": _cmd_layout,
}


def cli_main(argv=None) -> int:
    """Parse and run; returns the process exit code."""
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return _COMMANDS[args.command](args)
    except CamgridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
