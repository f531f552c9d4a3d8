"""camgrid: multi-camera monitoring and streaming orchestrator.

Enumerates capture devices, previews them in an auto-computed grid, and
publishes any subset over UDP, RTP or TCP by synthesizing and
supervising media-toolchain subprocesses.
"""

__version__ = "0.1.0"

from .devices import (CameraBinding, CameraRegistry, DeviceKind, DeviceRecord,
                      list_devices, parse_device_listing)
from .layout import GridLayout, LayoutParams, compute_layout, scroll_extent
from .supervisor import CameraState, Phase, StreamSupervisor, SupervisorEvent
from .urls import (Protocol, StreamCommand, StreamTarget, analyze_url,
                   render_target, synthesize_play_command,
                   synthesize_publish_command)

__all__ = [
    "__version__",
    "CameraBinding", "CameraRegistry", "DeviceKind", "DeviceRecord",
    "list_devices", "parse_device_listing",
    "GridLayout", "LayoutParams", "compute_layout", "scroll_extent",
    "CameraState", "Phase", "StreamSupervisor", "SupervisorEvent",
    "Protocol", "StreamCommand", "StreamTarget", "analyze_url",
    "render_target", "synthesize_play_command", "synthesize_publish_command",
]
