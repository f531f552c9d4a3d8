"""Streaming URL analysis and toolchain command synthesis.

The analyzer decides which of the three supported transports (UDP, RTP,
TCP) a target URL names, and the synthesizers turn a camera binding plus
a target into the exact argument vector for the publisher (ffmpeg) or a
playback verifier (ffplay).

Command template table
----------------------
Publish (ffmpeg argv, executable excluded):

    <input flags>                         capture source, see _input_args()
    -c:v libx264 -preset ultrafast -tune zerolatency
                                          low-latency encode; bitrate/GOP
                                          left at encoder defaults
    UDP:  -f mpegts  udp://HOST:PORT
    TCP:  -f mpegts  tcp://HOST:PORT?listen=1   (publisher listens,
                                          player connects as a client)
    RTP:  -f rtp     rtp://HOST:PORT

Play (ffplay argv):

    UDP/TCP:  -x W -y H  <url>
    RTP:      -x W -y H  -protocol_whitelist file,udp,rtp  -i <url>

The whitelist tokens are comma-separated with no spaces: space-padded
tokens survive shell quoting in docs but are rejected by the toolchain
when passed as a single argv element.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from enum import Enum

from .errors import MalformedUrl, UnsupportedProtocol


class Protocol(Enum):
    UDP = "udp"
    RTP = "rtp"
    TCP = "tcp"


class CommandRole(Enum):
    PUBLISH = "publish"
    PLAY = "play"


# Device names with this prefix are synthetic test-pattern sources.
VIRTUAL_DEVICE_PREFIX = "virtual:"

_SUPPORTED_SCHEMES = {p.value: p for p in Protocol}


@dataclass(frozen=True)
class StreamTarget:
    """A parsed plug-flow destination."""

    protocol: Protocol
    host: str
    port: int
    raw: str

    def __post_init__(self):
        if not self.host:
            raise MalformedUrl("empty host")
        if not 1 <= self.port <= 65535:
            raise MalformedUrl(f"port {self.port} out of range")
        if not self.raw.startswith(self.protocol.value + "://"):
            raise MalformedUrl(f"raw does not start with {self.protocol.value}://")


@dataclass(frozen=True)
class StreamCommand:
    """Argument vector for a toolchain executable (name excluded)."""

    argv: tuple[str, ...]
    role: CommandRole

    def __post_init__(self):
        if not self.argv:
            raise ValueError("empty argv")


def analyze_url(raw: str) -> StreamTarget:
    """Parse a plug-flow URL into protocol, host and port.

    Total over arbitrary strings: any input either returns a target or
    raises UnsupportedProtocol / MalformedUrl.
    """
    sep = raw.find("://")
    if sep < 0:
        raise MalformedUrl(f"missing '://' separator in {raw!r}")
    scheme = raw[:sep].lower()
    protocol = _SUPPORTED_SCHEMES.get(scheme)
    if protocol is None:
        raise UnsupportedProtocol(
            f"scheme {raw[:sep]!r} not one of udp, rtp, tcp"
        )
    rest = raw[sep + 3 :]
    host, colon, port_text = rest.rpartition(":")
    if not colon:
        raise MalformedUrl(f"missing port in {raw!r}")
    if not host:
        raise MalformedUrl(f"empty host in {raw!r}")
    # isdigit alone admits non-decimal digits like '²' that int() rejects
    if not (port_text.isascii() and port_text.isdigit()):
        raise MalformedUrl(f"non-numeric port {port_text!r}")
    port = int(port_text)
    if not 1 <= port <= 65535:
        raise MalformedUrl(f"port {port} out of range")
    # Scheme case is normalized so the stored URL starts with the
    # canonical lowercase scheme; everything after '://' is verbatim.
    return StreamTarget(protocol=protocol, host=host, port=port, raw=scheme + "://" + rest)


def render_target(protocol: Protocol, host: str, port: int) -> str:
    """Canonical URL string for a target; inverse of analyze_url."""
    return f"{protocol.value}://{host}:{port}"


def capture_input_args(device_name: str, width: int, height: int, frame_rate: int,
                platform: str) -> list[str]:
    """Capture-input flags for the publisher, by device and platform."""
    if device_name.startswith(VIRTUAL_DEVICE_PREFIX):
        return [
            "-f", "lavfi",
            "-i", f"testsrc=size={width}x{height}:rate={frame_rate}",
        ]
    size = f"{width}x{height}"
    rate = str(frame_rate)
    if platform.startswith("win"):
        return ["-f", "dshow", "-framerate", rate, "-video_size", size,
                "-i", f"video={device_name}"]
    if platform == "darwin":
        return ["-f", "avfoundation", "-framerate", rate, "-video_size", size,
                "-i", device_name]
    return ["-f", "v4l2", "-framerate", rate, "-video_size", size,
            "-i", device_name]


_ENCODE_ARGS = ["-c:v", "libx264", "-preset", "ultrafast", "-tune", "zerolatency"]


def synthesize_publish_command(device, target: StreamTarget, caps,
                               platform: str | None = None) -> StreamCommand:
    """Build the ffmpeg argv that publishes `device` to `target`.

    Deterministic: identical inputs yield identical argv. The last
    element is always the output URL.
    """
    if platform is None:
        platform = sys.platform
    argv = ["-hide_banner", "-loglevel", "error"]
    argv += capture_input_args(device.device_name, caps.width, caps.height,
                        caps.frame_rate, platform)
    argv += _ENCODE_ARGS
    url = render_target(target.protocol, target.host, target.port)
    if target.protocol is Protocol.UDP:
        argv += ["-f", "mpegts", url]
    elif target.protocol is Protocol.TCP:
        argv += ["-f", "mpegts", url + "?listen=1"]
    else:
        argv += ["-f", "rtp", url]
    return StreamCommand(argv=tuple(argv), role=CommandRole.PUBLISH)


def synthesize_play_command(target: StreamTarget, width: int, height: int) -> StreamCommand:
    """Build the ffplay argv that verifies playback of `target`."""
    if width <= 0 or height <= 0:
        raise ValueError("window dimensions must be positive")
    url = render_target(target.protocol, target.host, target.port)
    argv = ["-x", str(width), "-y", str(height)]
    if target.protocol is Protocol.RTP:
        argv += ["-protocol_whitelist", "file,udp,rtp", "-i", url]
    else:
        argv += [url]
    return StreamCommand(argv=tuple(argv), role=CommandRole.PLAY)
