"""Loopback stream probes and the protocol timing harness.

The probes receive the first bytes a publisher emits and check the
transport-level framing: MPEG-TS packets are 188 bytes with sync byte
0x47, RTP packets carry version 2 in the top bits of the first octet.
The bench measures time from publisher spawn to first received byte,
annotated against the expected speed ranking (fastest first):
UDP > RTP > TCP.
"""

from __future__ import annotations

import socket
import statistics
import time
from dataclasses import dataclass, field

from .capture import CaptureSettings
from .devices import CameraBinding
from .urls import Protocol, analyze_url, render_target, \
    synthesize_publish_command
from .supervisor import toolchain_spawner

TS_PACKET_SIZE = 188
TS_SYNC_BYTE = 0x47

# Fastest-first ranking the bench report is annotated against.
EXPECTED_SPEED_RANKING = (Protocol.UDP, Protocol.RTP, Protocol.TCP)


def open_udp_receiver(host: str = "127.0.0.1", port: int = 0) -> socket.socket:
    """Bind a datagram receiver; bind before the publisher starts."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind((host, port))
    return sock


def free_tcp_port(host: str = "127.0.0.1") -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.bind((host, 0))
        return sock.getsockname()[1]


def recv_datagram(sock: socket.socket, timeout: float) -> bytes:
    sock.settimeout(timeout)
    data, _ = sock.recvfrom(65536)
    return data


def recv_tcp_first_bytes(host: str, port: int, timeout: float,
                         retry_interval: float = 0.05,
                         min_bytes: int = 1) -> bytes:
    """Connect to a listening publisher (retrying) and read initial bytes."""
    deadline = time.monotonic() + timeout
    conn = None
    while conn is None:
        try:
            conn = socket.create_connection((host, port), timeout=retry_interval)
        except OSError:
            if time.monotonic() >= deadline:
                raise TimeoutError(f"no listener at {host}:{port} within {timeout}s")
            time.sleep(retry_interval)
    received = b""
    try:
        while len(received) < min_bytes:
            conn.settimeout(max(0.1, deadline - time.monotonic()))
            chunk = conn.recv(65536)
            if not chunk:
                break
            received += chunk
            if time.monotonic() >= deadline:
                break
        return received
    finally:
        conn.close()


def is_mpegts_aligned(data: bytes) -> bool:
    """True when sync bytes sit at every 188-byte stride position.

    A chunk may end mid-packet; every packet boundary inside the chunk
    must still carry the sync byte.
    """
    if not data:
        return False
    return all(data[i] == TS_SYNC_BYTE for i in range(0, len(data), TS_PACKET_SIZE))


def rtp_version(data: bytes) -> int:
    if not data:
        return -1
    return (data[0] >> 6) & 0x3


@dataclass
class BenchReport:
    samples: dict[Protocol, list[float]] = field(default_factory=dict)

    def median(self, protocol: Protocol) -> float:
        return statistics.median(self.samples[protocol])

    def complete(self) -> bool:
        return all(self.samples.get(p) for p in Protocol)

    def format(self) -> str:
        lines = ["protocol  runs  median_s  min_s    max_s"]
        for protocol in EXPECTED_SPEED_RANKING:
            runs = self.samples.get(protocol, [])
            if not runs:
                lines.append(f"{protocol.value:<8}  0     -         -        -")
                continue
            lines.append(
                f"{protocol.value:<8}  {len(runs):<4}  "
                f"{statistics.median(runs):<8.3f}  {min(runs):<7.3f}  {max(runs):.3f}"
            )
        expected = " > ".join(p.value for p in EXPECTED_SPEED_RANKING)
        lines.append(f"expected speed ranking (fastest first): {expected}")
        if self.complete():
            observed = sorted(Protocol, key=self.median)
            lines.append("observed median ranking (fastest first): "
                         + " > ".join(p.value for p in observed))
            match = tuple(observed) == EXPECTED_SPEED_RANKING
            lines.append(f"observed matches expected: {'yes' if match else 'no'}")
        lines.append("loopback timing is informational; it does not reliably "
                     "reproduce the expected ranking")
        return "\n".join(lines)


def time_first_byte(protocol: Protocol, spawner, timeout: float = 10.0,
                    width: int = 320, height: int = 240, rate: int = 15) -> float:
    """Spawn one publisher on loopback, return seconds to first byte."""
    binding = CameraBinding(0, "virtual:bench")
    caps = CaptureSettings(device=binding, width=width, height=height,
                           frame_rate=rate)
    receiver = None
    if protocol in (Protocol.UDP, Protocol.RTP):
        receiver = open_udp_receiver()
        port = receiver.getsockname()[1]
    else:
        port = free_tcp_port()
    target = analyze_url(render_target(protocol, "127.0.0.1", port))
    command = synthesize_publish_command(binding, target, caps)
    started = time.monotonic()
    process = spawner(command.argv)
    try:
        if receiver is not None:
            recv_datagram(receiver, timeout)
        else:
            recv_tcp_first_bytes("127.0.0.1", port, timeout)
        return time.monotonic() - started
    finally:
        process.signal_stop()
        try:
            process.wait(timeout=5)
        except Exception:
            process.force_kill()
        if receiver is not None:
            receiver.close()


def run_protocol_bench(toolchain_path: str | None = None, runs: int = 10,
                       timeout: float = 10.0) -> BenchReport:
    """Time-to-first-byte over `runs` publisher launches per protocol."""
    spawner = toolchain_spawner(toolchain_path)
    report = BenchReport()
    for protocol in EXPECTED_SPEED_RANKING:
        times = []
        for _ in range(runs):
            times.append(time_first_byte(protocol, spawner, timeout=timeout))
        report.samples[protocol] = times
    return report
