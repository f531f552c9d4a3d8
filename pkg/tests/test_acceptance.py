"""Acceptance suite: one test per release criterion.

Each criterion runs at its stated tolerance and runtime budget and
prints one ACCEPTANCE PASS/FAIL line (visible with `pytest -v -s` or in
captured output). The integration tier and the benchmark need the media
toolchain on PATH or CAMGRID_FFMPEG; everything else is hermetic.
"""

import itertools
import os
import random
import string
import time
from contextlib import contextmanager

import psutil
import pytest

from camgrid.config import (CAMERAS_FILE, PersistedConfig, load_config,
                            save_config)
from camgrid.devices import CameraRegistry
from camgrid.errors import IoFailure, MalformedUrl, UnsupportedProtocol
from camgrid.frames import PixelFormat, flip_horizontal, resize_frame
from camgrid.layout import LayoutParams, compute_layout
from camgrid.probes import (is_mpegts_aligned, open_udp_receiver,
                            free_tcp_port, recv_datagram, recv_tcp_first_bytes,
                            rtp_version, run_protocol_bench)
from camgrid.supervisor import Phase, StreamSupervisor, toolchain_spawner
from camgrid.urls import Protocol, analyze_url, render_target
from conftest import NullStore, find_toolchain, requires_toolchain
from statemachine_oracle import check_sequences_parallel, model_supervisor
from test_frames import bgr_to_rgba_oracle, flip_oracle, random_frame, resize_oracle
from test_layout import layout_oracle


@contextmanager
def criterion(name, budget_s=None):
    started = time.monotonic()
    try:
        yield
    except Exception:
        print(f"\nACCEPTANCE FAIL [{name}]")
        raise
    elapsed = time.monotonic() - started
    if budget_s is not None:
        assert elapsed < budget_s, \
            f"{name}: runtime {elapsed:.1f}s exceeds budget {budget_s}s"
        print(f"\nACCEPTANCE PASS [{name}] ({elapsed:.1f}s < {budget_s}s)")
    else:
        print(f"\nACCEPTANCE PASS [{name}] ({elapsed:.1f}s)")


def test_url_analyzer_golden_suite():
    with criterion("url-analyzer golden + roundtrip + fuzz", budget_s=10):
        golden = [
            ("udp://127.0.0.1:6668", Protocol.UDP, "127.0.0.1", 6668),
            ("rtp://127.0.0.1:6688", Protocol.RTP, "127.0.0.1", 6688),
            ("tcp://127.0.0.1:6699", Protocol.TCP, "127.0.0.1", 6699),
        ]
        for raw, protocol, host, port in golden:
            target = analyze_url(raw)
            assert (target.protocol, target.host, target.port) == \
                (protocol, host, port)
            assert target.raw == raw

        rng = random.Random(0xC0FFEE)
        host_chars = string.ascii_lowercase + string.digits + ".-"
        for _ in range(250):
            protocol = rng.choice(list(Protocol))
            if rng.random() < 0.5:
                host = ".".join(str(rng.randrange(256)) for _ in range(4))
            else:
                host = "".join(rng.choice(host_chars)
                               for _ in range(rng.randrange(1, 30)))
                if host.startswith("-"):
                    host = "h" + host
            port = rng.randrange(1, 65536)
            target = analyze_url(render_target(protocol, host, port))
            assert (target.protocol, target.host, target.port) == \
                (protocol, host, port)

        schemes = ["udp", "rtp", "tcp", "UDP", "Rtp", "http", "x", ""]
        for index in range(100_000):
            raw = rng.randbytes(rng.randrange(0, 30)).decode("latin-1")
            if index % 3 == 0:
                raw = rng.choice(schemes) + "://" + raw
            try:
                analyze_url(raw)
            except (MalformedUrl, UnsupportedProtocol):
                pass


def test_layout_oracle_equivalence():
    with criterion("layout oracle integer-exact equivalence", budget_s=1):
        for screen_width in (800, 1366, 1920):
            for max_columns in range(1, 5):
                for n in range(1, 13):
                    params = LayoutParams(screen_width=screen_width,
                                          max_columns=max_columns)
                    indices = list(range(n))
                    grid = compute_layout(indices, params)
                    width, height, placements, rows = layout_oracle(
                        indices, screen_width, params.adjust,
                        params.adjust_w_h, max_columns)
                    assert grid.tile_width == width, (n, max_columns, screen_width)
                    assert grid.tile_height == height
                    assert list(grid.placements) == placements
                    assert grid.rows == rows
                    # both branch arms are exercised by the N range
                    assert (n <= max_columns) or (grid.rows > 1) or \
                        (max_columns >= n)


def test_frame_transform_oracles():
    with criterion("frame transforms vs brute-force oracles", budget_s=10):
        from camgrid.frames import bgr_to_rgba
        rng = random.Random(0xFACADE)
        for case in range(1000):
            width = rng.randint(1, 64)
            height = rng.randint(1, 64)
            frame = random_frame(rng, width, height, PixelFormat.BGR24,
                                 sequence_no=case)
            flipped = flip_horizontal(frame)
            assert flipped.data == flip_oracle(frame)
            assert flip_horizontal(flipped).data == frame.data  # involution
            converted = bgr_to_rgba(frame)
            assert converted.data == bgr_to_rgba_oracle(frame)
            out_w, out_h = rng.randint(1, 64), rng.randint(1, 64)
            resized = resize_frame(frame, out_w, out_h)
            assert resized.data == resize_oracle(frame, out_w, out_h)
            assert resize_frame(frame, width, height).data == frame.data


def test_state_machine_exclusivity_exhaustive():
    with criterion("state-machine exclusivity (length<=6, 2 cameras)",
                   budget_s=30):
        checks = check_sequences_parallel((0, 1), 6)
        assert checks == 6 * 8 ** 6  # every step of every length-6 sequence

        # plug-flow order independence over permutations of 3 cameras
        urls = {0: "udp://127.0.0.1:6668", 1: "rtp://127.0.0.1:6688",
                2: "tcp://127.0.0.1:6699"}
        registry = CameraRegistry()
        for camera_id in urls:
            registry.bind_camera(camera_id, f"virtual:{camera_id}")
        outcomes = []
        for order in itertools.permutations(urls):
            supervisor = model_supervisor(registry)
            supervisor.show_all()
            for camera_id in order:
                supervisor.plug_flow(camera_id, urls[camera_id])
            outcomes.append(supervisor.phase_map())
        assert all(outcome == outcomes[0] for outcome in outcomes)
        assert outcomes[0] == {i: Phase.STREAMING for i in range(3)}


def _random_config(rng) -> PersistedConfig:
    pool = ("Cam", "камера", "摄像头", "Kamera", "κάμερα", "🎥", "mic/aux",
            'quoted "name"')
    cameras = {}
    plugflow = {}
    for _ in range(rng.randrange(0, 6)):
        camera_id = rng.randrange(0, 50)
        cameras[camera_id] = rng.choice(pool) + str(rng.randrange(100))
        if rng.random() < 0.5:
            scheme = rng.choice(["udp", "rtp", "tcp"])
            plugflow[camera_id] = f"{scheme}://127.0.0.1:{rng.randrange(1, 65536)}"
    return PersistedConfig(cameras=cameras, plugflow=plugflow)


def test_config_roundtrip_and_atomicity(tmp_path, monkeypatch):
    with criterion("config round-trip, determinism, crash safety",
                   budget_s=10):
        rng = random.Random(0xBEEF)
        directory = tmp_path / "cfg"
        for case in range(500):
            config = _random_config(rng)
            save_config(config, directory)
            loaded = load_config(directory)
            assert loaded.cameras == config.cameras, case
            assert loaded.plugflow == config.plugflow, case

        config = _random_config(rng)
        save_config(config, tmp_path / "one")
        save_config(config, tmp_path / "two")
        for name in ("cameras.json", "plugflow.json"):
            assert (tmp_path / "one" / name).read_bytes() == \
                (tmp_path / "two" / name).read_bytes()

        save_config(PersistedConfig(cameras={0: "before"}), tmp_path / "crash")
        before = (tmp_path / "crash" / CAMERAS_FILE).read_bytes()
        real_replace = os.replace

        def exploding_replace(src, dst):
            raise OSError("injected crash between write and rename")

        monkeypatch.setattr(os, "replace", exploding_replace)
        with pytest.raises(IoFailure):
            save_config(PersistedConfig(cameras={0: "after"}), tmp_path / "crash")
        monkeypatch.setattr(os, "replace", real_replace)
        assert (tmp_path / "crash" / CAMERAS_FILE).read_bytes() == before


def _spawned_children_gone(processes, timeout_s):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        if all(p.poll() is not None for p in processes):
            return True
        time.sleep(0.05)
    return False


@requires_toolchain
def test_multi_protocol_end_to_end(tmp_path):
    with criterion("integration: simultaneous UDP+RTP+TCP publish", None):
        toolchain = find_toolchain()
        spawned = []
        base_spawner = toolchain_spawner(toolchain)

        def recording_spawner(argv):
            process = base_spawner(argv)
            spawned.append(process)
            return process

        registry = CameraRegistry()
        for camera_id in range(3):
            registry.bind_camera(camera_id, f"virtual:{camera_id}")
        supervisor = StreamSupervisor(
            registry, config_store=NullStore(), toolchain_path=toolchain,
            spawner=recording_spawner,
            capture_defaults=(320, 240, 15))
        try:
            supervisor.show_all()
            assert set(supervisor.phase_map().values()) == {Phase.PREVIEWING}

            udp_sock = open_udp_receiver()
            rtp_sock = open_udp_receiver()
            tcp_port = free_tcp_port()
            udp_port = udp_sock.getsockname()[1]
            rtp_port = rtp_sock.getsockname()[1]

            t_udp = time.monotonic()
            supervisor.plug_flow(0, f"udp://127.0.0.1:{udp_port}")
            t_rtp = time.monotonic()
            supervisor.plug_flow(1, f"rtp://127.0.0.1:{rtp_port}")
            t_tcp = time.monotonic()
            supervisor.plug_flow(2, f"tcp://127.0.0.1:{tcp_port}")

            udp_data = recv_datagram(udp_sock, timeout=5)
            assert time.monotonic() - t_udp < 5
            assert is_mpegts_aligned(udp_data), udp_data[:8].hex()

            rtp_data = recv_datagram(rtp_sock, timeout=5)
            assert time.monotonic() - t_rtp < 5
            assert rtp_version(rtp_data) == 2, rtp_data[:4].hex()

            tcp_data = recv_tcp_first_bytes("127.0.0.1", tcp_port,
                                            timeout=5, min_bytes=376)
            assert time.monotonic() - t_tcp < 5
            assert is_mpegts_aligned(tcp_data), tcp_data[:8].hex()

            assert set(supervisor.phase_map().values()) == {Phase.STREAMING}
            assert len(spawned) == 3

            close_started = time.monotonic()
            supervisor.close_all()
            assert _spawned_children_gone(
                spawned, max(0.0, 4 - (time.monotonic() - close_started)))
            assert time.monotonic() - close_started < 4

            me = psutil.Process()
            strays = [child for child in me.children(recursive=True)
                      if "ffmpeg" in (child.name() or "")
                      or any("virtualsrc" in part
                             for part in (child.cmdline() or []))]
            assert strays == [], strays
            udp_sock.close()
            rtp_sock.close()
        finally:
            supervisor.close_all()


@requires_toolchain
def test_protocol_timing_benchmark():
    with criterion("benchmark: time-to-first-byte per protocol", None):
        report = run_protocol_bench(find_toolchain(), runs=10, timeout=10)
        assert report.complete()
        for protocol in Protocol:
            assert len(report.samples[protocol]) == 10
            assert all(sample > 0 for sample in report.samples[protocol])
        print()
        print(report.format())
