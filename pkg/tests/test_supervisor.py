import itertools
import subprocess
import sys
import threading
import time

import pytest

from camgrid.config import ConfigStore
from camgrid.devices import CameraRegistry
from camgrid.errors import (NotShowing, NotStreaming, SpawnFailure,
                            StreamingConflict, UnknownCamera)
from camgrid.supervisor import (EventKind, Phase, StreamSupervisor,
                                ToolchainProcess)
from conftest import FakeSpawner, NullStore


def make_supervisor(camera_ids=(0, 1, 2), spawner=None, preview_factory=None,
                    store=None, grace_period=3.0, clock=time.monotonic,
                    registry=None):
    if registry is None:
        registry = CameraRegistry()
        for camera_id in camera_ids:
            registry.bind_camera(camera_id, f"virtual:{camera_id}")
    return StreamSupervisor(
        registry,
        config_store=store if store is not None else NullStore(),
        spawner=spawner or FakeSpawner(),
        preview_factory=preview_factory or _noop_preview_factory,
        grace_period=grace_period,
        clock=clock,
    )


class _NoopPipeline:
    def __init__(self, settings):
        self.settings = settings

    def start(self):
        pass

    def stop(self):
        return b"\xff\xd8tile\xff\xd9"

    def latest(self):
        return (b"\xff\xd8tile\xff\xd9", 0)

    def wait_for_frame(self, after_seq, timeout):
        return (b"\xff\xd8tile\xff\xd9", after_seq + 1)


def _noop_preview_factory(settings, tile_width, tile_height, on_fault=None):
    return _NoopPipeline(settings)


# -- reference state machine ---------------------------------------------------

def test_state_machine_short_sequences_match_reference():
    from statemachine_oracle import check_sequences

    assert check_sequences((0, 1), 3) == 3 * 8 ** 3


# -- individual operations ------------------------------------------------------

def test_show_all_previews_idle_cameras():
    supervisor = make_supervisor((0, 1, 2))
    states = supervisor.show_all()
    assert [s.phase for s in states] == [Phase.PREVIEWING] * 3


def test_show_all_leaves_streaming_untouched():
    supervisor = make_supervisor((0, 1, 2))
    supervisor.plug_flow(1, "udp://127.0.0.1:6668")
    states = {s.camera_id: s.phase for s in supervisor.show_all()}
    assert states == {0: Phase.PREVIEWING, 1: Phase.STREAMING,
                      2: Phase.PREVIEWING}


def test_show_all_empty_registry():
    supervisor = make_supervisor(())
    assert supervisor.show_all() == []


def test_show_all_skips_stale_bindings():
    from camgrid.devices import DeviceKind, DeviceRecord
    records = [DeviceRecord("Real Cam", DeviceKind.VIDEO, "dshow")]
    registry = CameraRegistry(lister=lambda: records)
    registry.bind_camera(0, "Real Cam")
    registry.bind_camera(1, "Gone Cam")
    registry.refresh_devices()
    supervisor = StreamSupervisor(registry, config_store=NullStore(),
                                  spawner=FakeSpawner(),
                                  preview_factory=_noop_preview_factory)
    states = {s.camera_id: s.phase for s in supervisor.show_all()}
    assert states == {0: Phase.PREVIEWING, 1: Phase.IDLE}


def test_show_one_stops_other_previews():
    supervisor = make_supervisor((0, 1, 2))
    supervisor.show_all()
    state = supervisor.show_one(1)
    assert state.phase is Phase.PREVIEWING
    assert supervisor.phase_map() == {0: Phase.IDLE, 1: Phase.PREVIEWING,
                                      2: Phase.IDLE}


def test_show_one_unknown_camera():
    supervisor = make_supervisor((0, 1, 2))
    with pytest.raises(UnknownCamera):
        supervisor.show_one(7)


def test_show_one_on_streaming_camera_conflicts():
    supervisor = make_supervisor((0, 1, 2))
    supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    with pytest.raises(StreamingConflict):
        supervisor.show_one(0)


def test_close_all_mixed_phases():
    supervisor = make_supervisor((0, 1, 2))
    supervisor.show_all()
    supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    supervisor.close_all()
    assert set(supervisor.phase_map().values()) == {Phase.IDLE}


def test_close_all_idempotent():
    supervisor = make_supervisor((0, 1))
    supervisor.close_all()
    supervisor.close_all()
    assert set(supervisor.phase_map().values()) == {Phase.IDLE}


def test_close_all_kills_stubborn_publisher():
    spawner = FakeSpawner(obey_stop=False)
    supervisor = make_supervisor((0,), spawner=spawner, grace_period=0.1)
    supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    started = time.monotonic()
    supervisor.close_all()
    assert time.monotonic() - started < 3
    assert spawner.spawned[0].returncode == -9
    kinds = [e.kind for e in supervisor.poll_events()]
    assert EventKind.FAULT in kinds
    assert supervisor.phase_map()[0] is Phase.IDLE


def test_plug_flow_freezes_preview_and_persists():
    store = NullStore()
    supervisor = make_supervisor((0, 1), store=store)
    supervisor.show_all()
    state = supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    assert state.phase is Phase.STREAMING
    assert state.publish_target.raw == "udp://127.0.0.1:6668"
    assert store.plugflow == {0: "udp://127.0.0.1:6668"}
    kind, payload = supervisor.preview_channel(0)
    assert kind == "frozen"
    assert payload[:2] == b"\xff\xd8"
    # The other camera still previews live.
    kind, _ = supervisor.preview_channel(1)
    assert kind == "live"


def test_plug_flow_bad_url_leaves_state_unchanged():
    from camgrid.errors import MalformedUrl, UnsupportedProtocol
    supervisor = make_supervisor((0,))
    supervisor.show_all()
    with pytest.raises(UnsupportedProtocol):
        supervisor.plug_flow(0, "ftp://x:1")
    with pytest.raises(MalformedUrl):
        supervisor.plug_flow(0, "udp://:6668")
    assert supervisor.phase_map()[0] is Phase.PREVIEWING


def test_plug_flow_unknown_camera():
    supervisor = make_supervisor((0,))
    with pytest.raises(UnknownCamera):
        supervisor.plug_flow(9, "udp://127.0.0.1:6668")


def test_plug_flow_spawn_failure_sets_error_phase():
    supervisor = make_supervisor((0,), spawner=FakeSpawner(fail=True))
    with pytest.raises(SpawnFailure):
        supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    state = supervisor.state(0)
    assert state.phase is Phase.ERROR
    assert state.last_error


def test_plug_flow_two_cameras_concurrently():
    spawner = FakeSpawner()
    supervisor = make_supervisor((0, 1), spawner=spawner)
    results = {}

    def run(camera_id, url):
        results[camera_id] = supervisor.plug_flow(camera_id, url)

    threads = [threading.Thread(target=run, args=(0, "udp://127.0.0.1:6668")),
               threading.Thread(target=run, args=(1, "tcp://127.0.0.1:6699"))]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert results[0].phase is Phase.STREAMING
    assert results[1].phase is Phase.STREAMING
    assert len(spawner.spawned) == 2
    assert supervisor.exclusivity_violations() == []


def test_stop_flow_and_restart():
    supervisor = make_supervisor((0,))
    supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    state = supervisor.stop_flow(0)
    assert state.phase is Phase.IDLE
    with pytest.raises(NotStreaming):
        supervisor.stop_flow(0)
    state = supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    assert state.phase is Phase.STREAMING


def test_stop_flow_does_not_resume_preview():
    supervisor = make_supervisor((0,))
    supervisor.show_all()
    supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    supervisor.stop_flow(0)
    with pytest.raises(NotShowing):
        supervisor.preview_channel(0)


def test_plug_flow_order_independence():
    urls = {0: "udp://127.0.0.1:6668", 1: "rtp://127.0.0.1:6688",
            2: "tcp://127.0.0.1:6699"}
    outcomes = []
    for order in itertools.permutations(urls):
        store = NullStore()
        supervisor = make_supervisor((0, 1, 2), store=store)
        supervisor.show_all()
        for camera_id in order:
            supervisor.plug_flow(camera_id, urls[camera_id])
        outcomes.append((supervisor.phase_map(), dict(store.plugflow)))
    assert all(outcome == outcomes[0] for outcome in outcomes)
    assert outcomes[0][0] == {i: Phase.STREAMING for i in range(3)}
    assert outcomes[0][1] == urls


# -- events ----------------------------------------------------------------------

def test_events_record_lifecycle():
    supervisor = make_supervisor((0,))
    supervisor.show_all()
    supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    kinds = [e.kind for e in supervisor.poll_events()]
    assert kinds == [EventKind.PREVIEW_STARTED, EventKind.PREVIEW_STOPPED,
                     EventKind.STREAM_STARTED]


def test_events_since_filter_and_ordering():
    supervisor = make_supervisor((0,))
    supervisor.show_all()
    events = supervisor.poll_events()
    assert len(events) == 1
    timestamps = [e.timestamp for e in events]
    assert supervisor.poll_events(since=timestamps[-1]) == []
    supervisor.close_all()
    fresh = supervisor.poll_events(since=timestamps[-1])
    assert [e.kind for e in fresh] == [EventKind.PREVIEW_STOPPED]
    everything = supervisor.poll_events()
    assert [e.timestamp for e in everything] == sorted(
        e.timestamp for e in everything)


def test_publisher_crash_reports_exit_event():
    spawner = FakeSpawner()
    supervisor = make_supervisor((0,), spawner=spawner)
    supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    spawner.spawned[0].exit_now(1, stderr_tail="encoder blew up")
    state = supervisor.state(0)
    assert state.phase is Phase.ERROR
    assert "encoder blew up" in state.last_error
    exits = [e for e in supervisor.poll_events()
             if e.kind is EventKind.STREAM_EXITED]
    assert len(exits) == 1
    assert "exit code 1" in exits[0].detail


def test_stale_exit_notification_ignored_after_stop():
    spawner = FakeSpawner()
    supervisor = make_supervisor((0,), spawner=spawner)
    supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    process = spawner.spawned[0]
    supervisor.stop_flow(0)
    before = supervisor.phase_map()[0]
    process.exit_now(-15)
    assert supervisor.phase_map()[0] is before
    exits = [e for e in supervisor.poll_events()
             if e.kind is EventKind.STREAM_EXITED]
    assert len(exits) == 1  # exactly one exit event, from stop_flow


def test_preview_channel_errors():
    supervisor = make_supervisor((0,))
    with pytest.raises(NotShowing):
        supervisor.preview_channel(0)
    with pytest.raises(UnknownCamera):
        supervisor.preview_channel(42)


def test_plug_flow_persistence_reaches_disk(tmp_path):
    store = ConfigStore(tmp_path)
    registry = CameraRegistry(store=store)
    registry.bind_camera(0, "virtual:0")
    supervisor = StreamSupervisor(registry, config_store=store,
                                  spawner=FakeSpawner(),
                                  preview_factory=_noop_preview_factory)
    supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    assert store.load().plugflow == {0: "udp://127.0.0.1:6668"}


def test_close_all_force_kills_real_signal_ignoring_process():
    """A publisher that ignores the graceful signal is killed after grace."""
    stub_code = ("import signal, time; "
                 "signal.signal(signal.SIGTERM, signal.SIG_IGN); "
                 "print('ready', flush=True); time.sleep(60)")

    def stub_spawner(argv):
        process = subprocess.Popen([sys.executable, "-c", stub_code],
                                   stdin=subprocess.DEVNULL,
                                   stdout=subprocess.PIPE,
                                   stderr=subprocess.PIPE)
        process.stdout.readline()  # wait for the handler to be installed
        return ToolchainProcess(process)

    supervisor = make_supervisor((0,), spawner=stub_spawner, grace_period=0.5)
    supervisor.plug_flow(0, "udp://127.0.0.1:6668")
    started = time.monotonic()
    supervisor.close_all()
    elapsed = time.monotonic() - started
    assert elapsed < 5
    assert supervisor.phase_map()[0] is Phase.IDLE
    kinds = [e.kind for e in supervisor.poll_events()]
    assert EventKind.FAULT in kinds


def test_graceful_toolchain_process_wrapper():
    process = subprocess.Popen(
        [sys.executable, "-c", "import time; time.sleep(60)"],
        stdin=subprocess.DEVNULL, stdout=subprocess.DEVNULL,
        stderr=subprocess.PIPE)
    wrapped = ToolchainProcess(process)
    exits = []
    wrapped.watch(lambda rc, tail: exits.append((rc, tail)))
    wrapped.signal_stop()
    assert wrapped.wait(timeout=10) == -15
    deadline = time.monotonic() + 5
    while not exits and time.monotonic() < deadline:
        time.sleep(0.02)
    assert exits and exits[0][0] == -15
