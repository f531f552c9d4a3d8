from __future__ import annotations

import shutil
import subprocess
import threading

import pytest

from camgrid.errors import SpawnFailure


def find_toolchain() -> str | None:
    import os

    return os.environ.get("CAMGRID_FFMPEG") or shutil.which("ffmpeg")


requires_toolchain = pytest.mark.skipif(
    find_toolchain() is None,
    reason="media toolchain (ffmpeg) not installed",
)


@pytest.fixture
def toolchain():
    path = find_toolchain()
    if path is None:
        pytest.skip("media toolchain (ffmpeg) not installed")
    return path


class FakePipeline:
    """Preview pipeline stand-in: no subprocess, canned frozen tile."""

    def __init__(self, settings, tile_width, tile_height, on_fault=None,
                 fail_start=False):
        self.settings = settings
        self.tile_width = tile_width
        self.tile_height = tile_height
        self.on_fault = on_fault
        self.fail_start = fail_start
        self.started = False
        self.stopped = False

    def start(self):
        if self.fail_start:
            raise SpawnFailure("fake preview failure",
                               camera_id=self.settings.device.camera_id)
        self.started = True

    def stop(self):
        self.stopped = True
        return b"\xff\xd8frozen\xff\xd9"

    def latest(self):
        return (b"\xff\xd8live\xff\xd9", 0)

    def wait_for_frame(self, after_seq, timeout):
        if after_seq < 0:
            return (b"\xff\xd8live\xff\xd9", 0)
        return None


class FakeProcess:
    """Publish process stand-in with test hooks for exits."""

    def __init__(self, argv, obey_stop=True):
        self.argv = list(argv)
        self.obey_stop = obey_stop
        self.pid = id(self) % 100000
        self.returncode = None
        self._on_exit = None
        self._lock = threading.Lock()

    def watch(self, on_exit):
        self._on_exit = on_exit

    def poll(self):
        return self.returncode

    def signal_stop(self):
        with self._lock:
            if self.obey_stop and self.returncode is None:
                self.returncode = -15

    def force_kill(self):
        with self._lock:
            self.returncode = -9

    def wait(self, timeout=None):
        if self.returncode is None:
            raise subprocess.TimeoutExpired(cmd=self.argv, timeout=timeout or 0)
        return self.returncode

    def exit_now(self, returncode, stderr_tail=""):
        """Simulate an asynchronous crash notification."""
        self.returncode = returncode
        if self._on_exit is not None:
            self._on_exit(returncode, stderr_tail)


class FakeSpawner:
    def __init__(self, obey_stop=True, fail=False):
        self.obey_stop = obey_stop
        self.fail = fail
        self.spawned: list[FakeProcess] = []

    def __call__(self, argv):
        if self.fail:
            raise SpawnFailure("fake spawn failure")
        process = FakeProcess(argv, obey_stop=self.obey_stop)
        self.spawned.append(process)
        return process


class NullStore:
    """Config sink that records calls without touching disk."""

    def __init__(self):
        self.plugflow: dict[int, str] = {}
        self.cameras: dict[int, str] = {}

    def set_plugflow_url(self, camera_id, url):
        if url is None:
            self.plugflow.pop(camera_id, None)
        else:
            self.plugflow[camera_id] = url

    def update_cameras(self, cameras):
        self.cameras = dict(cameras)


@pytest.fixture
def fake_spawner():
    return FakeSpawner()


@pytest.fixture
def fake_preview_factory():
    pipelines = []

    def factory(settings, tile_width, tile_height, on_fault=None):
        pipeline = FakePipeline(settings, tile_width, tile_height, on_fault)
        pipelines.append(pipeline)
        return pipeline

    factory.pipelines = pipelines
    return factory
