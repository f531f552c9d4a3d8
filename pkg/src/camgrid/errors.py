"""Shared error types.

Every public failure mode of the package is one of these classes so the
HTTP layer can map each to exactly one wire error code and status.
"""


class CamgridError(Exception):
    """Base class; `code` is the stable machine-readable identifier."""

    code = "internal"

    def __init__(self, message: str, camera_id: int | None = None):
        super().__init__(message)
        self.camera_id = camera_id


class ToolchainMissing(CamgridError):
    code = "toolchain_missing"


class ParseFailure(CamgridError):
    """Device listing matched no known grammar. Raw output kept for diagnostics."""

    code = "parse_failure"

    def __init__(self, message: str, raw_output: str = ""):
        super().__init__(message)
        self.raw_output = raw_output


class UnsupportedProtocol(CamgridError):
    code = "unsupported_protocol"


class MalformedUrl(CamgridError):
    code = "malformed_url"


class EmptyCameraSet(CamgridError):
    code = "empty_camera_set"


class UnknownCamera(CamgridError):
    code = "unknown_camera"


class StreamingConflict(CamgridError):
    code = "streaming_conflict"


class NotStreaming(CamgridError):
    code = "not_streaming"


class NotShowing(CamgridError):
    code = "not_showing"


class SpawnFailure(CamgridError):
    code = "spawn_failure"


class WrongPixelFormat(CamgridError):
    code = "wrong_pixel_format"


class FrameSyncLost(CamgridError):
    code = "frame_sync_lost"


class ConfigCorrupt(CamgridError):
    """Persisted JSON unreadable; `path` names the offending file."""

    code = "config_corrupt"

    def __init__(self, message: str, path=None):
        super().__init__(message)
        self.path = path


class IoFailure(CamgridError):
    code = "io_failure"


class BindFailure(CamgridError):
    code = "bind_failure"
