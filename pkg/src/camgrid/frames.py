"""Raw frame containers and the preview transform chain.

Frames are tightly packed row-major byte buffers. The transforms are the
per-tile processing steps applied between capture and the wire encoder:
horizontal mirror, BGR→RGBA conversion, nearest-neighbor resize.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum

import numpy as np
from PIL import Image

from .errors import WrongPixelFormat


class PixelFormat(Enum):
    BGR24 = "bgr24"
    RGBA32 = "rgba32"


BYTES_PER_PIXEL = {PixelFormat.BGR24: 3, PixelFormat.RGBA32: 4}


@dataclass(frozen=True)
class RawFrame:
    width: int
    height: int
    pixel_format: PixelFormat
    data: bytes
    sequence_no: int = 0

    def __post_init__(self):
        expected = self.width * self.height * BYTES_PER_PIXEL[self.pixel_format]
        if len(self.data) != expected:
            raise ValueError(
                f"frame data is {len(self.data)} bytes, expected {expected} "
                f"for {self.width}x{self.height} {self.pixel_format.value}"
            )


def _as_array(frame: RawFrame) -> np.ndarray:
    channels = BYTES_PER_PIXEL[frame.pixel_format]
    return np.frombuffer(frame.data, dtype=np.uint8).reshape(
        frame.height, frame.width, channels
    )


def flip_horizontal(frame: RawFrame) -> RawFrame:
    """Mirror each row: out[r][c] = in[r][width-1-c]."""
    flipped = _as_array(frame)[:, ::-1]
    return RawFrame(frame.width, frame.height, frame.pixel_format,
                    np.ascontiguousarray(flipped).tobytes(), frame.sequence_no)


def bgr_to_rgba(frame: RawFrame) -> RawFrame:
    """Convert (B,G,R) pixels to (R,G,B,255)."""
    if frame.pixel_format is not PixelFormat.BGR24:
        raise WrongPixelFormat(
            f"expected bgr24 input, got {frame.pixel_format.value}"
        )
    bgr = _as_array(frame)
    rgba = np.empty((frame.height, frame.width, 4), dtype=np.uint8)
    rgba[..., 0] = bgr[..., 2]
    rgba[..., 1] = bgr[..., 1]
    rgba[..., 2] = bgr[..., 0]
    rgba[..., 3] = 255
    return RawFrame(frame.width, frame.height, PixelFormat.RGBA32,
                    rgba.tobytes(), frame.sequence_no)


def resize_frame(frame: RawFrame, out_width: int, out_height: int) -> RawFrame:
    """Nearest-neighbor resize: source index = floor(dst * src_dim / out_dim)."""
    if out_width <= 0 or out_height <= 0:
        raise ValueError("output dimensions must be positive")
    if out_width == frame.width and out_height == frame.height:
        return frame
    src = _as_array(frame)
    rows = (np.arange(out_height) * frame.height) // out_height
    cols = (np.arange(out_width) * frame.width) // out_width
    out = src[np.ix_(rows, cols)]
    return RawFrame(out_width, out_height, frame.pixel_format,
                    np.ascontiguousarray(out).tobytes(), frame.sequence_no)


def encode_preview_tile(frame: RawFrame, quality: int) -> bytes:
    """Encode a frame as a JPEG tile at the given quality (1..100)."""
    if not 1 <= quality <= 100:
        raise ValueError("quality must be in [1, 100]")
    arr = _as_array(frame)
    if frame.pixel_format is PixelFormat.BGR24:
        rgb = arr[..., ::-1]
    else:
        rgb = arr[..., :3]
    image = Image.fromarray(np.ascontiguousarray(rgb), mode="RGB")
    buf = io.BytesIO()
    image.save(buf, format="JPEG", quality=quality)
    return buf.getvalue()
