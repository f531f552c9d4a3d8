"""Synthetic test-pattern source.

Writes raw BGR24 frames to stdout at a fixed geometry and rate, honoring
the capture subprocess contract (tightly packed frames, no headers).
Used as the capture input for `virtual:` camera bindings so previews run
without hardware or the media toolchain.

Run as: python -m camgrid.virtualsrc --width 640 --height 480 --rate 15
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np


def render_pattern(width: int, height: int, index: int) -> bytes:
    """One BGR24 frame: scrolling gradient with a frame-counter band."""
    xs = np.linspace(0, 255, width, dtype=np.uint8)
    ys = np.linspace(0, 255, height, dtype=np.uint8)
    frame = np.empty((height, width, 3), dtype=np.uint8)
    frame[..., 0] = xs[None, :]
    frame[..., 1] = ys[:, None]
    frame[..., 2] = (index * 11) % 256
    band = (index * 3) % height
    frame[band : band + max(1, height // 16), :, :] = 255 - frame[
        band : band + max(1, height // 16), :, :
    ]
    return frame.tobytes()


def run(width: int, height: int, rate: float, frames: int, out) -> int:
    interval = 1.0 / rate
    index = 0
    next_due = time.monotonic()
    while frames <= 0 or index < frames:
        try:
            out.write(render_pattern(width, height, index))
            out.flush()
        except (BrokenPipeError, OSError):
            return 0
        index += 1
        next_due += interval
        delay = next_due - time.monotonic()
        if delay > 0:
            time.sleep(delay)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--width", type=int, default=640)
    parser.add_argument("--height", type=int, default=480)
    parser.add_argument("--rate", type=float, default=15.0)
    parser.add_argument("--frames", type=int, default=0,
                        help="stop after N frames; 0 means run until killed")
    args = parser.parse_args(argv)
    if args.width < 1 or args.height < 1 or args.rate <= 0:
        parser.error("width, height and rate must be positive")
    return run(args.width, args.height, args.rate, args.frames, sys.stdout.buffer)


if __name__ == "__main__":
    sys.exit(main())
