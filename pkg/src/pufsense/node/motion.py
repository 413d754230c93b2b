"""Frames, three-frame differencing, synthetic scenes and PGM I/O."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

GRAY8 = "gray8"
YUV422 = "yuv422"
LAYOUT_CODES = {GRAY8: 0, YUV422: 1}
LAYOUT_NAMES = {v: k for k, v in LAYOUT_CODES.items()}
BYTES_PER_PIXEL = {GRAY8: 1, YUV422: 2}

DEFAULT_PIXEL_THRESHOLD = 25
DEFAULT_AREA_THRESHOLD = 0.01  # fraction of pixels that must change


@dataclass(frozen=True)
class Frame:
    width: int
    height: int
    layout: str
    data: bytes
    index: int = 0

    def __post_init__(self) -> None:
        if self.layout not in LAYOUT_CODES:
            raise ValueError(f"unknown pixel layout {self.layout!r}")
        if not (0 < self.width <= 0xFFFF and 0 < self.height <= 0xFFFF):
            raise ValueError("frame dimensions must be 1..65535")
        if self.layout == YUV422 and self.width % 2:
            raise ValueError("YUV422 frames need an even width")
        if len(self.data) != self.frame_bytes:
            raise ValueError(f"frame needs {self.frame_bytes} bytes, got {len(self.data)}")

    @property
    def frame_bytes(self) -> int:
        return self.width * self.height * BYTES_PER_PIXEL[self.layout]

    @property
    def geometry(self) -> tuple[int, int, str]:
        return self.width, self.height, self.layout

    def luma(self) -> np.ndarray:
        raw = np.frombuffer(self.data, dtype=np.uint8)
        if self.layout == YUV422:
            raw = raw[0::2]  # YUYV: luminance on even bytes
        return raw.reshape(self.height, self.width)

    @classmethod
    def from_luma(cls, luma: np.ndarray, index: int = 0, layout: str = GRAY8) -> Frame:
        y = np.asarray(luma, dtype=np.uint8)
        if y.ndim != 2:
            raise ValueError("luminance must be a 2-D array")
        h, w = y.shape
        if layout == GRAY8:
            data = y.tobytes()
        elif layout == YUV422:
            packed = np.empty((h, 2 * w), dtype=np.uint8)
            packed[:, 0::2] = y
            packed[:, 1::2] = 128  # neutral chroma
            data = packed.tobytes()
        else:
            raise ValueError(f"unknown pixel layout {layout!r}")
        return cls(w, h, layout, data, index)


def detect_event(frame_t: Frame, frame_t1: Frame, frame_t2: Frame,
                 threshold: float = DEFAULT_AREA_THRESHOLD,
                 pixel_threshold: int = DEFAULT_PIXEL_THRESHOLD) -> tuple[bool, np.ndarray]:
    """Three-frame differencing on luminance.

    A pixel is moving only if frame t differs from both t-1 and t-2, so a
    one-frame flicker (present in t-1 alone) is ignored. Returns whether the
    moving fraction exceeds ``threshold`` and the boolean motion mask.
    """
    if not frame_t.geometry[:2] == frame_t1.geometry[:2] == frame_t2.geometry[:2]:
        raise ValueError("frames must share dimensions")
    y0 = frame_t.luma().astype(np.int16)
    d1 = np.abs(y0 - frame_t1.luma().astype(np.int16)) > pixel_threshold
    d2 = np.abs(y0 - frame_t2.luma().astype(np.int16)) > pixel_threshold
    mask = d1 & d2
    return bool(mask.mean() > threshold), mask


class EventDetector:
    """Feeds frames one at a time through a three-frame window."""

    def __init__(self, threshold: float = DEFAULT_AREA_THRESHOLD,
                 pixel_threshold: int = DEFAULT_PIXEL_THRESHOLD) -> None:
        self.threshold = threshold
        self.pixel_threshold = pixel_threshold
        self._window: list[Frame] = []

    def feed(self, frame: Frame) -> bool:
        self._window = (self._window + [frame])[-3:]
        if len(self._window) < 3:
            return False
        f2, f1, f0 = self._window
        event, _ = detect_event(f0, f1, f2, self.threshold, self.pixel_threshold)
        return event

    def reset(self) -> None:
        self._window = []


def synthetic_scene(width: int, height: int, count: int, seed: int = 0, quiet: int = 3,
                    square: int | None = None, speed: int | None = None,
                    layout: str = GRAY8) -> list[Frame]:
    """Static textured background; a bright square enters after ``quiet`` frames."""
    if count <= 0:
        raise ValueError("frame count must be positive")
    rng = np.random.default_rng(seed)
    background = rng.integers(40, 90, size=(height, width), dtype=np.uint8)
    side = square if square is not None else max(2, min(width, height) // 4)
    step = speed if speed is not None else max(1, side // 2)
    top = (height - side) // 2
    frames = []
    for i in range(count):
        img = background.copy()
        if i >= quiet:
            left = ((i - quiet) * step) % max(1, width - side + 1)
            img[top : top + side, left : left + side] = 230
        frames.append(Frame.from_luma(img, index=i, layout=layout))
    return frames


_SYNTH_RE = re.compile(r"^(\d+)x(\d+)@(\d+)$")


def parse_synthetic(text: str) -> tuple[int, int, int]:
    """Parse 'WxH@N'."""
    m = _SYNTH_RE.match(text.strip())
    if not m:
        raise ValueError(f"synthetic scene must look like 64x48@10, got {text!r}")
    w, h, n = (int(g) for g in m.groups())
    if min(w, h, n) <= 0:
        raise ValueError("synthetic dimensions and count must be positive")
    return w, h, n


# --- PGM (binary P5, 8-bit) -------------------------------------------------

def write_pgm(path: str | Path, frame: Frame) -> None:
    y = frame.luma()
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode()
    Path(path).write_bytes(header + y.tobytes())


def _pgm_tokens(data: bytes) -> Iterator[tuple[bytes, int]]:
    pos = 0
    while True:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        yield data[start:pos], pos


def read_pgm(path: str | Path, index: int = 0) -> Frame:
    data = Path(path).read_bytes()
    tokens = _pgm_tokens(data)
    try:
        magic, _ = next(tokens)
        w_tok, _ = next(tokens)
        h_tok, _ = next(tokens)
        max_tok, end = next(tokens)
    except StopIteration:
        raise ValueError(f"{path}: truncated PGM header") from None
    if magic != b"P5":
        raise ValueError(f"{path}: only binary PGM (P5) is supported")
    w, h, maxval = int(w_tok), int(h_tok), int(max_tok)
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    pixels = data[end + 1 : end + 1 + w * h]
    if len(pixels) != w * h:
        raise ValueError(f"{path}: pixel data truncated")
    return Frame(w, h, GRAY8, pixels, index)


def load_frames(directory: str | Path) -> list[Frame]:
    paths = sorted(Path(directory).glob("*.pgm"))
    if not paths:
        raise ValueError(f"no .pgm frames in {directory}")
    return [read_pgm(p, i) for i, p in enumerate(paths)]


def save_frames(directory: str | Path, frames: Iterable[Frame], prefix: str = "frame") -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, f in enumerate(frames):
        p = out / f"{prefix}{i:05d}.pgm"
        write_pgm(p, f)
        paths.append(p)
    return paths
