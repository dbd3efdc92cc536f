"""Scene/RoI domain types and macro-pixel grid arithmetic.

Images are immutable 2D float64 fields in row-major order, nominally in
[0,1]; solver iterates may leave that range and are clamped only when
exported to 8/16-bit graymaps. Macro-pixel resampling is mean-binning one
way and pixel replication the other, so downsample(upsample(x)) round-trips
exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Image",
    "RoIWindow",
    "MacroGrid",
    "macro_downsample",
    "macro_upsample",
    "extract_window",
    "paste_window",
    "load_pgm",
    "save_pgm",
    "load_raw",
    "save_raw",
]

_VALID_MACROS = (8, 4, 2, 1)


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Image:
    """A 2D scalar field. `data` is a read-only float64 array of shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"image data must be 2D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image dimensions must be >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("image data contains non-finite entries")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @classmethod
    def zeros(cls, height, width):
        return cls(np.zeros((height, width)))

    def clamped(self):
        """Copy with values clipped to [0,1]; used at export time only."""
        return Image(np.clip(self.data, 0.0, 1.0))


@dataclass(frozen=True)
class RoIWindow:
    """Axis-aligned dyadic square sub-window with a macro-resolution state.

    current_macro only ever halves (8 -> 4 -> 2 -> 1); enforced by
    constructing successor windows through `refined()`.
    """

    row_offset: int
    col_offset: int
    side: int
    current_macro: int = 8
    label: int = 0

    def __post_init__(self):
        # coerce numpy integers so windows serialize cleanly
        for name in ("row_offset", "col_offset", "side", "current_macro",
                     "label"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.row_offset < 0 or self.col_offset < 0:
            raise ValueError("window offsets must be nonnegative")
        if not _is_pow2(self.side):
            raise ValueError(f"window side must be a power of two, got {self.side}")
        if self.current_macro not in _VALID_MACROS:
            raise ValueError(f"current_macro must be one of {_VALID_MACROS}")
        if self.side % self.current_macro != 0:
            raise ValueError(
                f"current_macro {self.current_macro} does not divide side {self.side}"
            )

    def refined(self):
        """The same window one macro level finer."""
        if self.current_macro == 1:
            raise ValueError("window is already at full resolution")
        return RoIWindow(self.row_offset, self.col_offset, self.side,
                         self.current_macro // 2, self.label)

    def fits_within(self, height, width):
        return (self.row_offset + self.side <= height
                and self.col_offset + self.side <= width)

    @property
    def grid_side(self):
        """Side of the macro grid at the current resolution."""
        return self.side // self.current_macro


@dataclass(frozen=True)
class MacroGrid:
    window_side: int
    macro_side: int
    num_macro_pixels: int = field(init=False)

    def __post_init__(self):
        if self.macro_side < 1 or self.window_side % self.macro_side != 0:
            raise ValueError(
                f"macro side {self.macro_side} does not divide window side {self.window_side}"
            )
        object.__setattr__(self, "num_macro_pixels",
                           (self.window_side // self.macro_side) ** 2)


def macro_downsample(img, macro_side):
    """Replace each macro_side x macro_side block with its arithmetic mean."""
    h, w = img.height, img.width
    if macro_side < 1 or h % macro_side or w % macro_side:
        raise ValueError(
            f"macro side {macro_side} does not divide image dimensions {h}x{w}"
        )
    if macro_side == 1:
        return img
    a = img.data.reshape(h // macro_side, macro_side, w // macro_side, macro_side)
    return Image(a.mean(axis=(1, 3)))


def macro_upsample(img, macro_side):
    """Replicate each pixel into a macro_side x macro_side block."""
    if macro_side < 1:
        raise ValueError("macro side must be >= 1")
    if macro_side == 1:
        return img
    return Image(np.repeat(np.repeat(img.data, macro_side, axis=0),
                           macro_side, axis=1))


def _check_inside(scene, roi):
    if not roi.fits_within(scene.height, scene.width):
        raise ValueError(
            f"window (+{roi.row_offset},+{roi.col_offset}) side {roi.side} "
            f"exceeds scene {scene.height}x{scene.width}"
        )


def extract_window(scene, roi):
    """Copy of the scene restricted to the window."""
    _check_inside(scene, roi)
    r, c, s = roi.row_offset, roi.col_offset, roi.side
    return Image(scene.data[r:r + s, c:c + s].copy())


def paste_window(scene, roi, patch):
    """The scene with the window contents replaced by `patch`."""
    _check_inside(scene, roi)
    if patch.height != roi.side or patch.width != roi.side:
        raise ValueError(
            f"patch {patch.height}x{patch.width} does not match window side {roi.side}"
        )
    out = scene.data.copy()
    r, c, s = roi.row_offset, roi.col_offset, roi.side
    out[r:r + s, c:c + s] = patch.data
    return Image(out)


# --- serialization ---------------------------------------------------------

def save_pgm(img, path, bits=8):
    """Write a binary (P5) graymap; values are clamped to [0,1] first."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    maxval = (1 << bits) - 1
    q = np.rint(np.clip(img.data, 0.0, 1.0) * maxval)
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    if bits == 8:
        payload = q.astype(np.uint8).tobytes()
    else:
        # 16-bit graymap samples are big-endian
        payload = q.astype(">u2").tobytes()
    with open(path, "wb") as f:
        f.write(header + payload)


def _read_pgm_token(f):
    tok = b""
    while True:
        ch = f.read(1)
        if not ch:
            raise ValueError("truncated graymap header")
        if ch == b"#":
            while ch not in (b"\n", b"\r", b""):
                ch = f.read(1)
            continue
        if ch.isspace():
            if tok:
                return tok
            continue
        tok += ch


def load_pgm(path):
    """Read a binary (P5) graymap into [0,1]."""
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic != b"P5":
            raise ValueError(f"not a binary graymap: {path}")
        width = int(_read_pgm_token(f))
        height = int(_read_pgm_token(f))
        maxval = int(_read_pgm_token(f))
        if not (0 < maxval < 65536):
            raise ValueError(f"bad graymap maxval {maxval}")
        dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
        count = height * width
        raw = np.frombuffer(f.read(count * dtype.itemsize), dtype=dtype, count=count)
        if raw.size != count:
            raise ValueError("truncated graymap payload")
    return Image(raw.reshape(height, width).astype(np.float64) / maxval)


def save_raw(img, path):
    """Raw float64 little-endian dump with a (height, width) uint32 header. Not clamped."""
    with open(path, "wb") as f:
        f.write(struct.pack("<II", img.height, img.width))
        f.write(img.data.astype("<f8").tobytes())


def load_raw(path):
    with open(path, "rb") as f:
        head = f.read(8)
        if len(head) != 8:
            raise ValueError("truncated raw image header")
        height, width = struct.unpack("<II", head)
        data = np.frombuffer(f.read(height * width * 8), dtype="<f8", count=height * width)
    return Image(data.reshape(height, width).astype(np.float64))
