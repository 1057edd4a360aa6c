"""Image and disparity-map I/O, resizing, and post-filters.

Grayscale images are float64 arrays in [0, 1], indexed ``img[j, i]``
with ``j`` the row and ``i`` the column.  Disparity maps carry a value
grid plus a validity mask.  Supported formats: PGM (P2/P5) and PPM
(P3/P6) up to 16-bit, and a raw little-endian float32 sidecar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError

# Rec. 601 luma weights for color -> gray
_LUMA = np.array([0.299, 0.587, 0.114])

FLOAT_RASTER_MAGIC = b"DISPF32\n"


@dataclass
class DisparityMap:
    """Per-pixel disparity in full-resolution pixel units."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.valid is None:
            self.valid = np.ones(self.values.shape, dtype=bool)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.ndim != 2 or self.valid.shape != self.values.shape:
            raise ValueError("disparity values and mask must be matching 2-d arrays")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @classmethod
    def full(cls, values) -> "DisparityMap":
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.ones(values.shape, dtype=bool))


# --- netpbm parsing -----------------------------------------------------------


class _ByteReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def error(self, message: str) -> ParseError:
        return ParseError(message, offset=self.pos)

    def token(self) -> bytes:
        # skip whitespace and '#' comments
        while self.pos < len(self.data):
            c = self.data[self.pos]
            if c in b"#":
                while self.pos < len(self.data) and self.data[self.pos] not in b"\n":
                    self.pos += 1
            elif c in b" \t\r\n\x0b\x0c":
                self.pos += 1
            else:
                break
        if self.pos >= len(self.data):
            raise self.error("unexpected end of file in header")
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos] not in b" \t\r\n\x0b\x0c#":
            self.pos += 1
        return self.data[start : self.pos]

    def int_token(self, what: str) -> int:
        tok = self.token()
        try:
            return int(tok)
        except ValueError:
            raise self.error(f"expected integer {what}, got {tok!r}") from None


def load_pnm_raw(path) -> tuple[np.ndarray, int]:
    """Read a PGM/PPM file into an integer array (gray ``(H, W)`` or color
    ``(H, W, 3)``) plus its maxval."""
    with open(path, "rb") as fh:
        data = fh.read()
    rd = _ByteReader(data)
    magic = rd.token()
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise rd.error(f"unsupported netpbm magic {magic!r}")
    width = rd.int_token("width")
    height = rd.int_token("height")
    maxval = rd.int_token("maxval")
    if width < 1 or height < 1:
        raise rd.error(f"bad dimensions {width}x{height}")
    if not 0 < maxval <= 65535:
        raise rd.error(f"maxval {maxval} out of range (1..65535)")
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels

    if magic in (b"P2", b"P3"):
        values = np.empty(count, dtype=np.int64)
        for k in range(count):
            values[k] = rd.int_token("sample")
    else:
        # exactly one whitespace byte separates header from binary payload
        if rd.pos >= len(data) or data[rd.pos] not in b" \t\r\n\x0b\x0c":
            raise rd.error("missing separator before binary payload")
        rd.pos += 1
        itemsize = 2 if maxval > 255 else 1
        need = count * itemsize
        have = len(data) - rd.pos
        if have < need:
            rd.pos = len(data)
            raise rd.error(f"truncated payload: need {need} bytes, have {have}")
        dt = np.dtype(">u2") if itemsize == 2 else np.dtype("u1")
        values = np.frombuffer(
            data, dtype=dt, count=count, offset=rd.pos
        ).astype(np.int64)

    if values.max(initial=0) > maxval:
        raise ParseError(f"sample exceeds declared maxval {maxval}")
    shape = (height, width, 3) if channels == 3 else (height, width)
    return values.reshape(shape), maxval


def load_image(path) -> np.ndarray:
    """Grayscale image in [0, 1]; color inputs are converted with the
    Rec. 601 luma weights."""
    raw, maxval = load_pnm_raw(path)
    img = raw.astype(np.float64) / maxval
    if img.ndim == 3:
        img = img @ _LUMA
    return img


def load_disparity(path, scale: float = 8.0) -> DisparityMap:
    """Disparity map from a PGM of scaled integer values."""
    raw, _ = load_pnm_raw(path)
    if raw.ndim != 2:
        raise ParseError("disparity maps must be single-channel PGM")
    return DisparityMap.full(raw.astype(np.float64) / scale)


def save_pgm_raw(path, values: np.ndarray, maxval: int) -> None:
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError("expected a 2-d array")
    if not 0 < maxval <= 65535:
        raise ValueError("maxval out of range")
    if values.min(initial=0) < 0 or values.max(initial=0) > maxval:
        raise ValueError("sample out of range for declared maxval")
    header = f"P5\n{values.shape[1]} {values.shape[0]}\n{maxval}\n".encode()
    if maxval > 255:
        payload = values.astype(">u2").tobytes()
    else:
        payload = values.astype("u1").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


def save_disparity_pgm(path, dmap: DisparityMap, scale: float = 8.0) -> None:
    """16-bit PGM of ``round(value * scale)``; exact for disparities that
    are multiples of ``1/scale``.  Invalid pixels are written as 0."""
    ints = np.rint(dmap.values * scale).astype(np.int64)
    ints = np.clip(ints, 0, 65535)
    ints[~dmap.valid] = 0
    save_pgm_raw(path, ints, 65535)


def save_image_pgm(path, img: np.ndarray, maxval: int = 255) -> None:
    ints = np.clip(np.rint(np.asarray(img) * maxval), 0, maxval).astype(np.int64)
    save_pgm_raw(path, ints, maxval)


# --- float32 sidecar ----------------------------------------------------------


def write_float_raster(path, dmap: DisparityMap) -> None:
    """8-byte magic, two little-endian uint32 (width, height), then
    row-major little-endian float32 samples; invalid pixels become NaN."""
    vals = dmap.values.astype("<f4")
    vals[~dmap.valid] = np.nan
    with open(path, "wb") as fh:
        fh.write(FLOAT_RASTER_MAGIC)
        fh.write(np.array([dmap.width, dmap.height], dtype="<u4").tobytes())
        fh.write(vals.tobytes())


def read_float_raster(path) -> DisparityMap:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != FLOAT_RASTER_MAGIC:
        raise ParseError(f"bad float raster magic {data[:8]!r}", offset=0)
    if len(data) < 16:
        raise ParseError("truncated float raster header", offset=len(data))
    width, height = np.frombuffer(data, dtype="<u4", count=2, offset=8)
    need = 16 + 4 * int(width) * int(height)
    if len(data) < need:
        raise ParseError("truncated float raster payload", offset=len(data))
    vals = np.frombuffer(data, dtype="<f4", count=int(width) * int(height), offset=16)
    vals = vals.reshape(int(height), int(width)).astype(np.float64)
    return DisparityMap(vals, ~np.isnan(vals))


# --- resizing -----------------------------------------------------------------

SUPPORTED_FACTORS = tuple(1.0 / (1 << k) for k in range(6))


def resize_area(img: np.ndarray, factor: float) -> np.ndarray:
    """Downsample by area averaging; output dims are ``ceil(dim * factor)``
    and edge blocks average only the pixels they cover."""
    if factor not in SUPPORTED_FACTORS:
        raise ValueError(f"unsupported resize factor {factor}")
    if factor == 1.0:
        return np.array(img, dtype=np.float64)
    img = np.asarray(img, dtype=np.float64)
    block = int(round(1.0 / factor))
    h, w = img.shape
    row_bounds = np.arange(0, h, block)
    col_bounds = np.arange(0, w, block)
    sums = np.add.reduceat(np.add.reduceat(img, row_bounds, axis=0), col_bounds, axis=1)
    row_sizes = np.minimum(row_bounds + block, h) - row_bounds
    col_sizes = np.minimum(col_bounds + block, w) - col_bounds
    return sums / np.outer(row_sizes, col_sizes)


def upscale_nearest(values: np.ndarray, out_height: int, out_width: int, factor: float) -> np.ndarray:
    """Nearest-neighbor upscale of a coarse grid to full resolution;
    output pixel (J, I) reads coarse pixel (floor(J*factor), floor(I*factor))."""
    values = np.asarray(values)
    rows = np.minimum((np.arange(out_height) * factor).astype(np.int64), values.shape[0] - 1)
    cols = np.minimum((np.arange(out_width) * factor).astype(np.int64), values.shape[1] - 1)
    return values[np.ix_(rows, cols)]


# --- filters ------------------------------------------------------------------


def _pad_edge(values: np.ndarray, radius: int) -> np.ndarray:
    return np.pad(values, radius, mode="edge")


def median_filter(dmap: DisparityMap, window: int) -> DisparityMap:
    """Window median with replicate borders.

    The lower of the two middle values is taken when a window holds an
    even count (only possible with masked pixels), so outputs stay
    within the input value set.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"median window must be odd, got {window}")
    if window == 1:
        return DisparityMap(dmap.values.copy(), dmap.valid.copy())
    radius = window // 2

    if dmap.valid.all():
        padded = _pad_edge(dmap.values, radius)
        win = np.lib.stride_tricks.sliding_window_view(padded, (window, window))
        flat = win.reshape(win.shape[0], win.shape[1], -1)
        ordered = np.sort(flat, axis=-1)
        out = ordered[..., (window * window - 1) // 2]
        return DisparityMap(np.ascontiguousarray(out), dmap.valid.copy())

    out = dmap.values.copy()
    h, w = dmap.values.shape
    for j in range(h):
        for i in range(w):
            j0, j1 = max(0, j - radius), min(h, j + radius + 1)
            i0, i1 = max(0, i - radius), min(w, i + radius + 1)
            vals = dmap.values[j0:j1, i0:i1][dmap.valid[j0:j1, i0:i1]]
            if vals.size:
                out[j, i] = np.sort(vals, axis=None)[(vals.size - 1) // 2]
    return DisparityMap(out, dmap.valid.copy())


def _disk_offsets(diameter: int) -> list[tuple[int, int]]:
    radius = diameter / 2.0
    r = int(np.floor(radius))
    offsets = []
    for dj in range(-r, r + 1):
        for di in range(-r, r + 1):
            if dj * dj + di * di <= radius * radius:
                offsets.append((dj, di))
    return offsets


def bilateral_filter(
    dmap: DisparityMap, diameter: int, sigma_color: float, sigma_space: float
) -> DisparityMap:
    """Gaussian range/space bilateral filter over a circular neighborhood.

    Weights: exp(-dv^2 / 2 sigma_color^2) * exp(-d^2 / 2 sigma_space^2),
    normalized per pixel; borders replicate.  Invalid pixels contribute
    nothing and are left unchanged.
    """
    if diameter < 1:
        raise ValueError("diameter must be >= 1")
    if sigma_color <= 0 or sigma_space <= 0:
        raise ValueError("sigmas must be positive")

    values = dmap.values
    h, w = values.shape
    radius = diameter // 2 + 1
    padded = _pad_edge(values, radius)
    padded_valid = np.pad(dmap.valid, radius, mode="edge")

    acc = np.zeros((h, w), dtype=np.float64)
    norm = np.zeros((h, w), dtype=np.float64)
    inv2sc = 1.0 / (2.0 * sigma_color * sigma_color)
    inv2ss = 1.0 / (2.0 * sigma_space * sigma_space)
    for dj, di in _disk_offsets(diameter):
        shifted = padded[radius + dj : radius + dj + h, radius + di : radius + di + w]
        svalid = padded_valid[radius + dj : radius + dj + h, radius + di : radius + di + w]
        dv = shifted - values
        weight = np.exp(-(dv * dv) * inv2sc - (dj * dj + di * di) * inv2ss)
        weight = weight * svalid
        acc += weight * shifted
        norm += weight
    out = values.copy()
    ok = dmap.valid & (norm > 0)
    out[ok] = acc[ok] / norm[ok]
    return DisparityMap(out, dmap.valid.copy())
