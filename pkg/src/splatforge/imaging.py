"""Image, depth, and mask containers plus resampling and file codecs.

Containers hold float32 rasters and are treated as immutable after
construction. Depth uses sentinel 0.0 for "unknown"; every valid depth is
strictly positive.

File formats (byte layouts documented in the README):
  - Images: 8-bit RGB PNG (color type 2, bit depth 8, no interlace).
  - Depth / feature planes: grayscale PFM ("Pf"), float32, scale -1.0
    (little-endian), scanlines stored bottom-to-top per PFM convention.

Sampling uses pixel-index coordinates: integer (u, v) lands exactly on a
pixel center. Neighbors that carry zero interpolation weight are ignored
by the validity rule, so sampling exactly at any pixel center is always
valid and exact.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CodecError, SizeMismatchError

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@dataclass
class ImageRGB:
    """Row-major (H, W, 3) float32 RGB in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float32)
        if a.ndim != 3 or a.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got {a.shape}")
        if not np.isfinite(a).all():
            raise ValueError("image contains non-finite values")
        self.data = np.clip(a, 0.0, 1.0)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass
class DepthMap:
    """Row-major (H, W) float32 depths in scene units; 0.0 means unknown."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float32)
        if a.ndim != 2:
            raise ValueError(f"expected (H, W) array, got {a.shape}")
        if not np.isfinite(a).all():
            raise ValueError("depth contains non-finite values")
        if np.any(a < 0):
            raise ValueError("depth contains negative values")
        self.data = a

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def valid_mask(self) -> np.ndarray:
        return self.data > 0


@dataclass
class Mask:
    """Row-major (H, W) booleans; True marks valid / known pixels."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data)
        if a.ndim != 2:
            raise ValueError(f"expected (H, W) array, got {a.shape}")
        self.data = a.astype(bool)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def _raster(img) -> np.ndarray:
    return img.data if hasattr(img, "data") else np.asarray(img)


def bilinear_sample_many(data: np.ndarray, u: np.ndarray, v: np.ndarray,
                         invalid_value_mask: np.ndarray | None = None):
    """Bilinear sampling of an (H, W) or (H, W, C) array at index coords.

    Neighbors with zero interpolation weight do not affect validity, so
    u = W - 1 exactly is valid while u = -0.5 is not. If
    invalid_value_mask is given (True where a source pixel itself is
    invalid, e.g. depth sentinels), any nonzero-weight invalid neighbor
    also marks the sample invalid.

    Returns (values, valid); values are zero-filled where invalid.
    """
    a = np.asarray(data, dtype=np.float64)
    h, w = a.shape[:2]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)

    j0 = np.floor(u).astype(np.int64)
    i0 = np.floor(v).astype(np.int64)
    fj = u - j0
    fi = v - i0
    weights = [
        (i0, j0, (1.0 - fi) * (1.0 - fj)),
        (i0, j0 + 1, (1.0 - fi) * fj),
        (i0 + 1, j0, fi * (1.0 - fj)),
        (i0 + 1, j0 + 1, fi * fj),
    ]

    valid = np.ones(u.shape, dtype=bool)
    out_shape = u.shape + a.shape[2:]
    out = np.zeros(out_shape, dtype=np.float64)
    for ii, jj, wgt in weights:
        inb = (ii >= 0) & (ii < h) & (jj >= 0) & (jj < w)
        contributes = wgt != 0.0
        valid &= inb | ~contributes
        ic = np.clip(ii, 0, h - 1)
        jc = np.clip(jj, 0, w - 1)
        if invalid_value_mask is not None:
            valid &= ~(invalid_value_mask[ic, jc] & contributes & inb)
        sample = a[ic, jc]
        if a.ndim == 3:
            out += wgt[..., None] * sample
        else:
            out += wgt * sample
    if a.ndim == 3:
        out = np.where(valid[..., None], out, 0.0)
    else:
        out = np.where(valid, out, 0.0)
    return out, valid


def bilinear_sample(img, u: float, v: float):
    """Sample one value at pixel-index coordinates (u, v).

    Accepts ImageRGB, DepthMap, FeatureMap, or a bare array. Returns
    (value, valid); for a DepthMap, sentinel neighbors invalidate the
    sample like out-of-bounds ones.
    """
    data = _raster(img)
    sentinel = None
    if isinstance(img, DepthMap):
        sentinel = ~img.valid_mask()
    values, valid = bilinear_sample_many(
        data, np.array([u]), np.array([v]), invalid_value_mask=sentinel)
    ok = bool(valid[0])
    val = values[0]
    if val.ndim == 0:
        return float(val), ok
    return val, ok


def box_downsample2(arr: np.ndarray) -> np.ndarray:
    """2x2 box average; output dims are floor(dims / 2)."""
    a = np.asarray(arr, dtype=np.float64)
    h, w = a.shape[:2]
    if h < 2 or w < 2:
        raise SizeMismatchError(f"need at least 2x2 input, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    a = a[: h2 * 2, : w2 * 2]
    if a.ndim == 3:
        blocks = a.reshape(h2, 2, w2, 2, a.shape[2])
        return blocks.mean(axis=(1, 3))
    blocks = a.reshape(h2, 2, w2, 2)
    return blocks.mean(axis=(1, 3))


def resize_half(img: ImageRGB) -> ImageRGB:
    """Halve an image with a 2x2 box filter."""
    return ImageRGB(box_downsample2(img.data).astype(np.float32))


def box_filter_mean(arr: np.ndarray, radius: int) -> np.ndarray:
    """Mean over a (2r+1)^2 window with edge replication, same shape out.

    Accumulation order over the window is fixed, so results are identical
    across runs and thread counts.
    """
    a = np.asarray(arr, dtype=np.float64)
    padded = np.pad(a, radius, mode="edge")
    h, w = a.shape
    acc = np.zeros((h, w), dtype=np.float64)
    size = 2 * radius + 1
    for di in range(size):
        for dj in range(size):
            acc += padded[di:di + h, dj:dj + w]
    return acc / (size * size)


def psnr(a: ImageRGB, b: ImageRGB) -> float:
    """Peak signal-to-noise ratio in dB against a [0, 1] value range."""
    if a.data.shape != b.data.shape:
        raise SizeMismatchError(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    mse = float(np.mean((a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2))
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


# ---------------------------------------------------------------------------
# PNG codec (8-bit RGB, color type 2)
# ---------------------------------------------------------------------------

def _chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def encode_png(img: ImageRGB) -> bytes:
    """Encode to an 8-bit RGB PNG. Quantizes with round(x * 255)."""
    q = np.round(img.data.astype(np.float64) * 255.0).astype(np.uint8)
    h, w = q.shape[:2]
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    raw = bytearray()
    for row in q:
        raw.append(0)  # filter type 0
        raw.extend(row.tobytes())
    idat = zlib.compress(bytes(raw), 6)
    return b"".join([
        _PNG_SIGNATURE,
        _chunk(b"IHDR", ihdr),
        _chunk(b"IDAT", idat),
        _chunk(b"IEND", b""),
    ])


def _paeth(a, b, c):
    p = a.astype(np.int32) + b.astype(np.int32) - c.astype(np.int32)
    pa = np.abs(p - a)
    pb = np.abs(p - b)
    pc = np.abs(p - c)
    out = np.where((pa <= pb) & (pa <= pc), a, np.where(pb <= pc, b, c))
    return out.astype(np.uint8)


def _unfilter(raw: bytes, w: int, h: int, idat_offset: int) -> np.ndarray:
    stride = w * 3
    if len(raw) != h * (stride + 1):
        raise CodecError(
            f"decompressed size {len(raw)} != expected {h * (stride + 1)}", idat_offset)
    out = np.zeros((h, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.uint8)
    pos = 0
    for i in range(h):
        ftype = raw[pos]
        row = np.frombuffer(raw, dtype=np.uint8, count=stride, offset=pos + 1).copy()
        if ftype == 0:
            cur = row
        elif ftype == 2:
            cur = (row.astype(np.int32) + prev).astype(np.uint8)
        elif ftype in (1, 3, 4):
            cur = np.zeros(stride, dtype=np.uint8)
            left = np.zeros(3, dtype=np.uint8)
            ul = np.zeros(3, dtype=np.uint8)
            for j in range(0, stride, 3):
                up = prev[j:j + 3]
                if ftype == 1:
                    rec = row[j:j + 3] + left
                elif ftype == 3:
                    rec = row[j:j + 3] + ((left.astype(np.int32) + up) // 2).astype(np.uint8)
                else:
                    rec = row[j:j + 3] + _paeth(left, up, ul)
                cur[j:j + 3] = rec
                left = cur[j:j + 3]
                ul = up
        else:
            raise CodecError(f"bad filter type {ftype} on row {i}", idat_offset)
        out[i] = cur
        prev = cur
        pos += stride + 1
    return out.reshape(h, w, 3)


def decode_png(blob: bytes) -> ImageRGB:
    """Decode an 8-bit RGB PNG; raises CodecError with a byte offset."""
    if len(blob) < 8 or blob[:8] != _PNG_SIGNATURE:
        raise CodecError("not a PNG file (bad signature)", 0)
    pos = 8
    width = height = None
    idat = bytearray()
    idat_offset = 0
    saw_end = False
    while pos < len(blob):
        if pos + 8 > len(blob):
            raise CodecError("truncated chunk header", pos)
        (length,) = struct.unpack(">I", blob[pos:pos + 4])
        tag = blob[pos + 4:pos + 8]
        body_start = pos + 8
        body_end = body_start + length
        if body_end + 4 > len(blob):
            raise CodecError(f"truncated {tag!r} chunk", pos)
        body = blob[body_start:body_end]
        (crc,) = struct.unpack(">I", blob[body_end:body_end + 4])
        if crc != (zlib.crc32(tag + body) & 0xFFFFFFFF):
            raise CodecError(f"CRC mismatch in {tag!r} chunk", body_end)
        if tag == b"IHDR":
            if length != 13:
                raise CodecError("IHDR length != 13", pos)
            width, height, depth, color, comp, filt, inter = struct.unpack(">IIBBBBB", body)
            if depth != 8 or color != 2 or comp != 0 or filt != 0 or inter != 0:
                raise CodecError(
                    f"unsupported PNG (depth={depth} color={color} interlace={inter})", body_start)
        elif tag == b"IDAT":
            if width is None:
                raise CodecError("IDAT before IHDR", pos)
            if not idat:
                idat_offset = body_start
            idat.extend(body)
        elif tag == b"IEND":
            saw_end = True
            break
        pos = body_end + 4
    if width is None:
        raise CodecError("missing IHDR", 8)
    if not saw_end:
        raise CodecError("missing IEND", len(blob))
    if not idat:
        raise CodecError("missing IDAT", len(blob))
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise CodecError(f"zlib failure: {exc}", idat_offset) from None
    pixels = _unfilter(raw, width, height, idat_offset)
    return ImageRGB((pixels.astype(np.float32) / 255.0))


def write_png(path, img: ImageRGB) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_png(img))


def read_png(path) -> ImageRGB:
    with open(path, "rb") as fh:
        return decode_png(fh.read())


# ---------------------------------------------------------------------------
# PFM codec (grayscale float32, little-endian)
# ---------------------------------------------------------------------------

def encode_pfm(arr: np.ndarray) -> bytes:
    """Encode an (H, W) float32 array as a grayscale PFM, scale -1.0."""
    a = np.asarray(arr, dtype=np.float32)
    if a.ndim != 2:
        raise ValueError(f"expected (H, W) array, got {a.shape}")
    h, w = a.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    return header + a[::-1].tobytes()  # bottom-to-top scanlines


def decode_pfm(blob: bytes) -> np.ndarray:
    """Decode a grayscale PFM to an (H, W) float32 array."""
    pos = 0

    def token():
        nonlocal pos
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CodecError("truncated PFM header", start)
        return blob[start:pos], start

    magic, off = token()
    if magic != b"Pf":
        raise CodecError(f"bad PFM magic {magic!r} (only grayscale 'Pf' supported)", off)
    wtok, off = token()
    htok, off2 = token()
    stok, off3 = token()
    try:
        w, h, scale = int(wtok), int(htok), float(stok)
    except ValueError:
        raise CodecError("malformed PFM dimensions or scale", off) from None
    if w <= 0 or h <= 0:
        raise CodecError(f"bad PFM dimensions {w}x{h}", off)
    pos += 1  # single whitespace after scale
    need = w * h * 4
    data = blob[pos:pos + need]
    if len(data) != need:
        raise CodecError(f"PFM payload truncated ({len(data)} of {need} bytes)", pos)
    dt = "<f4" if scale < 0 else ">f4"
    a = np.frombuffer(data, dtype=dt).reshape(h, w)
    return a[::-1].astype(np.float32)


def write_pfm(path, arr: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pfm(arr))


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_pfm(fh.read())


def save_depth(path, depth: DepthMap) -> None:
    write_pfm(path, depth.data)


def load_depth(path) -> DepthMap:
    return DepthMap(read_pfm(path))
