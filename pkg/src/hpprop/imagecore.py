"""Image buffers, color-space conversion, and file IO.

Planes are 2D float64 arrays in [0,1]; color images are H x W x 3 float64
arrays in [0,1]. Supported file formats: binary PPM (P6, maxval 255) and
8-bit PNG (RGB or grayscale). 16-bit depths, alpha channels, and palettes
are rejected at load.
"""

import os

import numpy as np
from PIL import Image


class ImageFormatError(ValueError):
    """Unsupported or malformed image file."""


class ImageReadError(OSError):
    """File missing or unreadable."""


def validate_plane(p, boxed=True):
    """Check a single-channel plane: 2D, finite, optionally in [0,1]."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError(f"expected 2D plane, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("plane contains NaN/Inf")
    if boxed and (p.min() < 0.0 or p.max() > 1.0):
        raise ValueError("plane values outside [0,1]")
    return p


def validate_color(img):
    """Check a color image: H x W x 3, finite, in [0,1]."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected H x W x 3 image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains NaN/Inf")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values outside [0,1]")
    return img


def _read_ppm(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] != b"P6":
        raise ImageFormatError(f"{path}: not a P6 PPM")
    # header: magic, width, height, maxval as ASCII tokens, # comments allowed
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated PPM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in fields)
    except ValueError:
        raise ImageFormatError(f"{path}: corrupt PPM header") from None
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"{path}: corrupt PPM header")
    if maxval != 255:
        raise ImageFormatError(f"{path}: only maxval 255 PPM supported")
    need = width * height * 3
    raw = data[pos : pos + need]
    if len(raw) != need:
        raise ImageFormatError(f"{path}: truncated PPM pixel data")
    pix = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return pix.astype(np.float64) / 255.0


def _read_png(path):
    try:
        im = Image.open(path)
        im.load()
    except Exception as e:
        raise ImageFormatError(f"{path}: cannot decode PNG ({e})") from e
    if im.format != "PNG":
        raise ImageFormatError(f"{path}: not a PNG file")
    if im.mode == "L":
        arr = np.asarray(im, dtype=np.uint8)
        arr = np.stack([arr] * 3, axis=-1)
    elif im.mode == "RGB":
        arr = np.asarray(im, dtype=np.uint8)
    else:
        raise ImageFormatError(
            f"{path}: unsupported PNG mode {im.mode!r} (only 8-bit RGB/gray)"
        )
    return arr.astype(np.float64) / 255.0


def load_image(path):
    """Load an 8-bit PPM(P6) or PNG as a float color image, values byte/255."""
    if not os.path.isfile(path):
        raise ImageReadError(f"{path}: no such file")
    with open(path, "rb") as f:
        magic = f.read(8)
    if magic[:2] == b"P6":
        return _read_ppm(path)
    if magic == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    raise ImageFormatError(f"{path}: unsupported format (expected PPM P6 or PNG)")


def quantize(img):
    """Map [0,1] floats to bytes: round half up, then clamp to [0,255]."""
    img = np.asarray(img, dtype=np.float64)
    b = np.floor(img * 255.0 + 0.5)
    return np.clip(b, 0, 255).astype(np.uint8)


def save_image(img, path):
    """Write a color image as PPM P6 or PNG, chosen by file extension."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected H x W x 3 image, got shape {img.shape}")
    pix = quantize(img)
    ext = os.path.splitext(path)[1].lower()
    if ext in (".ppm", ""):
        h, w = pix.shape[:2]
        header = f"P6\n{w} {h}\n255\n".encode("ascii")
        with open(path, "wb") as f:
            f.write(header)
            f.write(pix.tobytes())
    elif ext == ".png":
        Image.fromarray(pix, mode="RGB").save(path, format="PNG")
    else:
        raise ImageFormatError(f"{path}: unsupported output extension {ext!r}")


def rgb_to_hsv(img):
    """Split RGB into H, S, V planes; H normalized to [0,1), V = max(R,G,B)."""
    img = np.asarray(img, dtype=np.float64)
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    v = np.max(img, axis=-1)
    c = v - np.min(img, axis=-1)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)

    # hue sector from the channel achieving the max; achromatic pixels get 0
    with np.errstate(divide="ignore", invalid="ignore"):
        safe_c = np.where(c > 0, c, 1.0)
        h_r = ((g - b) / safe_c) % 6.0
        h_g = (b - r) / safe_c + 2.0
        h_b = (r - g) / safe_c + 4.0
    h = np.where(v == r, h_r, np.where(v == g, h_g, h_b))
    h = np.where(c > 0, h / 6.0, 0.0)
    h = np.where(h >= 1.0, h - 1.0, h)
    return h, s, v


def hsv_to_rgb(h, s, v):
    """Inverse of rgb_to_hsv; planes must share one shape."""
    h = np.asarray(h, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if not (h.shape == s.shape == v.shape):
        raise ValueError(
            f"HSV plane shapes differ: {h.shape}, {s.shape}, {v.shape}"
        )
    h6 = h * 6.0
    i = np.floor(h6).astype(np.int64) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)
