"""Image tensors, channel normalization, and image file IO.

Images move through the suite as float32 CHW arrays. File pixels live in
[0, 1]; the network consumes the channel-standardized version. The inverse
transform clamps to [0, 1] only at export, never during optimization.

Lossless checkpoint format NSTR1 (little-endian):

    magic  5 bytes  b"NSTR1"
    dims   3 * uint32   C, H, W
    data   C*H*W float32, CHW row-major
"""

import struct

import numpy as np
from PIL import Image

from .errors import ConfigurationError

# channel statistics of the standard large-scale natural image corpus
CHANNEL_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
CHANNEL_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

RAW_MAGIC = b"NSTR1"


def _check_rgb01(x, name="image"):
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[0] != 3:
        raise ConfigurationError(f"{name} must be 3xHxW, got shape {x.shape}")
    return x.astype(np.float32, copy=False)


def normalize_image(x):
    """[0,1] RGB -> standardized network input."""
    x = _check_rgb01(x)
    return (x - CHANNEL_MEAN[:, None, None]) / CHANNEL_STD[:, None, None]


def denormalize_image(x, clamp=True):
    """Standardized network input -> [0,1] RGB (clamped at export)."""
    x = _check_rgb01(x)
    out = x * CHANNEL_STD[:, None, None] + CHANNEL_MEAN[:, None, None]
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out


def load_image(path, size=None):
    """PNG/JPEG file -> float32 3xHxW in [0,1], optionally resized square."""
    with Image.open(path) as im:
        im = im.convert("RGB")
        if size is not None:
            im = im.resize((int(size), int(size)), Image.BILINEAR)
        arr = np.asarray(im, dtype=np.float32) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def save_png(path, x):
    """float32 3xHxW in [0,1] -> 8-bit RGB PNG."""
    x = _check_rgb01(x)
    arr = np.clip(np.round(x * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(path, format="PNG")


def save_raw(path, x):
    """Lossless float32 checkpoint (NSTR1)."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 3:
        raise ConfigurationError(f"raw checkpoint must be 3-d, got shape {x.shape}")
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(struct.pack("<3I", *x.shape))
        fh.write(np.ascontiguousarray(x, dtype="<f4").tobytes())


def load_raw(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(RAW_MAGIC)] != RAW_MAGIC:
        raise ConfigurationError(f"{path}: not an NSTR1 raw image")
    c, h, w = struct.unpack_from("<3I", blob, len(RAW_MAGIC))
    need = len(RAW_MAGIC) + 12 + 4 * c * h * w
    if len(blob) != need:
        raise ConfigurationError(f"{path}: expected {need} bytes, found {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", offset=len(RAW_MAGIC) + 12)
    return data.reshape(c, h, w).astype(np.float32)
