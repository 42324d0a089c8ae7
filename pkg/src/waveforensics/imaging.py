"""Image decode, resize, and sub-band mosaic construction.

The classifier never sees raw coefficients; wavelet-domain inputs are
"mosaics": the four one-level sub-bands mapped into [0,1] (LL/2 for the
approximation, d/2 + 0.5 for details) and tiled [[LL, LH], [HL, HH]] so
the output has the same height/width as the input image.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, SignalLengthError
from .wavelets import BoundaryMode, FilterBank, dwt2d, filter_bank


@dataclass
class ImageTensor:
    """Float64 image, shape (height, width, channels), values in [0,1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"ImageTensor needs HxWxC data, got {arr.shape}")
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"ImageTensor supports 1 or 3 channels, got {arr.shape[2]}")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Domain:
    """Classifier input domain: raw pixels or one wavelet's mosaic."""

    kind: str  # "spatial" | "wavelet"
    wavelet: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("spatial", "wavelet"):
            raise ValueError(f"Unknown domain kind '{self.kind}'")
        if self.kind == "wavelet":
            filter_bank(self.wavelet)  # validates the name

    @classmethod
    def parse(cls, name: str) -> "Domain":
        key = str(name).strip().lower()
        if key == "spatial":
            return cls(kind="spatial")
        return cls(kind="wavelet", wavelet=key)

    def __str__(self) -> str:
        return "spatial" if self.kind == "spatial" else self.wavelet


def decode_image(data: bytes) -> ImageTensor:
    """Decode PNG/JPEG bytes to a float image in [0,1].

    Grayscale and palette sources are expanded to 3 identical/resolved
    channels; alpha is dropped.
    """
    try:
        img = Image.open(io.BytesIO(data))
        img = img.convert("RGB")
        img.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"Not a decodable PNG/JPEG image: {exc}") from exc
    arr = np.asarray(img, dtype=np.float64) / 255.0
    return ImageTensor(arr)


def load_image(path) -> ImageTensor:
    try:
        with open(path, "rb") as fh:
            return decode_image(fh.read())
    except OSError as exc:
        raise DecodeError(f"cannot read image file {path}: {exc.strerror or exc}")


def to_uint8(img: ImageTensor) -> np.ndarray:
    return np.clip(np.rint(img.data * 255.0), 0, 255).astype(np.uint8)


def save_png(img: ImageTensor, path) -> None:
    arr = to_uint8(img)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path, format="PNG")


def _axis_coords(n_in: int, n_out: int):
    """Half-pixel-centered source coordinates with clamp-to-edge."""
    scale = n_in / n_out
    x = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    i0 = np.floor(x).astype(np.int64)
    frac = x - i0
    lo = np.clip(i0, 0, n_in - 1)
    hi = np.clip(i0 + 1, 0, n_in - 1)
    return lo, hi, frac


def resize_bilinear(img: ImageTensor, out_h: int, out_w: int) -> ImageTensor:
    """Bilinear resize with half-pixel-centered sampling.

    Identity when the size is unchanged; output values never leave the
    input's value range (convex blending).
    """
    out_h, out_w = int(out_h), int(out_w)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"Bad target size {out_h}x{out_w}")
    src = img.data
    if src.shape[0] == out_h and src.shape[1] == out_w:
        return ImageTensor(src.copy())
    y0, y1, fy = _axis_coords(src.shape[0], out_h)
    x0, x1, fx = _axis_coords(src.shape[1], out_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    return ImageTensor(top * (1.0 - fy) + bottom * fy)


def _crop_band(band: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Center-crop a sub-band to the mosaic quadrant size.

    Periodization bands already match; Symmetric bands carry extra
    boundary coefficients (surplus L/2 per axis) and are cropped with a
    leading bias on odd surplus.
    """
    oh = (band.shape[0] - out_h) // 2
    ow = (band.shape[1] - out_w) // 2
    return band[oh : oh + out_h, ow : ow + out_w]


def subband_mosaic(
    img: ImageTensor, fb: FilterBank, mode: BoundaryMode
) -> ImageTensor:
    """Tile the four one-level sub-bands of each channel into one plane.

    Bands are affinely mapped into [0,1] (LL -> LL/2, detail -> d/2 + 0.5,
    then clamped) and arranged [[LL, LH], [HL, HH]]; the result has the
    same shape as the input.
    """
    height, width = img.height, img.width
    if height % 2 == 1 or width % 2 == 1:
        raise SignalLengthError(
            f"subband_mosaic needs even dimensions, got {height}x{width}; "
            "resize the image first"
        )
    h2, w2 = height // 2, width // 2
    out = np.empty_like(img.data)
    for c in range(img.channels):
        quad = dwt2d(img.data[:, :, c], fb, mode)
        ll = _crop_band(quad.ll, h2, w2) / 2.0
        lh = _crop_band(quad.lh, h2, w2) / 2.0 + 0.5
        hl = _crop_band(quad.hl, h2, w2) / 2.0 + 0.5
        hh = _crop_band(quad.hh, h2, w2) / 2.0 + 0.5
        out[:h2, :w2, c] = ll
        out[:h2, w2:, c] = lh
        out[h2:, :w2, c] = hl
        out[h2:, w2:, c] = hh
    np.clip(out, 0.0, 1.0, out=out)
    return ImageTensor(out)


def prepare(img: ImageTensor, domain: Domain, side: int) -> ImageTensor:
    """Resize to side x side and apply the domain transform.

    Spatial passes pixels through; Wavelet domains build the sub-band
    mosaic with Symmetric boundary handling (no wrap-around seams).
    Output is always side x side x 3.
    """
    side = int(side)
    resized = resize_bilinear(img, side, side)
    data = resized.data
    if data.shape[2] == 1:
        data = np.repeat(data, 3, axis=2)
        resized = ImageTensor(data)
    if domain.kind == "spatial":
        return resized
    fb = filter_bank(domain.wavelet)
    return subband_mosaic(resized, fb, BoundaryMode.SYMMETRIC)
