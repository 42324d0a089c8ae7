"""Orthonormal discrete wavelet transforms (1D, 2D, multi-level).

Filter banks are kept as analysis/synthesis quadruples. The analysis
convention is correlation with stride 2:

    approx[k] = sum_j dec_lo[j] * x_ext[2k + j]
    detail[k] = sum_j dec_hi[j] * x_ext[2k + j]

so for haar the detail is (even - odd) / sqrt(2). Two boundary modes are
supported: Periodization (circular extension; odd lengths are first padded
by repeating the last sample; exact ceil(N/2) band lengths; energy is
preserved exactly) and Symmetric (whole-sample reflection, i.e. the edge
sample is not repeated; the transform keeps (N + L) // 2 coefficients per
band so that reconstruction is exact for asymmetric filters too).

2D transforms filter rows first, then columns; band names follow the
(row-pass, column-pass) order: LH = low-pass rows then high-pass columns.
All arithmetic is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import LevelCountError, SignalLengthError, UnknownWaveletError

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)

# Analysis low-pass taps; everything else is derived. db2 taps are the
# closed form ((1+s3), (3+s3), (3-s3), (1-s3)) / (4 sqrt 2) with s3=sqrt(3).
WAVELET_FILTERS = {
    "haar": {
        "dec_lo": [1.0 / _SQRT2, 1.0 / _SQRT2],
        "vanishing_moments": 1,
    },
    "db2": {
        "dec_lo": [
            (1.0 + _SQRT3) / (4.0 * _SQRT2),
            (3.0 + _SQRT3) / (4.0 * _SQRT2),
            (3.0 - _SQRT3) / (4.0 * _SQRT2),
            (1.0 - _SQRT3) / (4.0 * _SQRT2),
        ],
        "vanishing_moments": 2,
    },
}


class BoundaryMode(Enum):
    """Signal extension rule used at the borders."""

    PERIODIZATION = "periodization"
    SYMMETRIC = "symmetric"

    @classmethod
    def parse(cls, name: str) -> "BoundaryMode":
        key = str(name).strip().lower()
        if key in ("per", "periodization", "periodic"):
            return cls.PERIODIZATION
        if key in ("sym", "symmetric", "reflect"):
            return cls.SYMMETRIC
        raise ValueError(
            f"Unknown boundary mode '{name}'. Use 'per' or 'sym'."
        )


@dataclass(frozen=True)
class FilterBank:
    """Analysis/synthesis filter quadruple for one orthonormal wavelet."""

    name: str
    dec_lo: np.ndarray
    dec_hi: np.ndarray
    rec_lo: np.ndarray
    rec_hi: np.ndarray
    vanishing_moments: int

    def __len__(self) -> int:
        return self.dec_lo.shape[0]


def filter_bank(name: str) -> FilterBank:
    """Look up a wavelet by name and build its filter bank.

    The high-pass taps follow the quadrature-mirror rule
    dec_hi[k] = (-1)^k * dec_lo[L-1-k]; synthesis filters are the
    time-reverses of the analysis pair.
    """
    key = str(name).strip().lower()
    if key not in WAVELET_FILTERS:
        available = ", ".join(sorted(WAVELET_FILTERS))
        raise UnknownWaveletError(
            f"Unknown wavelet '{name}'. Available wavelets: {available}"
        )
    entry = WAVELET_FILTERS[key]
    dec_lo = np.asarray(entry["dec_lo"], dtype=np.float64)
    length = dec_lo.shape[0]
    signs = np.where(np.arange(length) % 2 == 0, 1.0, -1.0)
    dec_hi = signs * dec_lo[::-1]
    return FilterBank(
        name=key,
        dec_lo=dec_lo,
        dec_hi=dec_hi,
        rec_lo=dec_lo[::-1].copy(),
        rec_hi=dec_hi[::-1].copy(),
        vanishing_moments=int(entry["vanishing_moments"]),
    )


@dataclass
class SubbandQuad:
    """One level of a 2D decomposition: four equally shaped planes."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    source_shape: tuple[int, int]

    def planes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.ll, self.lh, self.hl, self.hh


@dataclass
class WaveletPyramid:
    """Multi-level 2D decomposition, detail triples finest to coarsest."""

    levels: list  # [(lh, hl, hh), ...]
    ll_final: np.ndarray
    source_shapes: list = field(default_factory=list)  # per-level input shape


def _band_length(n: int, filt_len: int, mode: BoundaryMode) -> int:
    if mode is BoundaryMode.PERIODIZATION:
        return (n + 1) // 2
    return (n + filt_len) // 2


def _reflect_last(x: np.ndarray, left: int, right: int) -> np.ndarray:
    """Whole-point symmetric extension along the last axis.

    The edge sample is not repeated (... x2 x1 | x0 x1 x2 ...), and the
    extension is periodic with period 2(n-1), so it stays valid even when
    the padding exceeds the signal length.
    """
    n = x.shape[-1]
    idx = np.arange(-left, n + right)
    period = max(2 * n - 2, 1)
    idx = np.mod(idx, period)
    idx = np.where(idx >= n, period - idx, idx)
    return x[..., idx]


def _analyze_last(x: np.ndarray, fb: FilterBank, mode: BoundaryMode):
    """One analysis step along the last axis. Returns (approx, detail)."""
    n = x.shape[-1]
    filt_len = len(fb)
    if mode is BoundaryMode.PERIODIZATION:
        if n < 2:
            raise SignalLengthError(
                f"Periodization needs length >= 2, got {n}"
            )
        if n % 2 == 1:
            x = np.concatenate([x, x[..., -1:]], axis=-1)
            n += 1
        n_out = n // 2
        if filt_len > 2:
            x_ext = np.concatenate([x, x[..., : filt_len - 2]], axis=-1)
        else:
            x_ext = x
    else:
        if n < filt_len:
            raise SignalLengthError(
                f"Symmetric mode needs length >= filter length "
                f"({filt_len}), got {n}"
            )
        n_out = (n + filt_len) // 2
        # Anchor analysis windows at even sample offsets (coefficient k taps
        # samples 2k - (L-2) ... 2k + 1), so stride-2 coefficients stay in
        # phase with pixel-parity structure instead of straddling it.
        x_ext = _reflect_last(x, filt_len - 2, filt_len)
    shape = x.shape[:-1] + (n_out,)
    approx = np.zeros(shape, dtype=np.float64)
    detail = np.zeros(shape, dtype=np.float64)
    for j in range(filt_len):
        window = x_ext[..., j : j + 2 * n_out - 1 : 2]
        approx += fb.dec_lo[j] * window
        detail += fb.dec_hi[j] * window
    return approx, detail


def _synthesize_last(
    approx: np.ndarray,
    detail: np.ndarray,
    fb: FilterBank,
    mode: BoundaryMode,
    length: int,
) -> np.ndarray:
    """Inverse of _analyze_last along the last axis, cropped to `length`."""
    if approx.shape != detail.shape:
        raise SignalLengthError(
            f"approx/detail length mismatch: {approx.shape[-1]} vs "
            f"{detail.shape[-1]}"
        )
    n = approx.shape[-1]
    filt_len = len(fb)
    if mode is BoundaryMode.PERIODIZATION:
        full = 2 * n
        buf = np.zeros(approx.shape[:-1] + (full + filt_len - 2,), np.float64)
        for j in range(filt_len):
            buf[..., j : j + 2 * n - 1 : 2] += (
                fb.dec_lo[j] * approx + fb.dec_hi[j] * detail
            )
        out = buf[..., :full].copy()
        if filt_len > 2:
            out[..., : filt_len - 2] += buf[..., full:]
        if length > full:
            raise SignalLengthError(
                f"Cannot reconstruct {length} samples from bands of "
                f"length {n}"
            )
        return out[..., :length]
    buf = np.zeros(approx.shape[:-1] + (2 * (n - 1) + filt_len,), np.float64)
    for j in range(filt_len):
        buf[..., j : j + 2 * n - 1 : 2] += (
            fb.dec_lo[j] * approx + fb.dec_hi[j] * detail
        )
    # The analysis anchors windows at sample -(L-2); position L-2 of the
    # overlap-add buffer is the first with complete filter-phase coverage.
    start = filt_len - 2
    if start + length > buf.shape[-1]:
        raise SignalLengthError(
            f"Cannot reconstruct {length} samples from bands of length {n}"
        )
    return buf[..., start : start + length].copy()


def dwt1d(signal, fb: FilterBank, mode: BoundaryMode):
    """Single-level 1D transform. Returns (approx, detail) arrays."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise SignalLengthError(f"dwt1d expects a 1D signal, got {x.ndim}D")
    return _analyze_last(x, fb, mode)


def idwt1d(approx, detail, fb: FilterBank, mode: BoundaryMode, length=None):
    """Single-level 1D inverse.

    `length` selects the output length (needed for odd-length signals);
    default assumes the source length was even: 2n for Periodization,
    2n - L for Symmetric.
    """
    a = np.asarray(approx, dtype=np.float64)
    d = np.asarray(detail, dtype=np.float64)
    if a.ndim != 1 or d.ndim != 1:
        raise SignalLengthError("idwt1d expects 1D band arrays")
    if length is None:
        if mode is BoundaryMode.PERIODIZATION:
            length = 2 * a.shape[0]
        else:
            length = 2 * a.shape[0] - len(fb)
    return _synthesize_last(a, d, fb, mode, int(length))


def dwt2d(plane, fb: FilterBank, mode: BoundaryMode) -> SubbandQuad:
    """One-level 2D transform: rows first, then columns."""
    x = np.asarray(plane, dtype=np.float64)
    if x.ndim != 2:
        raise SignalLengthError(f"dwt2d expects a 2D plane, got {x.ndim}D")
    height, width = x.shape
    if height < 2 or width < 2:
        raise SignalLengthError(
            f"dwt2d needs at least 2x2, got {height}x{width}"
        )
    low_rows, high_rows = _analyze_last(x, fb, mode)
    ll_t, lh_t = _analyze_last(low_rows.T, fb, mode)
    hl_t, hh_t = _analyze_last(high_rows.T, fb, mode)
    return SubbandQuad(
        ll=ll_t.T.copy(),
        lh=lh_t.T.copy(),
        hl=hl_t.T.copy(),
        hh=hh_t.T.copy(),
        source_shape=(height, width),
    )


def idwt2d(quad: SubbandQuad, fb: FilterBank, mode: BoundaryMode) -> np.ndarray:
    """Invert one 2D level back to the plane recorded in source_shape."""
    shapes = {p.shape for p in quad.planes()}
    if len(shapes) != 1:
        raise SignalLengthError(f"Sub-band shapes differ: {sorted(shapes)}")
    height, width = quad.source_shape
    # Undo the column pass on both half-planes, then the row pass.
    low_rows = _synthesize_last(quad.ll.T, quad.lh.T, fb, mode, height).T
    high_rows = _synthesize_last(quad.hl.T, quad.hh.T, fb, mode, height).T
    return _synthesize_last(low_rows, high_rows, fb, mode, width)


def max_decomposition_levels(shape, fb: FilterBank) -> int:
    """Largest usable level count for a plane shape (standard log2 rule)."""
    min_dim = min(int(shape[0]), int(shape[1]))
    denom = max(len(fb) - 1, 1)
    if min_dim < 2 * denom:
        return 1 if min_dim >= 2 else 0
    return int(math.log2(min_dim / denom) + 1e-12)


def wavedec2(
    plane, fb: FilterBank, levels: int, mode: BoundaryMode
) -> WaveletPyramid:
    """Multi-level 2D decomposition of the approximation chain."""
    x = np.asarray(plane, dtype=np.float64)
    if x.ndim != 2:
        raise SignalLengthError(f"wavedec2 expects a 2D plane, got {x.ndim}D")
    levels = int(levels)
    if levels < 1:
        raise LevelCountError(f"levels must be >= 1, got {levels}")
    cap = max_decomposition_levels(x.shape, fb)
    if levels > cap:
        raise LevelCountError(
            f"Requested {levels} levels but a {x.shape[0]}x{x.shape[1]} "
            f"plane supports at most {cap} with '{fb.name}'"
        )
    detail_levels = []
    source_shapes = []
    current = x
    for _ in range(levels):
        quad = dwt2d(current, fb, mode)
        detail_levels.append((quad.lh, quad.hl, quad.hh))
        source_shapes.append(quad.source_shape)
        current = quad.ll
    return WaveletPyramid(
        levels=detail_levels, ll_final=current, source_shapes=source_shapes
    )


def waverec2(
    pyramid: WaveletPyramid, fb: FilterBank, mode: BoundaryMode
) -> np.ndarray:
    """Invert wavedec2 exactly, walking coarsest to finest."""
    current = pyramid.ll_final
    paired = list(zip(pyramid.levels, pyramid.source_shapes))
    for (lh, hl, hh), shape in reversed(paired):
        quad = SubbandQuad(
            ll=current, lh=lh, hl=hl, hh=hh, source_shape=tuple(shape)
        )
        current = idwt2d(quad, fb, mode)
    return current
