"""Filter identities, pinned transforms, round trips, and band shapes."""

import math

import numpy as np
import pytest

from waveforensics.errors import (
    LevelCountError,
    SignalLengthError,
    UnknownWaveletError,
)
from waveforensics.wavelets import (
    BoundaryMode,
    SubbandQuad,
    dwt1d,
    dwt2d,
    filter_bank,
    idwt1d,
    idwt2d,
    max_decomposition_levels,
    wavedec2,
    waverec2,
)

PER = BoundaryMode.PERIODIZATION
SYM = BoundaryMode.SYMMETRIC
SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)


# ---------------------------------------------------------------- filters

def test_filter_bank_names_and_lengths():
    assert len(filter_bank("haar")) == 2
    assert len(filter_bank("db2")) == 4
    assert filter_bank("HAAR").name == "haar"


def test_unknown_wavelet_lists_available():
    with pytest.raises(UnknownWaveletError) as err:
        filter_bank("db9")
    assert "db2" in str(err.value) and "haar" in str(err.value)


def test_db2_matches_closed_form():
    fb = filter_bank("db2")
    expected = np.array(
        [
            (1.0 + SQRT3) / (4.0 * SQRT2),
            (3.0 + SQRT3) / (4.0 * SQRT2),
            (3.0 - SQRT3) / (4.0 * SQRT2),
            (1.0 - SQRT3) / (4.0 * SQRT2),
        ]
    )
    assert np.max(np.abs(fb.dec_lo - expected)) < 1e-12


@pytest.mark.parametrize("name", ["haar", "db2"])
def test_orthonormal_filter_identities(name):
    fb = filter_bank(name)
    lo, hi = fb.dec_lo, fb.dec_hi
    length = len(fb)
    assert abs(lo.sum() - SQRT2) < 1e-12
    assert abs((lo * lo).sum() - 1.0) < 1e-12
    # shift-2 orthogonality of the low-pass with itself
    for shift in range(2, length, 2):
        assert abs(np.dot(lo[shift:], lo[:-shift])) < 1e-12
    # quadrature-mirror construction and cross-orthogonality
    signs = np.where(np.arange(length) % 2 == 0, 1.0, -1.0)
    assert np.max(np.abs(hi - signs * lo[::-1])) < 1e-12
    assert abs(np.dot(lo, hi)) < 1e-12
    assert abs(hi.sum()) < 1e-12
    # synthesis pair is the time reverse of the analysis pair
    assert np.array_equal(fb.rec_lo, lo[::-1])
    assert np.array_equal(fb.rec_hi, hi[::-1])


def test_vanishing_moment_counts():
    assert filter_bank("haar").vanishing_moments == 1
    assert filter_bank("db2").vanishing_moments == 2


# ------------------------------------------------------------------- 1D

def test_dwt1d_haar_hand_example():
    approx, detail = dwt1d([4.0, 6.0, 10.0, 12.0], filter_bank("haar"), PER)
    assert np.allclose(approx, [7.0710678, 15.5563492], atol=1e-6)
    assert np.allclose(detail, [-1.4142136, -1.4142136], atol=1e-6)


@pytest.mark.parametrize("name", ["haar", "db2"])
@pytest.mark.parametrize("mode", [PER, SYM])
def test_dwt1d_constant_signal_has_zero_detail(name, mode):
    _, detail = dwt1d(np.full(16, 3.7), filter_bank(name), mode)
    assert np.max(np.abs(detail)) < 1e-12


def test_dwt1d_db2_annihilates_ramp_interior():
    # direct-convolution oracle for the wrap-free interior coefficients
    ramp = np.arange(16, dtype=np.float64)
    fb = filter_bank("db2")
    _, detail = dwt1d(ramp, fb, PER)
    interior = [
        np.dot(fb.dec_hi, ramp[2 * k : 2 * k + 4]) for k in range(len(ramp) // 2 - 1)
    ]
    assert np.max(np.abs(detail[: len(interior)] - interior)) < 1e-12
    assert np.max(np.abs(np.asarray(interior))) < 1e-10


def test_dwt1d_symmetric_matches_reflection_oracle():
    # hand-built whole-point extension (edge sample not repeated), then
    # plain correlation with stride 2: independent route to the same numbers
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])
    ext = np.array([3, 2, 1, 2, 3, 4, 5, 6, 7, 6, 5, 4, 3], dtype=np.float64)
    fb = filter_bank("db2")
    approx, detail = dwt1d(x, fb, SYM)
    assert approx.shape == (5,) and detail.shape == (5,)
    for k in range(5):
        window = ext[2 * k : 2 * k + 4]
        assert abs(approx[k] - np.dot(fb.dec_lo, window)) < 1e-12
        assert abs(detail[k] - np.dot(fb.dec_hi, window)) < 1e-12


def test_dwt1d_rejects_too_short_signals():
    with pytest.raises(SignalLengthError):
        dwt1d([1.0], filter_bank("haar"), PER)
    with pytest.raises(SignalLengthError):
        dwt1d([1.0, 2.0, 3.0], filter_bank("db2"), SYM)


def test_idwt1d_inverts_hand_example():
    out = idwt1d(
        [7.0710678, 15.5563492],
        [-1.4142136, -1.4142136],
        filter_bank("haar"),
        PER,
    )
    assert np.allclose(out, [4.0, 6.0, 10.0, 12.0], atol=1e-6)


def test_idwt1d_zero_bands_give_zero_signal():
    out = idwt1d(np.zeros(8), np.zeros(8), filter_bank("db2"), PER)
    assert np.array_equal(out, np.zeros(16))


def test_idwt1d_rejects_mismatched_bands():
    with pytest.raises(SignalLengthError):
        idwt1d(np.zeros(4), np.zeros(5), filter_bank("haar"), PER)


@pytest.mark.parametrize("name", ["haar", "db2"])
@pytest.mark.parametrize("mode", [PER, SYM])
def test_round_trip_1d_random_signals(name, mode):
    fb = filter_bank(name)
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(1000):
        x = rng.standard_normal(64)
        approx, detail = dwt1d(x, fb, mode)
        back = idwt1d(approx, detail, fb, mode)
        worst = max(worst, float(np.max(np.abs(back - x))))
    assert worst < 1e-9


@pytest.mark.parametrize("name", ["haar", "db2"])
@pytest.mark.parametrize("mode", [PER, SYM])
def test_round_trip_1d_awkward_lengths(name, mode):
    fb = filter_bank(name)
    rng = np.random.default_rng(7)
    lengths = [n for n in range(len(fb), 40)] + [63, 64, 65, 128, 513]
    if mode is PER:
        lengths = [n for n in lengths if n >= 2]
    for n in lengths:
        x = rng.standard_normal(n)
        approx, detail = dwt1d(x, fb, mode)
        back = idwt1d(approx, detail, fb, mode, length=n)
        assert np.max(np.abs(back - x)) < 1e-9, f"length {n}"


def test_symmetric_band_length_contract():
    for name, n in (("haar", 10), ("haar", 11), ("db2", 10), ("db2", 13)):
        fb = filter_bank(name)
        approx, _ = dwt1d(np.zeros(n), fb, SYM)
        assert approx.shape[0] == (n + len(fb)) // 2


# ------------------------------------------------------------------- 2D

def test_dwt2d_hand_example():
    quad = dwt2d([[1.0, 2.0], [3.0, 4.0]], filter_bank("haar"), PER)
    assert np.allclose(quad.ll, [[5.0]])
    assert np.allclose(quad.lh, [[-2.0]])
    assert np.allclose(quad.hl, [[-1.0]])
    assert np.allclose(quad.hh, [[0.0]])


def test_dwt2d_constant_plane():
    quad = dwt2d(np.full((8, 8), 1.5), filter_bank("haar"), PER)
    assert np.allclose(quad.ll, 3.0, atol=1e-12)
    for band in (quad.lh, quad.hl, quad.hh):
        assert np.max(np.abs(band)) < 1e-12


@pytest.mark.parametrize("name", ["haar", "db2"])
def test_dwt2d_parseval_periodization(name):
    fb = filter_bank(name)
    rng = np.random.default_rng(11)
    x = rng.standard_normal((32, 32))
    quad = dwt2d(x, fb, PER)
    coeff_energy = sum(float((p * p).sum()) for p in quad.planes())
    energy = float((x * x).sum())
    assert abs(coeff_energy - energy) / energy < 1e-9


def test_dwt2d_linearity():
    fb = filter_bank("db2")
    rng = np.random.default_rng(3)
    a = rng.standard_normal((16, 16))
    b = rng.standard_normal((16, 16))
    qa, qb = dwt2d(a, fb, PER), dwt2d(b, fb, PER)
    qc = dwt2d(2.5 * a - 0.5 * b, fb, PER)
    for pa, pb, pc in zip(qa.planes(), qb.planes(), qc.planes()):
        assert np.max(np.abs(pc - (2.5 * pa - 0.5 * pb))) < 1e-10


def test_dwt2d_periodization_shape_contract():
    fb = filter_bank("db2")
    for shape in ((8, 8), (9, 9), (33, 47), (5, 9)):
        quad = dwt2d(np.zeros(shape), fb, PER)
        want = ((shape[0] + 1) // 2, (shape[1] + 1) // 2)
        assert quad.ll.shape == want
        assert quad.source_shape == shape


def test_dwt2d_rejects_degenerate_shapes():
    with pytest.raises(SignalLengthError):
        dwt2d(np.zeros((1, 8)), filter_bank("haar"), PER)
    with pytest.raises(SignalLengthError):
        dwt2d(np.zeros(8), filter_bank("haar"), PER)


@pytest.mark.parametrize("name", ["haar", "db2"])
@pytest.mark.parametrize("mode", [PER, SYM])
def test_checkerboard_lands_entirely_in_hh(name, mode):
    # A pure +-g checkerboard is the Nyquist tone in both axes. Whole-point
    # reflection maps it onto itself, so in both modes every HH coefficient
    # must be exactly 2g (the filters' Nyquist gain is sqrt(2) per axis) and
    # the other three bands must vanish. This pins the analysis windows to
    # even sample offsets: windows anchored off-parity smear the tone across
    # bands instead.
    gain = 0.31
    idx = np.arange(16)
    checker = gain * ((-1.0) ** (idx[:, None] + idx[None, :]))
    quad = dwt2d(checker, filter_bank(name), mode)
    assert np.max(np.abs(np.abs(quad.hh) - 2.0 * gain)) < 1e-12
    for band in (quad.ll, quad.lh, quad.hl):
        assert np.max(np.abs(band)) < 1e-12


def test_idwt2d_round_trip_random_planes():
    fb = filter_bank("db2")
    rng = np.random.default_rng(19)
    worst = 0.0
    for _ in range(100):
        x = rng.standard_normal((64, 64))
        back = idwt2d(dwt2d(x, fb, PER), fb, PER)
        worst = max(worst, float(np.max(np.abs(back - x))))
    assert worst < 1e-9


@pytest.mark.parametrize("name", ["haar", "db2"])
@pytest.mark.parametrize("mode", [PER, SYM])
def test_idwt2d_round_trip_odd_shapes(name, mode):
    fb = filter_bank(name)
    rng = np.random.default_rng(23)
    for shape in ((33, 47), (5, 9), (64, 64), (17, 16)):
        if mode is SYM and min(shape) < len(fb):
            continue
        x = rng.standard_normal(shape)
        back = idwt2d(dwt2d(x, fb, mode), fb, mode)
        assert np.max(np.abs(back - x)) < 1e-9, f"{name}/{mode}/{shape}"


def test_idwt2d_rejects_mismatched_band_shapes():
    quad = SubbandQuad(
        ll=np.zeros((4, 4)),
        lh=np.zeros((4, 4)),
        hl=np.zeros((4, 5)),
        hh=np.zeros((4, 4)),
        source_shape=(8, 8),
    )
    with pytest.raises(SignalLengthError):
        idwt2d(quad, filter_bank("haar"), PER)


def test_idwt2d_zero_quad_gives_zero_plane():
    quad = SubbandQuad(
        ll=np.zeros((4, 4)),
        lh=np.zeros((4, 4)),
        hl=np.zeros((4, 4)),
        hh=np.zeros((4, 4)),
        source_shape=(8, 8),
    )
    out = idwt2d(quad, filter_bank("haar"), PER)
    assert np.array_equal(out, np.zeros((8, 8)))


# ------------------------------------------------------------ multi-level

def test_wavedec2_single_level_matches_dwt2d():
    fb = filter_bank("haar")
    rng = np.random.default_rng(29)
    x = rng.standard_normal((16, 16))
    pyramid = wavedec2(x, fb, 1, PER)
    quad = dwt2d(x, fb, PER)
    lh, hl, hh = pyramid.levels[0]
    assert np.array_equal(pyramid.ll_final, quad.ll)
    assert np.array_equal(lh, quad.lh)
    assert np.array_equal(hl, quad.hl)
    assert np.array_equal(hh, quad.hh)


def test_wavedec2_constant_plane_two_levels():
    pyramid = wavedec2(np.full((8, 8), 0.25), filter_bank("haar"), 2, PER)
    assert np.allclose(pyramid.ll_final, 1.0, atol=1e-12)
    for lh, hl, hh in pyramid.levels:
        for band in (lh, hl, hh):
            assert np.max(np.abs(band)) < 1e-12


@pytest.mark.parametrize("mode", [PER, SYM])
def test_wavedec2_three_level_round_trip(mode):
    fb = filter_bank("db2")
    rng = np.random.default_rng(31)
    x = rng.standard_normal((64, 64))
    pyramid = wavedec2(x, fb, 3, mode)
    back = waverec2(pyramid, fb, mode)
    assert np.max(np.abs(back - x)) < 1e-8


def test_wavedec2_too_many_levels_states_the_cap():
    fb = filter_bank("db2")
    cap = max_decomposition_levels((64, 64), fb)
    with pytest.raises(LevelCountError) as err:
        wavedec2(np.zeros((64, 64)), fb, cap + 1, PER)
    assert str(cap) in str(err.value)


def test_max_decomposition_levels_values():
    haar, db2 = filter_bank("haar"), filter_bank("db2")
    assert max_decomposition_levels((64, 64), haar) == 6
    assert max_decomposition_levels((64, 64), db2) == 4
    assert max_decomposition_levels((2, 2), haar) == 1
    assert max_decomposition_levels((1, 64), haar) == 0


# -------------------------------------------------------------- plumbing

def test_boundary_mode_parse_aliases():
    assert BoundaryMode.parse("per") is PER
    assert BoundaryMode.parse("Periodization") is PER
    assert BoundaryMode.parse("sym") is SYM
    assert BoundaryMode.parse("reflect") is SYM
    with pytest.raises(ValueError):
        BoundaryMode.parse("zero")
