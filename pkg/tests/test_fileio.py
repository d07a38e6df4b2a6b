import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlrspeckle.errors import ImageFormatError
from nlrspeckle.fileio import format_nlr1, format_pgm, parse_nlr1, parse_pgm, read_image, write_image

byte_images = arrays(np.uint8, st.tuples(st.integers(1, 8), st.integers(1, 8)))
float_images = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                      elements=st.floats(allow_nan=False, allow_infinity=False))


@given(byte_images)
def test_pgm_roundtrip(a):
    for ascii in (False, True):
        back = parse_pgm(format_pgm(a.astype(float), ascii=ascii))
        assert np.array_equal(back, a.astype(float))


@given(float_images)
def test_nlr1_roundtrip_bitexact(a):
    data = format_nlr1(a)
    assert parse_nlr1(data).tobytes() == a.astype("<f8").tobytes()
    h, w = a.shape
    assert data.startswith(f"NLR1 {w} {h}\n".encode())
    assert len(data) == len(f"NLR1 {w} {h}\n") + 8 * a.size


def test_pgm_header_comments_and_maxval():
    data = b"P2\n# a comment\n2 1\n# another\n15\n0 15\n"
    assert np.array_equal(parse_pgm(data), [[0.0, 255.0]])
    data16 = b"P5\n1 1\n65535\n" + bytes([255, 255])
    assert parse_pgm(data16)[0, 0] == 255.0


def test_pgm_preview_rounds_and_clamps():
    img = np.array([[-3.0, 0.5, 1.5, 254.6, 300.0]])
    assert list(parse_pgm(format_pgm(img))[0]) == [0, 0, 2, 255, 255]


@pytest.mark.parametrize("bad", [b"P6\n1 1\n255\n\x00", b"P5\n2 2\n255\n\x00", b"P2\n2 2\n255\n1 2 3",
                                 b"P5\nx 2\n255\n"])
def test_pgm_errors(bad):
    with pytest.raises(ImageFormatError):
        parse_pgm(bad)


@pytest.mark.parametrize("bad", [b"NLR1 2 2\n" + b"\x00" * 31, b"NLR2 1 1\n" + b"\x00" * 8, b"NLR1 1 1"])
def test_nlr1_errors(bad):
    with pytest.raises(ImageFormatError):
        parse_nlr1(bad)


def test_read_write_dispatch(tmp_path):
    a = np.arange(12, dtype=float).reshape(3, 4) + 0.25
    write_image(tmp_path / "a.nlr1", a)
    write_image(tmp_path / "a.pgm", a)
    assert np.array_equal(read_image(tmp_path / "a.nlr1"), a)
    assert np.array_equal(read_image(tmp_path / "a.pgm"), np.rint(a))
    with pytest.raises(ValueError):
        write_image(tmp_path / "x", a, "png")
