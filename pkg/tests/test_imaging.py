"""PGM export format tests, parsed independently of the writer."""

import numpy as np
import pytest

from qdtopo.imaging import density_to_pixels, read_pgm, write_pgm


def _parse_pgm(raw):
    """Independent minimal P5 parser for the deterministic writer output."""
    assert raw[:3] == b"P5\n"
    lines = raw.split(b"\n", 3)
    dims = lines[1].split()
    nx, ny = int(dims[0]), int(dims[1])
    maxval = int(lines[2])
    payload = raw[len(lines[0]) + len(lines[1]) + len(lines[2]) + 3:]
    return nx, ny, maxval, np.frombuffer(payload, dtype=np.uint8)


class TestPixelMapping:
    def test_solid_is_black(self):
        assert np.all(density_to_pixels(np.ones(10)) == 0)

    def test_void_is_white(self):
        assert np.all(density_to_pixels(np.zeros(10)) == 255)

    def test_rounding_rule(self):
        rho = np.array([0.25, 0.5, 0.75])
        expected = np.rint(255 * (1 - rho)).astype(np.uint8)
        assert np.array_equal(density_to_pixels(rho), expected)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            density_to_pixels(np.array([1.2]))


class TestWritePgm:
    def test_two_element_exact_payload(self, tmp_path):
        path = tmp_path / "two.pgm"
        write_pgm(np.array([0.0, 1.0]), 2, 1, path)
        raw = path.read_bytes()
        assert raw == b"P5\n2 1\n255\n" + bytes([255, 0])

    def test_roundtrip_recovers_rounded_pixels(self, tmp_path):
        rng = np.random.default_rng(0)
        nx, ny = 7, 5
        rho = rng.uniform(0, 1, nx * ny)
        path = tmp_path / "field.pgm"
        write_pgm(rho, nx, ny, path)
        pnx, pny, maxval, payload = _parse_pgm(path.read_bytes())
        assert (pnx, pny, maxval) == (nx, ny, 255)
        expected = np.rint(255 * (1 - rho.reshape(nx, ny).T)).astype(np.uint8)
        assert np.array_equal(payload, expected.ravel())

    def test_row_zero_at_top(self, tmp_path):
        # element (0, 0) is the top-left pixel; (0, ny-1) is bottom-left
        nx, ny = 3, 2
        rho = np.zeros(nx * ny)
        rho[0] = 1.0  # element (0, 0)
        path = tmp_path / "orient.pgm"
        write_pgm(rho, nx, ny, path)
        _, _, pixels = read_pgm(path)
        assert pixels[0, 0] == 0  # solid -> black at the top-left
        assert pixels[1, 0] == 255

    def test_reader_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        rho = rng.uniform(0, 1, 12)
        path = tmp_path / "rt.pgm"
        write_pgm(rho, 4, 3, path)
        nx, ny, pixels = read_pgm(path)
        assert (nx, ny) == (4, 3)
        assert np.array_equal(pixels, density_to_pixels(rho).reshape(4, 3).T)

    def test_io_error_carries_path(self, tmp_path):
        missing = tmp_path / "nodir" / "x.pgm"
        with pytest.raises(OSError, match="x.pgm"):
            write_pgm(np.zeros(4), 2, 2, missing)

    def test_shape_mismatch_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_pgm(np.zeros(5), 2, 2, tmp_path / "bad.pgm")
