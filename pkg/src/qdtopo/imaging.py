"""Grayscale export of density fields as binary PGM (P5)."""

import numpy as np


def density_to_pixels(rho):
    """Pixel values round(255 * (1 - rho)): solid is black, void is white."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.size and (rho.min() < 0 or rho.max() > 1):
        raise ValueError("densities must lie in [0, 1]")
    return np.rint(255.0 * (1.0 - rho)).astype(np.uint8)


def write_pgm(rho, nx, ny, path):
    """Write a flat density field (element id = ei*ny + ej) as an nx-by-ny
    binary PGM, one pixel per element, row 0 at the top."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (nx * ny,):
        raise ValueError(f"expected {nx * ny} densities, got shape {rho.shape}")
    frame = density_to_pixels(rho).reshape(nx, ny).T
    header = f"P5\n{nx} {ny}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(frame).tobytes())
    except OSError as exc:
        raise OSError(f"failed writing PGM to {path}: {exc}") from exc


def read_pgm(path):
    """Read a binary PGM written by write_pgm; returns (nx, ny, pixels) with
    pixels shaped (ny, nx), row 0 at the top."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path} is not a binary PGM")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace byte after maxval
    nx, ny, maxval = fields
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    pixels = np.frombuffer(data[pos:pos + nx * ny], dtype=np.uint8).reshape(ny, nx)
    return nx, ny, pixels
