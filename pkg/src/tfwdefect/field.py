"""Periodic scalar fields sampled on a lattice grid.

Fourier coefficients follow the orthonormal plane-wave convention

    c_k(v) = |Gamma|^{-1/2} * integral_Gamma v(x) exp(-i k.x) dx,

approximated by the equal-weight grid quadrature, so that
c_k = |Gamma|^{1/2} / N * fft(v)_k.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .lattice import Lattice

# scipy.fft worker count; set once by the CLI
FFT_WORKERS = 1


def rfft(values: np.ndarray) -> np.ndarray:
    return sfft.rfftn(values, workers=FFT_WORKERS)


def irfft(coeffs: np.ndarray, shape) -> np.ndarray:
    return sfft.irfftn(coeffs, s=shape, workers=FFT_WORKERS)


def apply_symbol(values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    """Multiply the Fourier transform of real values by a half-grid symbol."""
    return irfft(symbol * rfft(values), values.shape)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A real R_L-periodic field stored as samples on ``lat``'s grid."""

    lat: Lattice
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.lat.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.lat.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, lat: Lattice) -> "GridFunction":
        return cls(lat, np.zeros(lat.shape))

    @classmethod
    def constant(cls, lat: Lattice, c: float) -> "GridFunction":
        return cls(lat, np.full(lat.shape, float(c)))

    def integral(self) -> float:
        return float(self.values.sum() * self.lat.dv)

    def mean(self) -> float:
        return float(self.values.mean())

    def inner(self, other: "GridFunction") -> float:
        _check_same(self, other)
        return float(np.vdot(self.values, other.values) * self.lat.dv)

    def l2norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __add__(self, other):
        if isinstance(other, GridFunction):
            _check_same(self, other)
            return GridFunction(self.lat, self.values + other.values)
        return GridFunction(self.lat, self.values + other)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            _check_same(self, other)
            return GridFunction(self.lat, self.values - other.values)
        return GridFunction(self.lat, self.values - other)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            _check_same(self, other)
            return GridFunction(self.lat, self.values * other.values)
        return GridFunction(self.lat, self.values * other)

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self):
        return GridFunction(self.lat, -self.values)


class LatticeMismatch(ValueError):
    pass


def _check_same(f: GridFunction, g: GridFunction):
    if f.lat != g.lat:
        raise LatticeMismatch(f"fields live on different lattices: {f.lat} vs {g.lat}")


def to_fourier(v: GridFunction) -> np.ndarray:
    """Full table of coefficients c_k, indexed like ``lat.mode_index`` on each axis."""
    lat = v.lat
    return np.sqrt(lat.volume) / lat.npoints * sfft.fftn(v.values, workers=FFT_WORKERS)


def from_fourier(c: np.ndarray, lat: Lattice) -> GridFunction:
    """Inverse of :func:`to_fourier`; the imaginary round-off part is dropped."""
    values = sfft.ifftn(c, workers=FFT_WORKERS).real * lat.npoints / np.sqrt(lat.volume)
    return GridFunction(lat, values)


def sobolev_norm(v: GridFunction, s: float) -> float:
    """(sum_k (1+|k|^2)^s |c_k|^2)^{1/2}."""
    c = to_fourier(v)
    w = (1.0 + v.lat.k2) ** s
    return float(np.sqrt(np.sum(w * np.abs(c) ** 2)))


def periodic_convolve(f: GridFunction, g: GridFunction) -> GridFunction:
    """(f * g)(x) = integral_Gamma f(x-y) g(y) dy, i.e. c_k(f*g) = |Gamma|^{1/2} c_k(f) c_k(g)."""
    _check_same(f, g)
    lat = f.lat
    out = irfft(lat.dv * rfft(f.values) * rfft(g.values), lat.shape)
    return GridFunction(lat, out)


def laplacian(v: GridFunction) -> GridFunction:
    return GridFunction(v.lat, apply_symbol(v.values, -v.lat.k2_half))


def restrict_to_cell(density, lat: Lattice) -> GridFunction:
    """Sample a localized closed-form density on Gamma_L, without periodic images.

    ``density`` is any callable ``density(x, y, z) -> array`` (for instance a
    :class:`~tfwdefect.nuclear.GaussianSum`); ``None`` means zero.
    """
    if density is None:
        return GridFunction.zeros(lat)
    x, y, z = lat.coords()
    return GridFunction(lat, np.broadcast_to(density(x, y, z), lat.shape).copy())


def replicate(v: GridFunction, L: int) -> GridFunction:
    """Tile a field given on (a, 1, n) onto the supercell (a, L, n)."""
    if v.lat.L != 1:
        raise ValueError("replicate expects a unit-cell field")
    lat = v.lat.supercell(L)
    return GridFunction(lat, np.tile(v.values, (L, L, L)))


# ---------------------------------------------------------------------------
# Field dumps
#
# CSV: header "x,y,z,value", one row per grid point in C order of the array.
# Raw volumetric: 16-byte header of four little-endian uint32
# (nx, ny, nz, flag) followed by nx*ny*nz little-endian float64 in C order.
# flag bit 0 set means coordinates are in FFT order (origin at index 0).

RAW_FLAG_FFT_ORDER = 1


def dump_csv(v: GridFunction, path) -> None:
    x, y, z = (np.broadcast_to(c, v.lat.shape).ravel() for c in v.lat.coords())
    with open(path, "w") as fh:
        fh.write("x,y,z,value\n")
        for row in zip(x, y, z, v.values.ravel()):
            fh.write(",".join(f"{c:.17g}" for c in row) + "\n")


def dump_raw(v: GridFunction, path) -> None:
    nx, ny, nz = v.values.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4I", nx, ny, nz, RAW_FLAG_FFT_ORDER))
        fh.write(np.ascontiguousarray(v.values, dtype="<f8").tobytes())


def load_raw(path) -> tuple[np.ndarray, int]:
    data = Path(path).read_bytes()
    nx, ny, nz, flag = struct.unpack("<4I", data[:16])
    arr = np.frombuffer(data[16:], dtype="<f8").reshape(nx, ny, nz).copy()
    return arr, flag
