"""Cubic supercell lattices and their plane-wave grids.

A lattice of edge ``a`` repeated ``L`` times per axis is sampled with
``n_per_cell`` points per unit-cell edge. Real-space samples are stored in
FFT order: array index 0 is the origin and coordinates are wrapped into the
cell ``(-aL/2, aL/2]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Lattice:
    a: float
    L: int = 1
    n_per_cell: int = 16

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"cell edge must be positive, got a={self.a}")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if int(self.n_per_cell) != self.n_per_cell or self.n_per_cell < 4:
            raise ValueError(f"n_per_cell must be an integer >= 4, got {self.n_per_cell}")
        if self.n_per_cell % 2:
            raise ValueError(f"n_per_cell must be even, got {self.n_per_cell}")

    @property
    def edge(self) -> float:
        """Edge length aL of the simulation cell."""
        return self.a * self.L

    @property
    def n(self) -> int:
        """Grid points per axis of the simulation cell."""
        return self.n_per_cell * self.L

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def npoints(self) -> int:
        return self.n**3

    @property
    def volume(self) -> float:
        return self.edge**3

    @property
    def spacing(self) -> float:
        return self.edge / self.n

    @property
    def dv(self) -> float:
        """Quadrature weight of one grid point."""
        return self.volume / self.npoints

    @property
    def dk(self) -> float:
        """Reciprocal lattice spacing 2*pi/(aL)."""
        return 2.0 * np.pi / self.edge

    @cached_property
    def axis(self) -> np.ndarray:
        """1-d grid coordinates in FFT order, wrapped into (-aL/2, aL/2]."""
        x = self.spacing * np.arange(self.n)
        return _wrap(x, self.edge)

    @cached_property
    def mode_index(self) -> np.ndarray:
        """1-d integer mode indices m in FFT order (Nyquist mode reported as +n/2)."""
        m = np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(int)
        m[self.n // 2] = self.n // 2
        return m

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable (x, y, z) coordinate arrays."""
        x = self.axis
        return x[:, None, None], x[None, :, None], x[None, None, :]

    def kvectors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable (kx, ky, kz) over the full FFT grid."""
        k = self.dk * self.mode_index
        return k[:, None, None], k[None, :, None], k[None, None, :]

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 on the full FFT grid."""
        kx, ky, kz = self.kvectors()
        return kx**2 + ky**2 + kz**2

    @cached_property
    def k2_half(self) -> np.ndarray:
        """|k|^2 on the half grid used by real FFTs."""
        k = self.dk * self.mode_index
        kz = k[: self.n // 2 + 1]
        kz = np.abs(kz)
        return k[:, None, None] ** 2 + k[None, :, None] ** 2 + kz[None, None, :] ** 2

    def kset(self) -> np.ndarray:
        """All mode indices m as an (N, 3) array, symmetric under m -> -m.

        The Nyquist plane is listed once per sign, so the set has (n+1)^3 rows
        and contains every m with |m_i| <= n/2.
        """
        half = self.n // 2
        r = np.arange(-half, half + 1)
        mx, my, mz = np.meshgrid(r, r, r, indexing="ij")
        return np.stack([mx.ravel(), my.ravel(), mz.ravel()], axis=1)

    def supercell(self, L: int) -> "Lattice":
        return Lattice(self.a, L, self.n_per_cell)


def build_grid(a: float, L: int, n_per_cell: int) -> Lattice:
    """Validate parameters and return the supercell lattice."""
    return Lattice(float(a), int(L), int(n_per_cell))


def _wrap(x, edge):
    # maps onto (-edge/2, edge/2]
    return edge / 2 - np.mod(edge / 2 - np.asarray(x, dtype=float), edge)


def wrap_to_cell(x, lat: Lattice) -> np.ndarray:
    """Representative of x (shape (..., 3) or (3,)) in (-aL/2, aL/2]^3."""
    return _wrap(x, lat.edge)
