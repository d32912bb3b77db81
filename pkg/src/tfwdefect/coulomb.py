"""Periodic Coulomb kernel G_R, the periodic Coulomb form D_R and periodic Poisson solves.

G_R(x) = g1 + sum_{k != 0} 4 pi / |k|^2 * e^{ik.x} / |Gamma|, where the mean
value g1 is fixed by requiring min G_R = 0 (minimum taken over grid points).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .field import GridFunction, _check_same, apply_symbol, irfft
from .lattice import Lattice
from .nuclear import GaussianSum, coulomb_form_free  # noqa: F401  (re-exported)


@dataclass(frozen=True, eq=False)
class PeriodicKernel:
    lat: Lattice
    g1: float
    values: np.ndarray

    @property
    def integral(self) -> float:
        """int_Gamma G_R = g1 |Gamma|."""
        return self.g1 * self.lat.volume

    def as_field(self) -> GridFunction:
        return GridFunction(self.lat, self.values)

    @property
    def symbol(self) -> np.ndarray:
        """Half-grid multiplier turning a density into its potential G_R * f."""
        return coulomb_symbol(self.lat, self.integral)


def _zero_mean_symbol(lat: Lattice) -> np.ndarray:
    k2 = lat.k2_half
    sym = np.zeros_like(k2)
    nz = k2 > 0
    sym[nz] = 4.0 * np.pi / k2[nz]
    return sym


def coulomb_symbol(lat: Lattice, k0_weight: float) -> np.ndarray:
    sym = _zero_mean_symbol(lat)
    sym[0, 0, 0] = k0_weight
    return sym


@lru_cache(maxsize=32)
def build_kernel(lat: Lattice) -> PeriodicKernel:
    sym = _zero_mean_symbol(lat)
    # zero-mean part: sum_{k != 0} 4pi/|k|^2 e^{ikx} / |Gamma|
    phi = irfft(sym, lat.shape) * lat.npoints / lat.volume
    g1 = -float(phi.min())
    values = phi + g1
    values.setflags(write=False)
    return PeriodicKernel(lat, g1, values)


def potential(f: GridFunction) -> GridFunction:
    """G_R * f, including the mean term (int G_R) * mean-charge."""
    kern = build_kernel(f.lat)
    return GridFunction(f.lat, apply_symbol(f.values, kern.symbol))


def coulomb_form_DR(f: GridFunction, g: GridFunction) -> float:
    """D_R(f, g) = int int G_R(x - y) f(x) g(y) dx dy."""
    _check_same(f, g)
    return potential(f).inner(g)


def poisson_periodic(rho: GridFunction) -> GridFunction:
    """Zero-mean W with -Laplacian W = 4 pi (rho - mean(rho))."""
    return GridFunction(rho.lat, apply_symbol(rho.values, _zero_mean_symbol(rho.lat)))
