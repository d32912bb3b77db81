"""Closed-form nuclear charge models built from normalized Gaussians."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .field import GridFunction, irfft, restrict_to_cell
from .lattice import Lattice, wrap_to_cell


@dataclass(frozen=True)
class Gaussian:
    """Charge ``q`` spread as an isotropic Gaussian of width ``sigma`` around ``center``."""

    q: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"Gaussian width must be positive, got {self.sigma}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def __call__(self, x, y, z):
        cx, cy, cz = self.center
        r2 = (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2
        return self.q * (2 * np.pi * self.sigma**2) ** -1.5 * np.exp(-r2 / (2 * self.sigma**2))


@dataclass(frozen=True)
class GaussianSum:
    terms: tuple[Gaussian, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def __call__(self, x, y, z):
        out = 0.0
        for g in self.terms:
            out = out + g(x, y, z)
        return out

    def __bool__(self):
        return any(g.q != 0 for g in self.terms)

    @property
    def total_charge(self) -> float:
        return float(sum(g.q for g in self.terms))

    def scaled(self, factor: float) -> "GaussianSum":
        return GaussianSum(tuple(Gaussian(g.q * factor, g.center, g.sigma) for g in self.terms))


def coulomb_form_free(nu: GaussianSum) -> float:
    """Whole-space Coulomb energy D(nu, nu) = int int nu(x) nu(y) / |x - y|."""
    total = 0.0
    for gi in nu.terms:
        for gj in nu.terms:
            s = np.sqrt(2.0 * (gi.sigma**2 + gj.sigma**2))
            d = float(np.linalg.norm(np.subtract(gi.center, gj.center)))
            if d < 1e-12 * s:
                pair = 2.0 / (np.sqrt(np.pi) * s)
            else:
                pair = erf(d / s) / d
            total += gi.q * gj.q * pair
    return float(total)


def periodize(nu: GaussianSum, lat: Lattice) -> GridFunction:
    """Sample the R_L-periodic sum of all images of ``nu`` (exact Fourier series, truncated to the grid)."""
    kx, ky, kz = lat.kvectors()
    nh = lat.n // 2 + 1
    kz = kz[..., :nh]
    k2 = lat.k2_half
    coeff = np.zeros(k2.shape, dtype=complex)
    for g in nu.terms:
        cx, cy, cz = g.center
        coeff += g.q * np.exp(-0.5 * g.sigma**2 * k2) * np.exp(-1j * (kx * cx + ky * cy + kz * cz))
    # values(x) = |Gamma|^{-1} sum_k coeff_k e^{ikx}
    values = irfft(coeff, lat.shape) * lat.npoints / lat.volume
    return GridFunction(lat, values)


@dataclass(frozen=True)
class NuclearModel:
    """Periodic nuclei (one copy per unit cell, replicated over R_1) plus a localized defect."""

    periodic: GaussianSum = field(default_factory=GaussianSum)
    defect: GaussianSum = field(default_factory=GaussianSum)

    @property
    def Z(self) -> float:
        return self.periodic.total_charge

    def periodic_density(self, lat: Lattice) -> GridFunction:
        return periodize(self.periodic, lat)

    def defect_density(self, lat: Lattice) -> GridFunction:
        return restrict_to_cell(self.defect, lat)


def centered(nu: GaussianSum, lat: Lattice) -> GaussianSum:
    """Move each Gaussian's center to its representative in the simulation cell."""
    return GaussianSum(
        tuple(Gaussian(g.q, tuple(wrap_to_cell(np.array(g.center), lat)), g.sigma) for g in nu.terms)
    )
