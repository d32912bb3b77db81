"""TFW energy functionals, their L2 gradients and the convexity bounds for t -> t^gamma.

All functions take :class:`GridFunction` arguments; the ``*_arrays`` helpers
evaluate energy and gradient together on raw arrays and are what the
minimizers call in their inner loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coulomb import build_kernel
from .field import GridFunction, _check_same, apply_symbol, irfft, replicate, rfft
from .lattice import Lattice

C_TF_PRINTED = (10.0 / 3.0) * (3.0 * np.pi**2) ** (2.0 / 3.0)


@dataclass(frozen=True)
class TfwParams:
    c_w: float = 1.0
    c_tf: float = C_TF_PRINTED

    def __post_init__(self):
        if not (self.c_w > 0 and self.c_tf > 0):
            raise ValueError(f"c_w and c_tf must be positive, got {self.c_w}, {self.c_tf}")


@dataclass(frozen=True, eq=False)
class PerfectCrystalState:
    """Reference crystal on a supercell: u0, rho0 = u0^2, V0 (zero mean), Fermi level and bounds."""

    u0: GridFunction
    rho0: GridFunction
    v0: GridFunction
    eps_f: float
    m_bound: float
    M_bound: float
    rho_nuc: GridFunction
    Z: float

    @property
    def lat(self) -> Lattice:
        return self.u0.lat

    def on_supercell(self, L: int) -> "PerfectCrystalState":
        """Replicate the unit-cell state onto Gamma_L."""
        if self.lat.L == L:
            return self
        if self.lat.L != 1:
            raise ValueError("only unit-cell states can be replicated")
        return PerfectCrystalState(
            replicate(self.u0, L),
            replicate(self.rho0, L),
            replicate(self.v0, L),
            self.eps_f,
            self.m_bound,
            self.M_bound,
            replicate(self.rho_nuc, L),
            self.Z,
        )


def _abs_pow(x, p):
    return np.abs(x) ** p


# ---------------------------------------------------------------------------
# periodic TFW functional E_R(rho_nuc, v)


def tfw_energy_and_grad(rho_nuc: np.ndarray, v: np.ndarray, lat: Lattice, p: TfwParams, grad: bool = True):
    dv = lat.dv
    vhat = rfft(v)
    minus_lap_v = irfft(lat.k2_half * vhat, lat.shape)
    charge = rho_nuc - v * v
    pot = apply_symbol(charge, build_kernel(lat).symbol)
    e = (
        p.c_w * np.vdot(v, minus_lap_v) * dv
        + p.c_tf * np.sum(_abs_pow(v, 10.0 / 3.0)) * dv
        + 0.5 * np.vdot(charge, pot) * dv
    )
    if not grad:
        return float(e), None
    g = 2.0 * p.c_w * minus_lap_v + (10.0 / 3.0) * p.c_tf * _abs_pow(v, 4.0 / 3.0) * v - 2.0 * pot * v
    return float(e), g


def tfw_energy(rho_nuc: GridFunction, v: GridFunction, p: TfwParams) -> float:
    """C_W int|grad v|^2 + C_TF int|v|^{10/3} + 1/2 D_R(rho_nuc - v^2, rho_nuc - v^2)."""
    _check_same(rho_nuc, v)
    return tfw_energy_and_grad(rho_nuc.values, v.values, v.lat, p, grad=False)[0]


def tfw_gradient(rho_nuc: GridFunction, v: GridFunction, p: TfwParams) -> GridFunction:
    """L2 gradient of :func:`tfw_energy` with respect to v (no constraint term)."""
    _check_same(rho_nuc, v)
    return GridFunction(v.lat, tfw_energy_and_grad(rho_nuc.values, v.values, v.lat, p)[1])


# ---------------------------------------------------------------------------
# defect functional E^nu_L(v)


def host_quadratic_form(state: PerfectCrystalState, v: GridFunction, p: TfwParams) -> float:
    """<(H0_per - eps_F) v, v> via the quadratic-form expression."""
    lat = v.lat
    minus_lap_v = irfft(lat.k2_half * rfft(v.values), lat.shape)
    w = (5.0 / 3.0) * p.c_tf * _abs_pow(state.rho0.values, 2.0 / 3.0) + state.v0.values - state.eps_f
    return float((p.c_w * np.vdot(v.values, minus_lap_v) + np.sum(w * v.values**2)) * lat.dv)


def defect_energy_and_grad(state: PerfectCrystalState, nu: np.ndarray, v: np.ndarray, p: TfwParams, grad: bool = True):
    lat = state.lat
    dv = lat.dv
    u0 = state.u0.values
    minus_lap_v = irfft(lat.k2_half * rfft(v), lat.shape)
    host_w = (5.0 / 3.0) * p.c_tf * _abs_pow(state.rho0.values, 2.0 / 3.0) + state.v0.values - state.eps_f
    u = u0 + v
    u0_43 = _abs_pow(u0, 4.0 / 3.0)
    dens = 2.0 * u0 * v + v * v
    charge = dens - nu
    pot = apply_symbol(charge, build_kernel(lat).symbol)
    tf_local = _abs_pow(u, 10.0 / 3.0) - _abs_pow(u0, 10.0 / 3.0) - (5.0 / 3.0) * u0_43 * dens
    e = (
        p.c_w * np.vdot(v, minus_lap_v)
        + np.sum(host_w * v * v)
        + p.c_tf * np.sum(tf_local)
        + 0.5 * np.vdot(charge, pot)
    ) * dv
    if not grad:
        return float(e), None
    g = 2.0 * (
        p.c_w * minus_lap_v
        + host_w * v
        + (5.0 / 3.0) * p.c_tf * (_abs_pow(u, 4.0 / 3.0) * u - u0_43 * u0 - u0_43 * v)
        + pot * u
    )
    return float(e), g


def defect_energy(state: PerfectCrystalState, nu_L: GridFunction, v: GridFunction, p: TfwParams) -> float:
    _check_same(state.u0, nu_L)
    _check_same(state.u0, v)
    return defect_energy_and_grad(state, nu_L.values, v.values, p, grad=False)[0]


def defect_gradient(state: PerfectCrystalState, nu_L: GridFunction, v: GridFunction, p: TfwParams) -> GridFunction:
    _check_same(state.u0, nu_L)
    _check_same(state.u0, v)
    return GridFunction(v.lat, defect_energy_and_grad(state, nu_L.values, v.values, p)[1])


# ---------------------------------------------------------------------------
# convexity inequality for t -> t^gamma


def convexity_gap(a, b, gamma: float, C: float = 0.0):
    """Members (lower, middle, upper) of

        (g-1) a^{g-2} b^2 <= (a+b)^g - a^g - g a^{g-1} b <= C (1 + |b|^{g-2}) b^2

    evaluated elementwise; requires b >= -a and gamma >= 2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if gamma < 2:
        raise ValueError(f"gamma must be >= 2, got {gamma}")
    if np.any(a <= 0):
        raise ValueError("a must be positive")
    if np.any(b < -a):
        raise ValueError("b must satisfy b >= -a")
    lower = (gamma - 1.0) * a ** (gamma - 2.0) * b**2
    middle = (a + b) ** gamma - a**gamma - gamma * a ** (gamma - 1.0) * b
    upper = C * (1.0 + np.abs(b) ** (gamma - 2.0)) * b**2
    return lower, middle, upper


def calibrate_convexity_constant(m: float, M: float, gamma: float, b_max: float = 1e3, n: int = 400) -> float:
    """Coarse maximization of middle / ((1+|b|^{g-2}) b^2) over m <= a <= M, -a <= b <= b_max.

    The ratio is finite as b -> 0 and as b -> infinity, so a log-spaced sweep
    of |b| on both sides of zero with a 5% safety margin bounds it.
    """
    if not 0 < m <= M:
        raise ValueError("need 0 < m <= M")
    a = np.linspace(m, M, n)[:, None]
    bpos = np.geomspace(1e-6, b_max, n)[None, :]
    frac = np.linspace(1e-6, 1.0, n)[None, :]
    best = 0.0
    for b in (np.broadcast_to(bpos, (n, n)), -frac * a):
        _, mid, _ = convexity_gap(np.broadcast_to(a, b.shape), b, gamma)
        ratio = mid / ((1.0 + np.abs(b) ** (gamma - 2.0)) * b**2)
        best = max(best, float(np.nanmax(ratio)))
    return 1.05 * best
