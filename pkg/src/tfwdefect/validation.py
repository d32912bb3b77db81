"""Built-in invariant checks, shared by ``tfw validate`` and the test suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coulomb import build_kernel, coulomb_form_DR
from .field import GridFunction, to_fourier
from .functional import (
    PerfectCrystalState,
    TfwParams,
    calibrate_convexity_constant,
    convexity_gap,
    defect_energy_and_grad,
    tfw_energy_and_grad,
)
from .jellium import JelliumParams, linear_screening_check
from .lattice import Lattice


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    threshold: float

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<28} {status}  value={self.value:.3e}  threshold={self.threshold:.1e}"


def smooth_random_field(lat: Lattice, rng: np.random.Generator, modes: int = 6, offset: float = 0.0) -> np.ndarray:
    """Offset plus a few random low Fourier modes with random amplitudes and phases."""
    x, y, z = lat.coords()
    dk = lat.dk
    out = np.full(lat.shape, offset)
    for _ in range(modes):
        m = rng.integers(-3, 4, size=3)
        out = out + rng.standard_normal() * np.cos(dk * (m[0] * x + m[1] * y + m[2] * z) + rng.uniform(0, 2 * np.pi))
    return out


def fd_relative_error(objective: Callable[[np.ndarray, bool], tuple], v: np.ndarray, h: np.ndarray, dv: float, t: float = 1e-5) -> float:
    """|central difference - <grad, h>| / |<grad, h>| for an (energy, gradient) objective."""
    _, g = objective(v, True)
    exact = float(np.vdot(g, h)) * dv
    fd = (objective(v + t * h, False)[0] - objective(v - t * h, False)[0]) / (2.0 * t)
    return abs(fd - exact) / abs(exact)


def roundoff_floor(objective, v: np.ndarray, h: np.ndarray, dv: float, t: float = 1e-5) -> float:
    """Relative error the central difference incurs from rounding E alone: eps |E| / (t |<grad, h>|)."""
    e, g = objective(v, True)
    return float(np.finfo(float).eps * abs(e) / (t * abs(np.vdot(g, h) * dv)))


def _fd_errors(objective, draw, dv, count, t, max_floor=1e-7):
    # directions nearly orthogonal to the gradient are redrawn: there the
    # relative error measures cancellation in E, not the gradient
    errs = []
    while len(errs) < count:
        v, h = draw()
        if roundoff_floor(objective, v, h, dv, t) > max_floor:
            continue
        errs.append(fd_relative_error(objective, v, h, dv, t))
    return np.array(errs)


def gradient_errors_tfw(rho_nuc: GridFunction, p: TfwParams, rng, count: int = 10, t: float = 1e-5) -> np.ndarray:
    lat = rho_nuc.lat
    scale = np.sqrt(max(rho_nuc.integral(), 1.0) / lat.volume)
    obj = lambda w, grad: tfw_energy_and_grad(rho_nuc.values, w, lat, p, grad)  # noqa: E731

    def draw():
        return scale * smooth_random_field(lat, rng, offset=2.0), scale * smooth_random_field(lat, rng)

    return _fd_errors(obj, draw, lat.dv, count, t)


def gradient_errors_defect(state: PerfectCrystalState, nu: GridFunction, p: TfwParams, rng, count: int = 10, t: float = 1e-5) -> np.ndarray:
    lat = state.lat
    scale = 0.3 * state.m_bound
    obj = lambda w, grad: defect_energy_and_grad(state, nu.values, w, p, grad)  # noqa: E731

    def draw():
        return scale * smooth_random_field(lat, rng), scale * smooth_random_field(lat, rng)

    return _fd_errors(obj, draw, lat.dv, count, t)


def sample_convexity(m: float, M: float, gamma: float, n: int, rng, b_max: float = 10.0):
    """Random (a, b) with m <= a <= M and -a <= b <= b_max."""
    a = rng.uniform(m, M, n)
    b = rng.uniform(-1.0, 1.0, n)
    b = np.where(b < 0, b * a, b * b_max)
    return a, b


def convexity_violations(m: float, M: float, gamma: float, n: int, rng) -> tuple[int, int, float]:
    """(lower > middle count, middle > upper count on a fresh sample, calibrated C)."""
    C = calibrate_convexity_constant(m, M, gamma)
    a, b = sample_convexity(m, M, gamma, n, rng)
    lower, middle, _ = convexity_gap(a, b, gamma, C)
    # absolute round-off allowance for the cancellation in the middle member
    slack = 1e-12 * ((a + np.abs(b)) ** gamma + 1.0)
    low_bad = int(np.sum(lower > middle + slack))
    a, b = sample_convexity(m, M, gamma, n, rng)
    _, middle, upper = convexity_gap(a, b, gamma, C)
    slack = 1e-12 * ((a + np.abs(b)) ** gamma + 1.0)
    up_bad = int(np.sum(middle > upper + slack))
    return low_bad, up_bad, C


def parseval_error(lat: Lattice, rng) -> float:
    v = GridFunction(lat, rng.standard_normal(lat.shape))
    c = to_fourier(v)
    return abs(float(np.sum(np.abs(c) ** 2)) - v.inner(v)) / v.inner(v)


def run_invariant_suite(state: PerfectCrystalState, nu: GridFunction, p: TfwParams, seed: int, samples: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    lat1 = Lattice(state.lat.a, 1, state.lat.n_per_cell)
    checks = []

    e = gradient_errors_tfw(state.rho_nuc, p, rng)
    checks.append(Check("gradient_tfw", bool(e.max() <= 1e-6), float(e.max()), 1e-6))
    e = gradient_errors_defect(state, nu, p, rng)
    checks.append(Check("gradient_defect", bool(e.max() <= 1e-6), float(e.max()), 1e-6))

    for gamma in (2.0, 10.0 / 3.0):
        low, up, _ = convexity_violations(0.2, 5.0, gamma, samples, rng)
        checks.append(Check(f"convexity_lower_g{gamma:.3g}", low == 0, float(low), 0.0))
        checks.append(Check(f"convexity_upper_g{gamma:.3g}", up == 0, float(up), 0.0))

    err = parseval_error(lat1, rng)
    checks.append(Check("parseval", err <= 1e-12, err, 1e-12))

    kern = build_kernel(lat1)
    kmin = float(kern.values.min())
    checks.append(Check("kernel_min_zero", abs(kmin) <= 1e-12, abs(kmin), 1e-12))
    # G_{R_2}(x) = G_{R_1}(x/2)/2 on matching grids is an exact identity of the discrete series
    g2 = build_kernel(Lattice(lat1.a, 2, lat1.n_per_cell)).g1
    g1_fine = build_kernel(Lattice(lat1.a, 1, 2 * lat1.n_per_cell)).g1
    err = abs(2.0 * g2 - g1_fine) / g1_fine
    checks.append(Check("kernel_scaling", err <= 1e-12, err, 1e-12))

    f = GridFunction(lat1, rng.standard_normal(lat1.shape))
    g = GridFunction(lat1, rng.standard_normal(lat1.shape))
    dfg, dgf = coulomb_form_DR(f, g), coulomb_form_DR(g, f)
    err = abs(dfg - dgf) / max(abs(dfg), 1e-300)
    checks.append(Check("coulomb_symmetry", err <= 1e-12, err, 1e-12))

    err = linear_screening_check(JelliumParams(1.0, p), quadrature=False)
    checks.append(Check("jellium_screening_identity", err <= 1e-12, err, 1e-12))
    return checks
