"""Linear and nonlinear response of a homogeneous host (jellium).

Fourier transforms use the unitary convention, f_hat(k) = (2pi)^{-3/2} int f e^{-ik.x},
so convolution reads (f * g)^ = (2pi)^{3/2} f_hat g_hat and the response
kernels carry a (2pi)^{-3/2} prefactor.

On a periodic box the fixed point

    v = g * (nu - v^2) + h * kappa(v)

is solved with the kernels sampled at the box modes. The Coulomb symbol at
k = 0 is selectable: ``"free"`` sends it to infinity (box stand-in for the
whole-space problem; the box solution is then exactly neutral), ``"periodic"``
uses int G_R as the periodic Coulomb form does, which makes the fixed point
the Euler equation of the unconstrained supercell problem.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .coulomb import build_kernel
from .field import GridFunction, apply_symbol, irfft, restrict_to_cell, rfft
from .functional import TfwParams
from .lattice import Lattice
from .minimize import SolverConfig

log = logging.getLogger(__name__)

TWO_PI_32 = (2.0 * np.pi) ** 1.5


@dataclass(frozen=True)
class JelliumParams:
    alpha: float
    p: TfwParams = TfwParams()

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def b(self) -> float:
        """Coefficient (20/9) C_TF alpha^{4/3} of the local TF response."""
        return (20.0 / 9.0) * self.p.c_tf * self.alpha ** (4.0 / 3.0)

    def denominator(self, k):
        k2 = np.asarray(k, dtype=float) ** 2
        return self.p.c_w * k2**2 + self.b * k2 + 8.0 * np.pi * self.alpha**2


def kernel_g_hat(k, jp: JelliumParams):
    return 4.0 * np.pi * jp.alpha / jp.denominator(k) / TWO_PI_32


def kernel_h_hat(k, jp: JelliumParams):
    return np.asarray(k, dtype=float) ** 2 / jp.denominator(k) / TWO_PI_32


# ---------------------------------------------------------------------------
# real-space radial profiles


@dataclass
class RadialProfile:
    radii: np.ndarray
    values: np.ndarray
    abserr: np.ndarray
    total: float  # int_{R^3} f = (2pi)^{3/2} f_hat(0)
    converged: bool


def _radial_value(fhat, r: float, split: float, tail: float = 0.0, kappa: float = 1.0, limit: int = 2000):
    """f(r) = sqrt(2/pi) / r * int_0^inf t fhat(t) sin(r t) dt, as QAWO on [0, split] plus a QAWF tail.

    When t fhat(t) ~ tail / t at infinity, tail * t / (t^2 + kappa^2) is subtracted
    from the integrand and its transform (pi/2) tail e^{-kappa r} added back.
    """
    integrand = lambda t: t * fhat(t) - tail * t / (t * t + kappa * kappa)  # noqa: E731
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        head = integrate.quad(integrand, 0.0, split, weight="sin", wvar=r, limit=limit,
                              epsabs=1e-15, epsrel=1e-13, full_output=1)
        tail_part = integrate.quad(integrand, split, np.inf, weight="sin", wvar=r, limlst=200,
                                   epsabs=1e-15, epsrel=1e-13, full_output=1)
    ok = len(head) == 3 and len(tail_part) == 3  # a fourth element is the failure message
    scale = np.sqrt(2.0 / np.pi) / r
    value = head[0] + tail_part[0] + 0.5 * np.pi * tail * np.exp(-kappa * r)
    return scale * value, scale * (head[1] + tail_part[1]), ok


_KERNELS = {
    "g": lambda jp: (lambda t: kernel_g_hat(t, jp)),
    "h": lambda jp: (lambda t: kernel_h_hat(t, jp)),
}


def _tail_coefficient(which: str, jp: JelliumParams) -> float:
    # t h_hat(t) ~ 1 / ((2pi)^{3/2} C_W t); t g_hat(t) decays like t^{-3} already
    return 1.0 / (TWO_PI_32 * jp.p.c_w) if which == "h" else 0.0


def _split_point(jp: JelliumParams) -> float:
    return 20.0 * abs(decay_rates(jp)[1])


def kernel_realspace(which: str, jp: JelliumParams, radii) -> RadialProfile:
    """Radial profile of g or h by oscillatory (QAWF) quadrature of the inverse transform."""
    fhat = _KERNELS[which](jp)
    tail = _tail_coefficient(which, jp)
    kappa = abs(decay_rates(jp)[1])
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    vals, errs, oks = [], [], []
    for r in radii:
        v, e, ok = _radial_value(fhat, float(r), _split_point(jp), tail, kappa)
        vals.append(v)
        errs.append(e)
        oks.append(ok)
    total = TWO_PI_32 * float(fhat(0.0))
    profile = RadialProfile(radii, np.array(vals), np.array(errs), total, all(oks))
    if not profile.converged:
        log.warning("radial quadrature for %s flagged non-convergence", which)
    return profile


def radial_integral(which: str, jp: JelliumParams, panels: int = 25, order: int = 40) -> float:
    """int_{R^3} f = int_0^inf 4 pi r^2 f(r) dr with f from the oscillatory quadrature.

    Gauss-Legendre panels on [0, 60/kappa_1], geometrically graded from the
    short decay length 1/kappa_2 near the origin.
    """
    fhat = _KERNELS[which](jp)
    tail = _tail_coefficient(which, jp)
    k1, k2 = (abs(k.real) for k in decay_rates(jp))
    edges = np.concatenate([[0.0], np.geomspace(0.01 / k2, 60.0 / k1, panels)])
    x, w = np.polynomial.legendre.leggauss(order)
    split = _split_point(jp)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        f = np.array([_radial_value(fhat, ri, split, tail, k2)[0] for ri in r])
        total += 0.5 * (hi - lo) * np.sum(w * 4.0 * np.pi * r**2 * f)
    return float(total)


def decay_rates(jp: JelliumParams) -> tuple[complex, complex]:
    """kappa_1, kappa_2 with C_W k^4 + b k^2 + 8 pi alpha^2 = C_W (k^2 + kappa_1^2)(k^2 + kappa_2^2)."""
    cw, b, c = jp.p.c_w, jp.b, 8.0 * np.pi * jp.alpha**2
    disc = np.sqrt(complex(b * b - 4.0 * cw * c))
    k1sq = (b - disc) / (2.0 * cw)
    k2sq = (b + disc) / (2.0 * cw)
    return np.sqrt(k1sq), np.sqrt(k2sq)


def linear_screening_check(jp: JelliumParams, quadrature: bool = True, drop_convention_factor: bool = False) -> float:
    """|2 alpha int g - 1|: zero when the linear response screens the defect charge completely."""
    if drop_convention_factor:
        total = float(kernel_g_hat(0.0, jp))
    elif quadrature:
        total = radial_integral("g", jp)
    else:
        total = TWO_PI_32 * float(kernel_g_hat(0.0, jp))
    return abs(2.0 * jp.alpha * total - 1.0)


# ---------------------------------------------------------------------------
# box fixed point


class FixedPointDivergence(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass
class JelliumSolution:
    v: GridFunction
    nu: GridFunction
    alpha: float
    residual: float
    iters: int
    converged: bool
    trace: list

    @property
    def defect_charge(self) -> GridFunction:
        """nu - (2 alpha v + v^2)."""
        return self.nu - (2.0 * self.alpha * self.v + self.v * self.v)

    @property
    def screening_integral(self) -> float:
        return self.defect_charge.integral()


def _box_symbols(jp: JelliumParams, lat: Lattice, coulomb: str):
    k2 = lat.k2_half
    coul = np.zeros_like(k2)
    nz = k2 > 0
    coul[nz] = 4.0 * np.pi / k2[nz]
    a = jp.alpha
    if coulomb == "free":
        G = np.empty_like(k2)
        H = np.empty_like(k2)
        denom = jp.denominator(np.sqrt(k2[nz]))
        G[nz] = 4.0 * np.pi * a / denom
        H[nz] = k2[nz] / denom
        G[0, 0, 0] = 1.0 / (2.0 * a)
        H[0, 0, 0] = 0.0
        coul[0, 0, 0] = 0.0
    elif coulomb == "periodic":
        coul[0, 0, 0] = build_kernel(lat).integral
        lin = jp.p.c_w * k2 + jp.b + 2.0 * a * a * coul
        G = a * coul / lin
        H = 1.0 / lin
    else:
        raise ValueError(f"unknown coulomb mode {coulomb!r}")
    return G, H, coul


def linear_response(nu: GridFunction, jp: JelliumParams, coulomb: str = "free") -> GridFunction:
    """g * nu on the box (the first-order term of the response)."""
    G, _, _ = _box_symbols(jp, nu.lat, coulomb)
    return GridFunction(nu.lat, apply_symbol(nu.values, G))


def jellium_solve(
    nu,
    jp: JelliumParams,
    box: Lattice,
    cfg: SolverConfig = SolverConfig(),
    coulomb: str = "free",
    damping: float = 0.5,
    v0=None,
) -> JelliumSolution:
    """Damped fixed-point iteration for the jellium Euler equation on a periodic box.

    ``nu`` is a closed-form localized density (sampled on the box without
    images) or a GridFunction. The residual is the discrete l2 norm of T(v) - v.
    """
    lat = box
    nu_f = nu if isinstance(nu, GridFunction) else restrict_to_cell(nu, lat)
    G, H, coul = _box_symbols(jp, lat, coulomb)
    a = jp.alpha
    c_tf = jp.p.c_tf
    nuv = nu_f.values
    a73 = a ** (7.0 / 3.0)
    a43 = a ** (4.0 / 3.0)

    def T(v):
        u = a + v
        dens = nuv - 2.0 * a * v - v * v
        kappa = -(5.0 / 3.0) * c_tf * (np.abs(u) ** (4.0 / 3.0) * u - a73 - (7.0 / 3.0) * a43 * v)
        kappa = kappa + apply_symbol(dens, coul) * v
        return irfft(G * rfft(nuv - v * v) + H * rfft(kappa), lat.shape)

    tol = cfg.tol_for(lat)
    v = np.zeros(lat.shape) if v0 is None else np.array(v0, dtype=float)
    tv = T(v)
    res = float(np.linalg.norm(tv - v))
    beta = damping
    trace = [(0, res, beta)]
    it = 0
    rejects = 0
    while res > tol and it < cfg.max_iters:
        it += 1
        v_try = v + beta * (tv - v)
        tv_try = T(v_try)
        res_try = float(np.linalg.norm(tv_try - v_try))
        if np.isfinite(res_try) and res_try < res:
            v, tv, res = v_try, tv_try, res_try
            beta = min(1.0, beta * 1.2)
            rejects = 0
            trace.append((it, res, beta))
        else:
            beta *= 0.5
            rejects += 1
            if beta < 1e-6 or rejects > 40:
                raise FixedPointDivergence(f"fixed point stalled at residual {res:.3e}", trace)
    converged = res <= tol
    return JelliumSolution(GridFunction(lat, v), nu_f, a, res, it, converged, trace)


@dataclass
class LadderResult:
    epsilons: np.ndarray
    residuals: np.ndarray  # ||v_eps - g * (eps nu)||_{L^2(box)}
    slope: Optional[float]  # least-squares slope of log residual against log epsilon
    converged: bool


def linear_ladder(nu, epsilons, jp: JelliumParams, box: Lattice, cfg: SolverConfig = SolverConfig(),
                  coulomb: str = "free", damping: float = 0.5) -> LadderResult:
    """Distance between the nonlinear response to eps * nu and its linearization, for each eps."""
    eps = np.asarray(epsilons, dtype=float)
    res, ok = [], True
    for e in eps:
        nu_e = restrict_to_cell(nu.scaled(float(e)), box)
        sol = jellium_solve(nu_e, jp, box, cfg, coulomb, damping)
        ok = ok and sol.converged
        res.append((sol.v - linear_response(nu_e, jp, coulomb)).l2norm())
    res = np.array(res)
    slope = None
    if len(eps) >= 2 and np.all(res > 0):
        slope = float(np.polyfit(np.log(eps), np.log(res), 1)[0])
    return LadderResult(eps, res, slope, ok)
