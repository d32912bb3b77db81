"""Constrained and unconstrained minimization of the TFW functionals.

Every problem is written in terms of the total amplitude w (w = u for the
periodic problem, w = u0 + v for defect problems). The charge constraint
int w^2 = Q is a sphere; iterates are retracted onto it by rescaling.

The iteration is preconditioned gradient descent: the search direction is
P r with P = (shift - C_W Laplacian)^{-1} applied in Fourier space, projected
P-orthogonally onto the tangent space of the sphere. Step lengths start from a
Barzilai-Borwein estimate and are cut back until the Armijo condition holds, so
accepted energies never increase (up to a round-off allowance).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .field import GridFunction, apply_symbol
from .functional import (
    PerfectCrystalState,
    TfwParams,
    defect_energy_and_grad,
    tfw_energy_and_grad,
)
from .lattice import Lattice

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 5000
    grad_tol: Optional[float] = None  # None -> 1e-8 * sqrt(N)
    step_rule: str = "backtracking"  # or "fixed"
    precondition: bool = True
    seed: int = 0
    step: float = 1.0  # initial / fixed step
    precond_shift: float = 1.0
    armijo: float = 1e-4
    record_trace: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValueError(f"unknown step_rule {self.step_rule!r}")

    def tol_for(self, lat: Lattice) -> float:
        return self.grad_tol if self.grad_tol is not None else 1e-8 * np.sqrt(lat.npoints)


@dataclass
class SolveResult:
    """Outcome of a minimization.

    ``residual`` is the discrete l2 norm over grid points of the Euler-equation
    residual (half the L2 gradient minus the multiplier term).
    """

    v: GridFunction
    energy: float
    multiplier: float
    residual: float
    iters: int
    converged: bool
    positivity_flag: bool = False
    trace: list = field(default_factory=list)

    TRACE_HEADER = "iter,energy,residual,constraint_violation,multiplier"

    def trace_csv(self) -> str:
        lines = [self.TRACE_HEADER]
        for row in self.trace:
            lines.append(",".join([str(row[0])] + [f"{x:.17g}" for x in row[1:]]))
        return "\n".join(lines) + "\n"


class NonConvergence(RuntimeError):
    def __init__(self, result: SolveResult):
        super().__init__(f"no convergence after {result.iters} iterations (residual {result.residual:.3e})")
        self.result = result


# ---------------------------------------------------------------------------


def _descend(
    objective: Callable[[np.ndarray, bool], tuple],
    w0: np.ndarray,
    lat: Lattice,
    Q: Optional[float],
    p: TfwParams,
    cfg: SolverConfig,
    lower: Optional[np.ndarray] = None,
):
    """Core loop. ``objective(w, grad)`` returns (energy, L2 gradient or None).

    ``lower`` is the amplitude that must stay nonnegative (w itself); when an
    accepted iterate dips below zero it is replaced by |w| and flagged.
    Returns (w, energy, multiplier, residual, iters, converged, flag, trace).
    """
    tol = cfg.tol_for(lat)
    dv = lat.dv
    if cfg.precondition:
        psym = 1.0 / (cfg.precond_shift + p.c_w * lat.k2_half)
        precond = lambda x: apply_symbol(x, psym)  # noqa: E731
        precond_inv = lambda x: apply_symbol(x, 1.0 / psym)  # noqa: E731
    else:
        precond = precond_inv = lambda x: x  # noqa: E731

    def retract(w):
        if Q is None:
            return w
        norm2 = np.vdot(w, w) * dv
        if Q == 0:
            return np.zeros_like(w)
        return w * np.sqrt(Q / norm2)

    def residual_of(w, g):
        if Q is None:
            return 0.5 * g, 0.0
        nw = np.vdot(w, w)
        mu = 0.0 if nw == 0 else float(np.vdot(g, w) / (2.0 * nw))
        return 0.5 * g - mu * w, mu

    w = retract(np.array(w0, dtype=float))
    flag = False
    e, g = objective(w, True)
    r, mu = residual_of(w, g)
    res = float(np.linalg.norm(r))
    trace = []
    step = cfg.step
    s_prev = y_prev = None
    it = 0
    converged = res <= tol or (Q == 0)

    def record():
        if cfg.record_trace:
            cv = 0.0 if Q is None else abs(float(np.vdot(w, w) * dv) - Q)
            trace.append((it, e, res, cv, mu))

    record()
    while not converged and it < cfg.max_iters:
        it += 1
        d = precond(r)
        if Q is not None:
            pw = precond(w)
            d = d - (np.vdot(d, w) / np.vdot(pw, w)) * pw
        slope = float(np.vdot(r, d))  # > 0 for a descent direction of E along -d
        if slope <= 0:
            d, slope = r.copy(), float(np.vdot(r, r))

        if cfg.step_rule == "backtracking" and s_prev is not None:
            sy = float(np.vdot(s_prev, y_prev))
            if sy > 0:
                # BB1 step in the preconditioned metric
                step = float(np.vdot(s_prev, precond_inv(s_prev))) / sy
            else:
                step = min(2.0 * step, 1e6)

        while True:
            w_new = retract(w - step * d)
            e_new, _ = objective(w_new, False)
            if cfg.step_rule == "fixed":
                break
            # slope uses the half gradient, hence the factor 2
            if np.isfinite(e_new) and e_new <= e - cfg.armijo * step * 2.0 * slope * dv + 1e-13 * (abs(e) + 1.0):
                break
            step *= 0.5
            if step < 1e-14:
                break
        if step < 1e-14:
            log.debug("line search stalled at iteration %d, residual %.3e", it, res)
            break

        if lower is not None and np.min(w_new) < 0:
            flag = True
            w_new = retract(np.abs(w_new))
        e_new, g_new = objective(w_new, True)
        r_new, mu = residual_of(w_new, g_new)
        s_prev = w_new - w
        y_prev = r_new - r
        w, e, g, r = w_new, e_new, g_new, r_new
        res = float(np.linalg.norm(r))
        record()
        converged = res <= tol
    return w, e, mu, res, it, converged, flag, trace


def _finish(lat, v, e, mu, res, it, conv, flag, trace, raise_on_failure):
    result = SolveResult(GridFunction(lat, v), e, mu, res, it, conv, flag, trace)
    if not conv and raise_on_failure:
        raise NonConvergence(result)
    return result


def minimize_constrained(
    rho_nuc: GridFunction,
    Q: float,
    p: TfwParams = TfwParams(),
    cfg: SolverConfig = SolverConfig(),
    w0: Optional[np.ndarray] = None,
    raise_on_failure: bool = False,
) -> SolveResult:
    """Minimize E_R(rho_nuc, u) subject to int u^2 = Q; returns u >= 0 and the Fermi level."""
    if Q < 0:
        raise ValueError(f"charge must be nonnegative, got Q={Q}")
    lat = rho_nuc.lat
    rho = rho_nuc.values
    if w0 is None:
        w0 = np.full(lat.shape, np.sqrt(Q / lat.volume))

    def objective(w, grad):
        return tfw_energy_and_grad(rho, w, lat, p, grad)

    w, e, mu, res, it, conv, flag, trace = _descend(objective, w0, lat, Q, p, cfg, lower=None)
    if w.sum() < 0:
        w = -w
    if Q == 0:
        e, _ = objective(w, False)
    return _finish(lat, w, e, mu, res, it, conv, flag, trace, raise_on_failure)


def minimize_defect_constrained(
    state: PerfectCrystalState,
    nu_L: GridFunction,
    q: float,
    p: TfwParams = TfwParams(),
    cfg: SolverConfig = SolverConfig(),
    v0: Optional[np.ndarray] = None,
    raise_on_failure: bool = False,
) -> SolveResult:
    """Minimize E^nu_L(v) subject to int (2 u0 v + v^2) = q; multiplier is mu_{nu,q,L}."""
    lat = state.lat
    u0 = state.u0.values
    Q = float(np.vdot(u0, u0) * lat.dv) + q
    if Q < 0:
        raise ValueError(f"Z L^3 + q must be nonnegative, got {Q}")
    nu = nu_L.values

    def objective(w, grad):
        return defect_energy_and_grad(state, nu, w - u0, p, grad)

    w0 = u0 if v0 is None else u0 + v0
    w, e, mu, res, it, conv, flag, trace = _descend(objective, w0, lat, Q, p, cfg, lower=u0)
    if np.vdot(w, u0) < 0:
        w = -w
    return _finish(lat, w - u0, e, mu, res, it, conv, flag, trace, raise_on_failure)


def minimize_defect_free(
    state: PerfectCrystalState,
    nu_L: GridFunction,
    p: TfwParams = TfwParams(),
    cfg: SolverConfig = SolverConfig(),
    v0: Optional[np.ndarray] = None,
    raise_on_failure: bool = False,
) -> SolveResult:
    """Minimize E^nu_L(v) without a charge constraint (multiplier reported as 0)."""
    lat = state.lat
    u0 = state.u0.values
    nu = nu_L.values

    def objective(w, grad):
        return defect_energy_and_grad(state, nu, w - u0, p, grad)

    w0 = u0 if v0 is None else u0 + v0
    w, e, mu, res, it, conv, flag, trace = _descend(objective, w0, lat, None, p, cfg, lower=u0)
    return _finish(lat, w - u0, e, 0.0, res, it, conv, flag, trace, raise_on_failure)


# ---------------------------------------------------------------------------


def random_start(lat: Lattice, rng: np.random.Generator, scale: float, modes: int = 3) -> np.ndarray:
    """Smooth random amplitude: a few low Fourier modes of random sign around a random-sign offset."""
    x, y, z = lat.coords()
    kx = 2 * np.pi / lat.edge
    out = np.full(lat.shape, rng.choice([-1.0, 1.0]))
    for _ in range(modes):
        m = rng.integers(-2, 3, size=3)
        phase = rng.uniform(0, 2 * np.pi)
        out = out + 0.3 * rng.standard_normal() * np.cos(kx * (m[0] * x + m[1] * y + m[2] * z) + phase)
    return scale * out


def uniqueness_probe(
    solve: Callable[[Optional[np.ndarray]], SolveResult],
    n_starts: int,
    lat: Lattice,
    scale: float,
    seed: int = 0,
    density: Optional[Callable[[SolveResult], np.ndarray]] = None,
):
    """Run ``solve(start)`` from ``n_starts`` starts and compare the converged densities.

    The first start is ``None`` (the solver's default initialization), the
    others are :func:`random_start` amplitudes of size ``scale``. ``density``
    maps a result to its electronic density (default ``v**2``). Returns
    (max_ij ||rho_i - rho_j|| / ||rho_1||, results).
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    if density is None:
        density = lambda r: r.v.values ** 2  # noqa: E731
    rng = np.random.default_rng(seed)
    results = []
    for i in range(n_starts):
        start = None if i == 0 else random_start(lat, rng, scale)
        res = solve(start)
        if not res.converged:
            raise NonConvergence(res)
        results.append(res)
    dens = [density(r) for r in results]
    ref = np.linalg.norm(dens[0])
    worst = 0.0
    for i in range(len(dens)):
        for j in range(i + 1, len(dens)):
            worst = max(worst, float(np.linalg.norm(dens[i] - dens[j]) / ref))
    return worst, results
