"""Perfect-crystal reference solves, defect solves and the supercell L-scan."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .coulomb import poisson_periodic
from .field import GridFunction, laplacian, to_fourier
from .functional import PerfectCrystalState, TfwParams
from .lattice import Lattice
from .minimize import (
    NonConvergence,
    SolverConfig,
    minimize_constrained,
    minimize_defect_constrained,
    minimize_defect_free,
)
from .nuclear import NuclearModel

log = logging.getLogger(__name__)


def solve_perfect(model: NuclearModel, lat: Lattice, p: TfwParams = TfwParams(), cfg: SolverConfig = SolverConfig()) -> PerfectCrystalState:
    """Reference crystal on the unit cell ``lat`` (L must be 1)."""
    if lat.L != 1:
        raise ValueError("the perfect crystal is solved on the unit cell; use state.on_supercell(L)")
    Z = model.Z
    if not Z > 0:
        raise ValueError(f"total periodic charge must be positive, got Z={Z}")
    rho_nuc = model.periodic_density(lat)
    res = minimize_constrained(rho_nuc, Z, p, cfg)
    if not res.converged:
        raise NonConvergence(res)
    return _state_from_u0(res.v, rho_nuc, Z, p)


def jellium_state(alpha: float, lat: Lattice, p: TfwParams = TfwParams()) -> PerfectCrystalState:
    """Homogeneous host: rho_nuc = rho0 = alpha^2, u0 = alpha, V0 = 0."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    u0 = GridFunction.constant(lat, alpha)
    rho = GridFunction.constant(lat, alpha**2)
    eps = (5.0 / 3.0) * p.c_tf * alpha ** (4.0 / 3.0)
    return PerfectCrystalState(u0, rho, GridFunction.zeros(lat), eps, alpha, alpha, rho, alpha**2 * lat.a**3)


def _state_from_u0(u0: GridFunction, rho_nuc: GridFunction, Z: float, p: TfwParams) -> PerfectCrystalState:
    umin = float(u0.values.min())
    if not umin > 0:
        raise RuntimeError(f"perfect-crystal amplitude not positive on the grid (min {umin:.3e})")
    rho0 = u0 * u0
    v0 = poisson_periodic(rho0 - rho_nuc)
    # Fermi level from the Rayleigh quotient of the Euler equation
    h_u = -p.c_w * laplacian(u0).values + ((5.0 / 3.0) * p.c_tf * rho0.values ** (2.0 / 3.0) + v0.values) * u0.values
    eps = float(np.vdot(h_u, u0.values) / np.vdot(u0.values, u0.values))
    return PerfectCrystalState(u0, rho0, v0, eps, umin, float(u0.values.max()), rho_nuc, Z)


def perfect_euler_residual(state: PerfectCrystalState, p: TfwParams) -> float:
    """Discrete l2 norm of (H0_per - eps_F) u0."""
    u0 = state.u0
    h_u = -p.c_w * laplacian(u0).values + ((5.0 / 3.0) * p.c_tf * state.rho0.values ** (2.0 / 3.0) + state.v0.values) * u0.values
    return float(np.linalg.norm(h_u - state.eps_f * u0.values))


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class DefectDiagnostics:
    rho_defect: GridFunction
    phi: GridFunction
    radii: np.ndarray
    smallk: np.ndarray

    @property
    def screening_integral(self) -> float:
        return self.rho_defect.integral()

    def smallk_avg(self, r: float) -> float:
        return _smallk_avg(self.rho_defect, r)

    @property
    def trend_decreasing(self) -> bool:
        """True when smallk_avg decreases strictly as r shrinks toward the first shell."""
        return bool(np.all(np.diff(self.smallk) > 0))


def _smallk_avg(rho: GridFunction, r: float) -> float:
    """Average of |rho_hat| over the grid modes with |k| <= r (rho_hat the unitary transform).

    The ball measure |B_r| is taken as (number of modes in B_r) * (2pi)^3/|Gamma|,
    the same Riemann sum used for the numerator.
    """
    lat = rho.lat
    c = to_fourier(rho)
    # unitary transform: rho_hat(k) = (2pi)^{-3/2} int rho e^{-ikx} = (2pi)^{-3/2} |Gamma|^{1/2} c_k
    rho_hat = np.abs(c) * np.sqrt(lat.volume) / (2 * np.pi) ** 1.5
    mask = lat.k2 <= r * r * (1 + 1e-9)
    return float(rho_hat[mask].mean())


def shell_radii(lat: Lattice, count: int = 3) -> np.ndarray:
    """Radii of the smallest nonzero k-shells |m|^2 = 1, 2, 3, ..."""
    sq = np.unique(np.rint(lat.k2 / lat.dk**2).astype(int))
    sq = sq[sq > 0][:count]
    return lat.dk * np.sqrt(sq)


def defect_diagnostics(state: PerfectCrystalState, nu_L: GridFunction, v: GridFunction, n_shells: int = 3) -> DefectDiagnostics:
    rho = nu_L - (2.0 * state.u0 * v + v * v)
    phi = poisson_periodic(rho)
    radii = shell_radii(rho.lat, n_shells)
    smallk = np.array([_smallk_avg(rho, r) for r in radii])
    return DefectDiagnostics(rho, phi, radii, smallk)


# ---------------------------------------------------------------------------
# thermodynamic-limit scan


REPORT_HEADER = "L,q,energy,multiplier,screening_integral,local_distance,iters,converged"


@dataclass
class ScanRow:
    L: int
    q: object  # float or "free"
    energy: float
    multiplier: float
    screening_integral: float
    local_distance: float
    iters: int
    converged: bool
    error: Optional[str] = None


@dataclass
class ThermoScanReport:
    rows: list = field(default_factory=list)
    solutions: dict = field(default_factory=dict)  # (q, L) -> SolveResult

    def to_csv(self) -> str:
        lines = [REPORT_HEADER]
        for r in self.rows:
            q = r.q if isinstance(r.q, str) else f"{r.q:.17g}"
            lines.append(
                f"{r.L},{q},{r.energy:.17g},{r.multiplier:.17g},{r.screening_integral:.17g},"
                f"{r.local_distance:.17g},{r.iters},{int(r.converged)}"
            )
        return "\n".join(lines) + "\n"

    def select(self, q) -> list:
        return [r for r in self.rows if r.q == q]

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.rows)


def ball_mask(lat: Lattice, radius: float, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    x, y, z = lat.coords()
    cx, cy, cz = center
    return (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2 <= radius**2


def local_l2(v: GridFunction, w: GridFunction, radius: float) -> float:
    """||v - w||_{L^2(B)} over the ball B of given radius at the origin; fields may live on different supercells."""
    a = _crop_to_ball_box(v, radius)
    b = _crop_to_ball_box(w, radius)
    mask = _crop_to_ball_box(GridFunction(v.lat, ball_mask(v.lat, radius).astype(float)), radius) > 0.5
    return float(np.sqrt(np.sum((a - b)[mask] ** 2) * v.lat.dv))


def _crop_to_ball_box(v: GridFunction, radius: float) -> np.ndarray:
    # same grid spacing on every supercell: cut the cube |x_i| <= radius around the origin
    h = v.lat.spacing
    m = int(np.floor(radius / h + 1e-9))
    idx = np.r_[np.arange(-m, 0) % v.lat.n, np.arange(0, m + 1)]
    return v.values[np.ix_(idx, idx, idx)]


def run_thermo_scan(
    model: NuclearModel,
    q_list: Sequence[float],
    L_list: Sequence[int],
    lat1: Lattice,
    p: TfwParams = TfwParams(),
    cfg: SolverConfig = SolverConfig(),
    state1: Optional[PerfectCrystalState] = None,
    include_free: bool = True,
    threads: int = 1,
) -> ThermoScanReport:
    """Constrained solves for every (q, L), plus the free solve per L, reported by (q, L).

    Local distances are measured against the largest-L solution of the same q
    on the ball of radius a/2 at the defect.
    """
    L_list = list(L_list)
    if L_list != sorted(L_list) or len(set(L_list)) != len(L_list):
        raise ValueError("L_list must be strictly increasing")
    if any(L < 1 for L in L_list):
        raise ValueError("L must be >= 1")
    if state1 is None:
        state1 = solve_perfect(model, lat1, p, cfg)
    for q in q_list:
        for L in L_list:
            if state1.Z * L**3 + q < 0:
                raise ValueError(f"Z L^3 + q < 0 for q={q}, L={L}")

    states = {L: state1.on_supercell(L) for L in L_list}
    nus = {L: model.defect_density(states[L].lat) for L in L_list}
    jobs = [(q, L) for q in q_list for L in L_list]
    if include_free:
        jobs += [("free", L) for L in L_list]

    def work(job):
        q, L = job
        try:
            if q == "free":
                return job, minimize_defect_free(states[L], nus[L], p, cfg), None
            return job, minimize_defect_constrained(states[L], nus[L], float(q), p, cfg), None
        except Exception as exc:  # one failed cell must not abort the scan
            log.warning("scan cell q=%s L=%d failed: %s", q, L, exc)
            return job, None, f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, jobs))
    else:
        outcomes = [work(j) for j in jobs]

    report = ThermoScanReport()
    radius = lat1.a / 2
    for (q, L), res, err in outcomes:
        if res is not None:
            report.solutions[(q, L)] = res
    q_order = [q for q in q_list] + (["free"] if include_free else [])
    for q in q_order:
        ref = report.solutions.get((q, L_list[-1]))
        for L in L_list:
            res = report.solutions.get((q, L))
            if res is None:
                err = next(e for (jq, jL), _, e in outcomes if jq == q and jL == L)
                report.rows.append(ScanRow(L, q, np.nan, np.nan, np.nan, np.nan, 0, False, err))
                continue
            st = states[L]
            dens = 2.0 * st.u0 * res.v + res.v * res.v
            s = nus[L].integral() - dens.integral()
            d = local_l2(res.v, ref.v, radius) if ref is not None else np.nan
            report.rows.append(ScanRow(L, q, res.energy, res.multiplier, s, d, res.iters, res.converged))
    return report
