"""Experiment configuration: TOML documents parsed into frozen dataclasses.

Grammar (TOML; every key below is optional unless the mode needs it, and
unknown keys anywhere are rejected)::

    mode = "perfect" | "defect" | "thermo-scan" | "jellium" | "validate"
    output_dir = "tfw_out"

    [lattice]                 # required by perfect, defect, thermo-scan
    a = 4.0                   # cubic cell edge, > 0
    n_per_cell = 12           # even, >= 4

    [tfw]
    c_w = 1.0
    c_tf = 31.9...            # default (10/3)(3 pi^2)^{2/3}

    [solver]
    max_iters = 5000
    grad_tol = 1e-6           # omitted -> 1e-8 sqrt(N)
    step_rule = "backtracking"  # or "fixed"
    precondition = true
    seed = 0
    step = 1.0

    [[model.periodic]]        # one table per Gaussian in the unit cell
    q = 4.0
    center = [0.0, 0.0, 0.0]
    sigma = 0.6

    [[model.defect]]          # localized defect nu; same keys
    q = 1.0
    sigma = 0.5

    [defect]                  # mode = "defect"
    L = 2
    q = 0.5                   # or "free"

    [scan]                    # mode = "thermo-scan"
    q_list = [-0.5, 0.0, 0.5]
    L_list = [1, 2, 3, 4]
    include_free = true

    [jellium]                 # mode = "jellium"; nu is model.defect
    alpha = 1.0
    box = 16.0
    n = 32
    epsilons = [0.1, 0.01, 0.001]
    coulomb = "free"          # or "periodic"
    damping = 0.5
    radii = [0.25, 0.5, 1.0, 2.0, 4.0]

    [validate]
    n = 16
    samples = 100000

:func:`emit_config` writes the canonical form of a config (all keys, floats
with 17 significant digits) and ``parse_config(emit_config(c)) == c``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Union

import tomli

from .functional import TfwParams
from .minimize import SolverConfig
from .nuclear import Gaussian, GaussianSum, NuclearModel

MODES = ("perfect", "defect", "thermo-scan", "jellium", "validate")


class ConfigError(ValueError):
    """Parse or validation failure. ``line`` is set for syntax errors, ``key`` for validation errors."""

    def __init__(self, msg: str, line: Optional[int] = None, key: Optional[str] = None):
        super().__init__(msg)
        self.line = line
        self.key = key


@dataclass(frozen=True)
class LatticeConfig:
    a: float = 4.0
    n_per_cell: int = 12


@dataclass(frozen=True)
class DefectRunConfig:
    L: int = 1
    q: Union[float, str] = "free"


@dataclass(frozen=True)
class ScanConfig:
    q_list: tuple = (0.0,)
    L_list: tuple = (1, 2, 3, 4)
    include_free: bool = True


@dataclass(frozen=True)
class JelliumConfig:
    alpha: float = 1.0
    box: float = 16.0
    n: int = 32
    epsilons: tuple = (0.1, 0.01, 0.001)
    coulomb: str = "free"
    damping: float = 0.5
    radii: tuple = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)


@dataclass(frozen=True)
class ValidateConfig:
    n: int = 16
    samples: int = 100000


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    lattice: Optional[LatticeConfig] = None
    model: NuclearModel = NuclearModel(GaussianSum(), GaussianSum())
    tfw: TfwParams = TfwParams()
    solver: SolverConfig = SolverConfig()
    defect: DefectRunConfig = DefectRunConfig()
    scan: ScanConfig = ScanConfig()
    jellium: JelliumConfig = JelliumConfig()
    validate: ValidateConfig = ValidateConfig()
    output_dir: str = "tfw_out"

    def with_overrides(self, seed: Optional[int] = None, output_dir: Optional[str] = None) -> "ExperimentConfig":
        out = self
        if seed is not None:
            out = replace(out, solver=replace(out.solver, seed=int(seed)))
        if output_dir is not None:
            out = replace(out, output_dir=str(output_dir))
        return out


# ---------------------------------------------------------------------------
# parsing


def _fail(key: str, msg: str):
    raise ConfigError(f"{key}: {msg}", key=key)


def _take(table: dict, allowed, where: str) -> dict:
    if not isinstance(table, dict):
        _fail(where, "expected a table")
    extra = sorted(set(table) - set(allowed))
    if extra:
        _fail(f"{where}.{extra[0]}" if where else extra[0], "unknown key")
    return table


def _num(v, key, positive=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(key, f"expected a number, got {v!r}")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            _fail(key, f"expected an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
    if positive and not v > 0:
        _fail(key, f"must be positive, got {v!r}")
    return v


def _num_list(v, key, integer=False):
    if not isinstance(v, list) or not v:
        _fail(key, "expected a nonempty list")
    return tuple(_num(x, f"{key}[{i}]", integer=integer) for i, x in enumerate(v))


def _gaussians(items, key) -> GaussianSum:
    if not isinstance(items, list):
        _fail(key, "expected an array of tables")
    terms = []
    for i, t in enumerate(items):
        k = f"{key}[{i}]"
        _take(t, ("q", "center", "sigma"), k)
        if "q" not in t or "sigma" not in t:
            _fail(k, "each Gaussian needs q and sigma")
        center = t.get("center", [0.0, 0.0, 0.0])
        if not isinstance(center, list) or len(center) != 3:
            _fail(f"{k}.center", "expected three coordinates")
        c = tuple(_num(x, f"{k}.center") for x in center)
        terms.append(Gaussian(_num(t["q"], f"{k}.q"), c, _num(t["sigma"], f"{k}.sigma", positive=True)))
    return GaussianSum(tuple(terms))


def _line_of(exc: tomli.TOMLDecodeError) -> Optional[int]:
    m = re.search(r"line (\d+)", str(exc))
    return int(m.group(1)) if m else None


def parse_config(text: str) -> ExperimentConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        line = _line_of(exc)
        raise ConfigError(f"parse error at line {line}: {exc}", line=line) from None

    _take(doc, ("mode", "output_dir", "lattice", "tfw", "solver", "model", "defect", "scan", "jellium", "validate"), "")
    mode = doc.get("mode")
    if mode not in MODES:
        _fail("mode", f"expected one of {', '.join(MODES)}, got {mode!r}")
    out = {"mode": mode}
    if "output_dir" in doc:
        if not isinstance(doc["output_dir"], str) or not doc["output_dir"]:
            _fail("output_dir", "expected a nonempty string")
        out["output_dir"] = doc["output_dir"]

    if "lattice" in doc:
        t = _take(doc["lattice"], ("a", "n_per_cell"), "lattice")
        n = _num(t.get("n_per_cell", 12), "lattice.n_per_cell", positive=True, integer=True)
        if n < 4 or n % 2:
            _fail("lattice.n_per_cell", f"must be even and >= 4, got {n}")
        out["lattice"] = LatticeConfig(_num(t.get("a", 4.0), "lattice.a", positive=True), n)
    elif mode in ("perfect", "defect", "thermo-scan"):
        _fail("lattice", f"required for mode {mode!r}")

    if "tfw" in doc:
        t = _take(doc["tfw"], ("c_w", "c_tf"), "tfw")
        d = TfwParams()
        out["tfw"] = TfwParams(
            _num(t.get("c_w", d.c_w), "tfw.c_w", positive=True),
            _num(t.get("c_tf", d.c_tf), "tfw.c_tf", positive=True),
        )

    if "solver" in doc:
        names = [f.name for f in fields(SolverConfig)]
        t = _take(doc["solver"], names, "solver")
        kw = {}
        for k, v in t.items():
            key = f"solver.{k}"
            if k in ("max_iters", "seed"):
                kw[k] = _num(v, key, integer=True)
            elif k in ("grad_tol", "step", "precond_shift", "armijo"):
                kw[k] = _num(v, key, positive=True)
            elif k in ("precondition", "record_trace"):
                if not isinstance(v, bool):
                    _fail(key, "expected true or false")
                kw[k] = v
            elif k == "step_rule":
                if v not in ("fixed", "backtracking"):
                    _fail(key, f"expected 'fixed' or 'backtracking', got {v!r}")
                kw[k] = v
        if kw.get("max_iters", 1) < 1:
            _fail("solver.max_iters", "must be >= 1")
        out["solver"] = SolverConfig(**kw)

    if "model" in doc:
        t = _take(doc["model"], ("periodic", "defect"), "model")
        out["model"] = NuclearModel(
            _gaussians(t.get("periodic", []), "model.periodic"),
            _gaussians(t.get("defect", []), "model.defect"),
        )
    model = out.get("model", ExperimentConfig.model)
    if mode in ("perfect", "defect", "thermo-scan") and not model.Z > 0:
        _fail("model.periodic", "total periodic charge Z must be positive")

    if "defect" in doc:
        t = _take(doc["defect"], ("L", "q"), "defect")
        L = _num(t.get("L", 1), "defect.L", integer=True)
        if L < 1:
            _fail("defect.L", "L must be ≥ 1")
        q = t.get("q", "free")
        if q != "free":
            q = _num(q, "defect.q")
        out["defect"] = DefectRunConfig(L, q)

    if "scan" in doc:
        t = _take(doc["scan"], ("q_list", "L_list", "include_free"), "scan")
        d = ScanConfig()
        q_list = _num_list(t["q_list"], "scan.q_list") if "q_list" in t else d.q_list
        L_list = _num_list(t["L_list"], "scan.L_list", integer=True) if "L_list" in t else d.L_list
        if any(L < 1 for L in L_list):
            _fail("scan.L_list", "L must be ≥ 1")
        if list(L_list) != sorted(set(L_list)):
            _fail("scan.L_list", "must be strictly increasing")
        inc = t.get("include_free", d.include_free)
        if not isinstance(inc, bool):
            _fail("scan.include_free", "expected true or false")
        out["scan"] = ScanConfig(q_list, L_list, inc)
    if mode == "thermo-scan" and "lattice" in out:
        sc = out.get("scan", ScanConfig())
        for q in sc.q_list:
            if model.Z * sc.L_list[0] ** 3 + q < 0:
                _fail("scan.q_list", f"Z L^3 + q must be nonnegative (q={q})")

    if "jellium" in doc:
        t = _take(doc["jellium"], [f.name for f in fields(JelliumConfig)], "jellium")
        d = JelliumConfig()
        n = _num(t.get("n", d.n), "jellium.n", positive=True, integer=True)
        if n < 4 or n % 2:
            _fail("jellium.n", f"must be even and >= 4, got {n}")
        coul = t.get("coulomb", d.coulomb)
        if coul not in ("free", "periodic"):
            _fail("jellium.coulomb", f"expected 'free' or 'periodic', got {coul!r}")
        eps = _num_list(t["epsilons"], "jellium.epsilons") if "epsilons" in t else d.epsilons
        if any(not e > 0 for e in eps):
            _fail("jellium.epsilons", "must be positive")
        radii = _num_list(t["radii"], "jellium.radii") if "radii" in t else d.radii
        if any(not r > 0 for r in radii):
            _fail("jellium.radii", "must be positive")
        damping = _num(t.get("damping", d.damping), "jellium.damping", positive=True)
        if damping > 1:
            _fail("jellium.damping", "must be in (0, 1]")
        out["jellium"] = JelliumConfig(
            _num(t.get("alpha", d.alpha), "jellium.alpha", positive=True),
            _num(t.get("box", d.box), "jellium.box", positive=True),
            n, eps, coul, damping, radii,
        )

    if "validate" in doc:
        t = _take(doc["validate"], ("n", "samples"), "validate")
        d = ValidateConfig()
        n = _num(t.get("n", d.n), "validate.n", positive=True, integer=True)
        if n < 4 or n % 2:
            _fail("validate.n", f"must be even and >= 4, got {n}")
        out["validate"] = ValidateConfig(n, _num(t.get("samples", d.samples), "validate.samples", positive=True, integer=True))

    return ExperimentConfig(**out)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# canonical emitter


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        s = f"{x:.17g}"
        return s if any(c in s for c in ".einn") else s + ".0"
    if isinstance(x, str):
        return '"' + x.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(x, (tuple, list)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot emit {type(x).__name__}")


def _section(name: str, obj) -> list:
    lines = [f"[{name}]"]
    for f in fields(obj):
        v = getattr(obj, f.name)
        if v is None:
            continue
        lines.append(f"{f.name} = {_fmt(v)}")
    return lines + [""]


def _gauss_tables(name: str, gs: GaussianSum) -> list:
    lines = []
    for g in gs.terms:
        lines += [f"[[{name}]]", f"q = {_fmt(float(g.q))}", f"center = {_fmt(tuple(float(c) for c in g.center))}",
                  f"sigma = {_fmt(float(g.sigma))}", ""]
    return lines


def emit_config(cfg: ExperimentConfig) -> str:
    lines = [f"mode = {_fmt(cfg.mode)}", f"output_dir = {_fmt(cfg.output_dir)}", ""]
    if cfg.lattice is not None:
        lines += _section("lattice", cfg.lattice)
    lines += _section("tfw", cfg.tfw)
    lines += _section("solver", cfg.solver)
    lines += _gauss_tables("model.periodic", cfg.model.periodic)
    lines += _gauss_tables("model.defect", cfg.model.defect)
    for name in ("defect", "scan", "jellium", "validate"):
        lines += _section(name, getattr(cfg, name))
    return "\n".join(lines)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-JSON view (used for the manifest echo)."""
    return tomli.loads(emit_config(cfg))
