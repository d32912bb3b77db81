import pytest
from hypothesis import given, settings, strategies as st

from tfwdefect.config import (
    ConfigError,
    DefectRunConfig,
    ExperimentConfig,
    JelliumConfig,
    LatticeConfig,
    ScanConfig,
    ValidateConfig,
    config_to_dict,
    emit_config,
    load_config,
    parse_config,
)
from tfwdefect.functional import TfwParams
from tfwdefect.minimize import SolverConfig
from tfwdefect.nuclear import Gaussian, GaussianSum, NuclearModel

SCAN = """
mode = "thermo-scan"
[lattice]
a = 4.0
n_per_cell = 8
[[model.periodic]]
q = 2.0
sigma = 0.6
[scan]
L_list = [1, 2]
"""


def test_minimal_jellium():
    cfg = parse_config('mode = "jellium"\n[[model.defect]]\nq = 1.0\nsigma = 1.0\n')
    assert cfg.mode == "jellium" and cfg.lattice is None
    assert cfg.jellium == JelliumConfig()
    assert cfg.model.defect.total_charge == 1.0


def test_scan_example():
    cfg = parse_config(SCAN)
    assert cfg.lattice == LatticeConfig(4.0, 8)
    assert cfg.scan.L_list == (1, 2) and cfg.scan.q_list == (0.0,)
    assert cfg.model.Z == 2.0


@pytest.mark.parametrize(
    "text,key",
    [
        (SCAN.replace("L_list = [1, 2]", "L_list = [0]"), "scan.L_list"),
        (SCAN.replace("L_list = [1, 2]", "L_list = [2, 1]"), "scan.L_list"),
        (SCAN.replace("n_per_cell = 8", "n_per_cell = 7"), "lattice.n_per_cell"),
        (SCAN.replace("a = 4.0", "a = -1.0"), "lattice.a"),
        (SCAN.replace("q = 2.0", "q = 0.0"), "model.periodic"),
        (SCAN.replace("sigma = 0.6", "sigma = 0.0"), "model.periodic[0].sigma"),
        (SCAN.replace("[scan]", "[scan]\nq_list = [-9.0]"), "scan.q_list"),
        (SCAN.replace('mode = "thermo-scan"', 'mode = "relax"'), "mode"),
        ('mode = "perfect"\n', "lattice"),
        ('mode = "jellium"\n[jellium]\ncoulomb = "ewald"\n', "jellium.coulomb"),
        ('mode = "jellium"\n[jellium]\ndamping = 1.5\n', "jellium.damping"),
        ('mode = "validate"\n[solver]\nstep_rule = "wolfe"\n', "solver.step_rule"),
        ('mode = "validate"\n[solver]\nmax_iters = 0\n', "solver.max_iters"),
        ('mode = "defect"\n[lattice]\n[[model.periodic]]\nq = 1.0\nsigma = 0.5\n[defect]\nL = 0\n', "defect.L"),
    ],
)
def test_validation_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key
    assert str(info.value).startswith(key)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config(SCAN.replace("[scan]", "[scan]\nq_lst = [0.5]"))
    assert "q_lst" in str(info.value)
    with pytest.raises(ConfigError):
        parse_config(SCAN + "\n[extras]\nx = 1\n")


def test_parse_error_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config('mode = "jellium"\n\n[jellium]\nalpha = = 1\n')
    assert info.value.line == 4
    assert "line 4" in str(info.value)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.toml"))
    assert files
    for f in files:
        cfg = load_config(f)
        assert parse_config(emit_config(cfg)) == cfg


def test_overrides():
    cfg = parse_config(SCAN).with_overrides(seed=7, output_dir="x")
    assert cfg.solver.seed == 7 and cfg.output_dir == "x"
    assert config_to_dict(cfg)["solver"]["seed"] == 7


finite = st.floats(0.05, 50.0, allow_nan=False)
gauss = st.builds(
    Gaussian,
    st.floats(-5.0, 5.0, allow_nan=False),
    st.tuples(*[st.floats(-2.0, 2.0, allow_nan=False)] * 3),
    st.floats(0.1, 2.0),
)
even_n = st.integers(2, 20).map(lambda k: 2 * k)
configs = st.builds(
    ExperimentConfig,
    mode=st.just("jellium") | st.just("validate"),
    lattice=st.none() | st.builds(LatticeConfig, finite, even_n),
    model=st.builds(
        NuclearModel,
        st.builds(GaussianSum, st.lists(gauss, max_size=2).map(tuple)),
        st.builds(GaussianSum, st.lists(gauss, max_size=2).map(tuple)),
    ),
    tfw=st.builds(TfwParams, finite, finite),
    solver=st.builds(
        SolverConfig,
        max_iters=st.integers(1, 10**6),
        grad_tol=st.none() | st.floats(1e-14, 1.0),
        step_rule=st.sampled_from(["fixed", "backtracking"]),
        precondition=st.booleans(),
        seed=st.integers(0, 2**31),
        step=finite,
    ),
    defect=st.builds(DefectRunConfig, st.integers(1, 6), st.just("free") | st.floats(-3.0, 3.0)),
    scan=st.builds(
        ScanConfig,
        st.lists(st.floats(-0.9, 0.9), min_size=1, max_size=4).map(tuple),
        st.lists(st.integers(1, 6), min_size=1, max_size=4, unique=True).map(lambda x: tuple(sorted(x))),
        st.booleans(),
    ),
    jellium=st.builds(
        JelliumConfig,
        finite,
        finite,
        even_n,
        st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=4).map(tuple),
        st.sampled_from(["free", "periodic"]),
        st.floats(0.01, 1.0),
        st.lists(finite, min_size=1, max_size=4).map(tuple),
    ),
    validate=st.builds(ValidateConfig, even_n, st.integers(1, 10**6)),
    output_dir=st.text("abcxyz_/0123", min_size=1, max_size=12),
)


@settings(max_examples=100, deadline=None)
@given(cfg=configs)
def test_emit_parse_round_trip(cfg):
    text = emit_config(cfg)
    back = parse_config(text)
    assert back == cfg
    assert emit_config(back) == text
