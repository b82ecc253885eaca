import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from fenesim.config import (
    FieldConfig,
    RunConfig,
    build_setup,
    config_schema,
    dump_config,
    load_config,
    parse_config,
    reference_config,
)
from fenesim.errors import ConfigError
from fenesim.galerkin import Torus


@settings(max_examples=30, deadline=None)
@given(
    b=st.floats(2.5, 50.0),
    ell=st.floats(1.0, 20.0),
    dt=st.sampled_from([1e-3, 5e-3, 1e-2]),
    seed=st.integers(0, 2**31 - 1),
    snapshots=st.booleans(),
)
def test_dump_and_parse_round_trip(b, ell, dt, seed, snapshots):
    cfg = parse_config({
        "chain": {"extensibility": [b]},
        "levels": {"ell": ell},
        "numerics": {"dt": dt},
        "output": {"snapshots": snapshots},
        "seed": seed,
    })
    again = parse_config(yaml.safe_load(dump_config(cfg)))
    assert again == cfg


def test_reference_configs_round_trip(tmp_path):
    for name in ("equilibrium", "small_data"):
        cfg = reference_config(name)
        path = tmp_path / f"{name}.yaml"
        path.write_text(dump_config(cfg))
        assert load_config(path) == cfg


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="numerics.tiem_step"):
        parse_config({"numerics": {"tiem_step": 1.0}})


def test_bad_value_is_named():
    with pytest.raises(ConfigError, match="levels.pdf_modes"):
        parse_config({"levels": {"pdf_modes": "many"}})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "absent.yaml")


def test_non_mapping_file(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(path)


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert load_config(path) == RunConfig()


def _random_config(seed):
    return RunConfig(
        initial={"velocity": FieldConfig(kind="random", params=[0.1]),
                 "pdf": FieldConfig(kind="random", params=[0.05])},
        seed=seed,
    )


def test_random_initial_data_is_seeded():
    x = Torus(grid=16).points
    a, b, c = (build_setup(_random_config(s)) for s in (7, 7, 8))
    assert np.array_equal(a.v0(x), b.v0(x))
    assert not np.allclose(a.v0(x), c.v0(x))
    q = np.random.default_rng(0).uniform(-1, 1, (5, 1, 2))
    assert np.array_equal(a.psi0(x, q), b.psi0(x, q))


def test_random_velocity_is_divergence_free():
    setup = build_setup(_random_config(11))
    x = np.random.default_rng(1).uniform(0, 2 * np.pi, (40, 2))
    h = 1e-5
    div = np.zeros(len(x))
    for a in range(2):
        e = np.zeros(2)
        e[a] = h
        div += (setup.v0(x + e)[:, a] - setup.v0(x - e)[:, a]) / (2 * h)
    assert np.max(np.abs(div)) <= 1e-8
    assert np.max(np.abs(setup.v0(x))) > 1e-3


def test_random_pdf_bounded_by_amplitude():
    setup = build_setup(_random_config(3))
    x = Torus(grid=8).points
    b = setup.chain.b[0]
    r = np.sqrt(b) * np.sqrt(np.random.default_rng(2).uniform(0, 1, 50))
    th = np.random.default_rng(3).uniform(0, 2 * np.pi, 50)
    q = np.column_stack([r * np.cos(th), r * np.sin(th)])[:, None, :]
    assert np.max(np.abs(setup.psi0(x, q) - 1.0)) <= 0.05 + 1e-12


@pytest.mark.parametrize("where", ["density", "velocity", "pdf"])
def test_unknown_initial_kind(where):
    cfg = RunConfig(initial={where: FieldConfig(kind="mystery")})
    with pytest.raises(ConfigError, match=f"initial.{where}.kind"):
        build_setup(cfg)


def test_unknown_forcing_kind():
    with pytest.raises(ConfigError, match="forcing"):
        build_setup(RunConfig(forcing=FieldConfig(kind="wind")))


def test_invalid_chain_is_reported():
    with pytest.raises(ConfigError, match="chain.extensibility"):
        build_setup(parse_config({"chain": {"extensibility": [1.5]}}))


def test_reference_setup_matches_fixture():
    s = build_setup(reference_config("small_data"))
    assert (s.levels.m, s.levels.n, s.levels.n_conf, s.levels.ell) == (8, 46, 6, 5.0)
    assert s.final_time == 0.4 and s.dt == 1e-2 and s.maxwellian == "exact"
    x = Torus(grid=16).points
    assert np.allclose(s.rho0(x), 1 + 0.1 * np.sin(x[:, 0]) * np.cos(x[:, 1]))


def test_schema_lists_sections():
    props = config_schema()["properties"]
    assert {"chain", "laws", "levels", "initial", "numerics", "output", "sweep"} <= set(props)
