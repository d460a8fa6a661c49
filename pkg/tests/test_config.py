import dataclasses

import pytest

from sharedsteer.config import (
    ENV_VAR, Config, ConfigError, DesignSettings, load_config, load_scenario, loads_config,
    loads_scenario, scenario_to_ini,
)
from sharedsteer.sim import PRESETS, preset
from sharedsteer.vehicle import VehicleParams


def test_defaults_build_the_design_problem():
    cfg = Config()
    spec = cfg.design_spec()
    assert spec.u_max == (15.0,) and spec.rho == 1.0
    assert spec.R == ((1.0 / 1200.0**2,),)
    assert len(spec.h_rows) == 8
    assert cfg.ts_model().r == 8


def test_ini_round_trip_is_bit_exact():
    cfg = Config(vehicle=dataclasses.replace(VehicleParams(), M=0.1 + 0.2),
                 design=DesignSettings(f_w_max=1 / 3, tau_1=2 / 7))
    back = loads_config(cfg.to_ini())
    assert back == cfg
    assert back.to_ini() == cfg.to_ini()


def test_layering_order(tmp_path, monkeypatch):
    a = tmp_path / "a.ini"
    a.write_text("[design]\nf_w_max = 300\ntau_1 = 0.2\n")
    b = tmp_path / "b.ini"
    b.write_text("[design]\ntau_1 = 0.4\n")
    cfg = load_config([a, b], ["design.u_max=9"])
    assert (cfg.design.f_w_max, cfg.design.tau_1, cfg.design.u_max) == (300.0, 0.4, 9.0)
    monkeypatch.setenv(ENV_VAR, str(a))
    assert load_config().design.f_w_max == 300.0
    assert load_config(use_env=False).design.f_w_max == 1200.0
    assert load_config([b]).design.f_w_max == 1200.0


@pytest.mark.parametrize("text", [
    "[design]\nwind = 3\n",
    "[colour]\nx = 1\n",
    "[design]\nf_w_max = lots\n",
    "[design]\nf_w_max = 0\n",
    "not an ini file",
])
def test_bad_configuration(text):
    with pytest.raises(ConfigError):
        loads_config(text).design_spec()


def test_bad_override_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config([], ["design_u_max=3"], use_env=False)
    missing = tmp_path / "nope.ini"
    with pytest.raises(FileNotFoundError, match="nope.ini"):
        load_config([missing])


def test_invalid_physical_value_is_a_config_error():
    with pytest.raises(ConfigError):
        loads_config("[vehicle]\nM = -1\n")


@pytest.mark.parametrize("name", PRESETS)
def test_scenario_round_trip(name, tmp_path):
    sc = preset(name)
    path = tmp_path / "s.ini"
    path.write_text(scenario_to_ini(sc))
    assert load_scenario(path) == sc


def test_scenario_errors():
    with pytest.raises(ConfigError):
        loads_scenario("[scenario]\nname = x\n")
    with pytest.raises(ConfigError):
        loads_scenario("[scenario]\nduration = 1\n[profiles]\ngusts = hold: 0 1\n")
    with pytest.raises(ConfigError):
        loads_scenario("[scenario]\nduration = 1\ndt = 0.5\n")
