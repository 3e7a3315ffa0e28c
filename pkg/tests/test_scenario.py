import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mec_ppo.scenario import (IntermediateModel, ProgramSpec, ScenarioError, ScenarioParams,
                              channel_gain, fit_intermediate_model, generate_scenario,
                              grid_positions, intermediate_size, load_scenario, read_scenario,
                              save_scenario, to_si, write_scenario)


def test_generate_shape_and_positivity():
    sc = generate_scenario(7, 2, 4)
    assert sc.gain_matrix.shape == (2, 4)
    assert np.all(sc.gain_matrix > 0)
    assert sc.n_servers == 2 and sc.n_ues == 4


def test_generate_is_deterministic():
    assert generate_scenario(7, 2, 4) == generate_scenario(7, 2, 4)
    assert generate_scenario(7, 2, 4) != generate_scenario(8, 2, 4)


def test_generate_uses_defaults():
    sc = generate_scenario(1, 3, 5)
    for u in sc.ues:
        assert u.program.data_size == 200e6
        assert u.program.intensity == 2e3
        assert 0.1 <= u.max_power <= 0.25
        assert 1.2e9 <= u.compute_speed <= 4e9
        assert u.energy_budget == 4.0
    for s in sc.servers:
        assert 500e9 <= s.compute_speed <= 650e9
    assert sc.bandwidth == 20e6 and sc.noise_density == 1e-20


def test_channel_gain_at_ten_metres():
    assert channel_gain(1.0, 10.0) == pytest.approx(1e-3, rel=1e-12)


def test_channel_gain_clamps_short_distance():
    assert channel_gain(2.0, 0.0) == 2.0


def test_grid_positions_inside_area():
    pts = grid_positions(5, 100.0)
    assert len(pts) == 5
    assert len(set(pts)) == 5
    assert all(0 < x < 100 and 0 < y < 100 for x, y in pts)


def test_fit_five_sample_points():
    # (d_off, s) pairs read off the sample plot
    m = fit_intermediate_model([(15, 6), (10, 5), (6, 4), (3, 3), (1, 2)])
    assert m.k == pytest.approx(0.2778, abs=1e-3)
    assert m.b == pytest.approx(2.0556, abs=1e-3)
    # closed form: k = 35/126, b = 4 - 7k
    assert m.k == pytest.approx(35 / 126, rel=1e-12)
    assert m.b == pytest.approx(4 - 7 * 35 / 126, rel=1e-12)


def test_fit_flat_line():
    m = fit_intermediate_model([(0, 3.5), (1, 3.5)])
    assert m.k == 0 and m.b == pytest.approx(3.5)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=12, unique=True))
def test_fit_recovers_exact_line(xs):
    m = fit_intermediate_model([(x, 2 * x + 3) for x in xs])
    assert m.k == pytest.approx(2.0, rel=1e-9)
    assert m.b == pytest.approx(3.0, abs=1e-6)


def test_fit_rejects_degenerate_points():
    with pytest.raises(ValueError):
        fit_intermediate_model([(1, 2), (1, 3)])
    with pytest.raises(ValueError):
        fit_intermediate_model([(1, 2)])


def test_intermediate_size_examples():
    assert intermediate_size(IntermediateModel(0.001, 1.5e6), 100e6) == pytest.approx(1.6e6)
    assert intermediate_size(IntermediateModel(0.0, 1.5e6), 37e6) == 1.5e6
    assert intermediate_size(IntermediateModel(0.2778, 2.0556), 10) == pytest.approx(4.8336)
    assert intermediate_size(ProgramSpec(1.0, 1.0, 0.5, 1.0), 2.0) == 2.0
    with pytest.raises(ValueError):
        intermediate_size(IntermediateModel(0.1, 1.0), -1.0)


def test_unit_records():
    assert to_si({"value": 200, "unit": "Mb"}) == 2e8
    assert to_si({"value": 20, "unit": "MHz"}) == 2e7
    assert to_si({"value": 2, "unit": "GHz/Mb"}) == 2e3
    assert to_si(0.2) == 0.2
    with pytest.raises(ScenarioError):
        to_si({"value": 1, "unit": "furlongs"})
    with pytest.raises(ScenarioError):
        to_si("12")


def test_save_load_round_trip(tmp_path):
    sc = generate_scenario(3, 2, 5)
    assert load_scenario(save_scenario(sc)) == sc
    path = tmp_path / "sc.json"
    write_scenario(sc, path)
    assert read_scenario(path) == sc
    assert json.loads(path.read_text())["system"]["seed"] == 3


def test_load_converts_units():
    doc = save_scenario(generate_scenario(0, 1, 1))
    doc["ues"][0]["program"]["data_size"] = {"value": 200, "unit": "Mb"}
    doc["system"]["bandwidth"] = {"value": 10, "unit": "MHz"}
    sc = load_scenario(doc)
    assert sc.ues[0].program.data_size == 2e8
    assert sc.bandwidth == 1e7


def test_load_rejects_missing_gains():
    doc = save_scenario(generate_scenario(0, 1, 2))
    del doc["gains"]
    with pytest.raises(ScenarioError, match="gains"):
        load_scenario(doc)


def test_load_rejects_bad_gain_shape():
    doc = save_scenario(generate_scenario(0, 2, 2))
    doc["gains"] = doc["gains"][:1]
    with pytest.raises(ScenarioError):
        load_scenario(doc)


def test_params_reject_unknown_field():
    with pytest.raises(ScenarioError):
        ScenarioParams().updated(colour="red")


def test_with_access_switches_mode_only():
    sc = generate_scenario(0, 2, 3)
    t = sc.with_access("tdma")
    assert t.access_mode == "tdma" and t.gains == sc.gains
    with pytest.raises(ScenarioError):
        sc.with_access("cdma")


def test_preset_server_positions():
    p = ScenarioParams().updated(server_positions=((10.0, 10.0), (90.0, 90.0)))
    sc = generate_scenario(0, 2, 3, p)
    assert sc.servers[1].position == (90.0, 90.0)
    with pytest.raises(ScenarioError):
        generate_scenario(0, 3, 3, p)
