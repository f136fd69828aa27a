"""Smoke tests for the python bindings: parse, run, capture, resume."""

import json
import os

import pytest

import fluxsim

MINI = {
    "name": "mini",
    "t_end": 0.05,
    "record_every": 16,
    "buses": ["gen1", "hv1"],
    "transformers": [{"id": "t1", "lv": "gen1", "hv": "hv1"}],
    "loads": [{"id": "ld1", "bus": "hv1", "p_mw": 120.0, "q_mvar": 30.0}],
    "wpgs": [
        {
            "name": "wpg1",
            "bus": "gen1",
            "transformer": "t1",
            "p_in_mw": 100.0,
            "lbfc": {"enabled": True},
        }
    ],
}


def mini_scenario():
    return fluxsim.parse_scenario(json.dumps(MINI))


def test_parse_and_fields():
    sc = mini_scenario()
    assert sc.name == "mini"
    assert sc.buses == ["gen1", "hv1"]
    assert sc.total_steps == 4800
    assert sc.dt == pytest.approx(1.0 / 96000.0)
    resolved = json.loads(sc.to_json())
    assert resolved["t_end"] == pytest.approx(0.05)
    assert resolved["wpgs"][0]["controller"] == "nfscm"


def test_validation_errors_surface_as_value_error():
    bad = dict(MINI, frobnicate=1)
    with pytest.raises(fluxsim.ConfigError) as err:
        fluxsim.parse_scenario(json.dumps(bad))
    assert "unknown key 'frobnicate'" in str(err.value)


def test_run_and_capture(tmp_path):
    sc = mini_scenario()
    eng = fluxsim.Engine(sc)
    eng.run()
    assert eng.step_index == eng.total_steps
    assert eng.time == pytest.approx(0.05)

    rows = eng.capture()
    assert len(rows) == eng.total_steps // 16 + 1
    names = eng.channel_names
    assert len(rows[0]) == len(names) + 1
    assert any(n.endswith("_v_dc") for n in names)

    csv_path = tmp_path / "capture.csv"
    eng.write_csv(str(csv_path))
    header = csv_path.read_text().splitlines()[0].split(",")
    assert header[0] == "t"
    assert header[1:] == list(names)

    summary = fluxsim.headline(eng)
    assert summary["steps"] == eng.total_steps
    assert summary["kcl_residual_max"] < 1e-6
    assert summary["units"][0]["v_dc_final"] > 0


def test_one_call_run(tmp_path):
    out = tmp_path / "run.csv"
    summary = fluxsim.run(mini_scenario(), csv_path=str(out))
    assert out.exists()
    assert summary["units"][0]["name"] == "wpg1"


def test_save_resume_matches_straight_run():
    sc = mini_scenario()
    full = fluxsim.Engine(sc)
    full.run()

    head = fluxsim.Engine(sc)
    for _ in range(2400):
        head.step()
    state = head.save_state()

    tail = fluxsim.Engine(sc)
    tail.load_state(state)
    while tail.step_index < tail.total_steps:
        tail.step()

    assert json.loads(full.save_state()) == json.loads(tail.save_state())


def test_scenario_file_round_trip(tmp_path):
    path = tmp_path / "mini.scn"
    path.write_text(json.dumps(MINI))
    sc = fluxsim.load_scenario(str(path))
    assert sc.name == "mini"
    with pytest.raises(fluxsim.ConfigError):
        fluxsim.load_scenario(str(tmp_path / "missing.scn"))


@pytest.mark.skipif(
    "FLUXSIM_SCENARIO_DIR" not in os.environ,
    reason="bundled scenario directory not provided",
)
def test_bundled_scenarios_validate():
    d = os.environ["FLUXSIM_SCENARIO_DIR"]
    names = sorted(f for f in os.listdir(d) if f.endswith(".scn"))
    assert names, "no bundled scenarios found"
    for f in names:
        sc = fluxsim.load_scenario(os.path.join(d, f))
        assert sc.total_steps > 0
