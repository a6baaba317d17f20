import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eflab.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from eflab.report import render_json, run_scenario, to_json
from eflab.scenario import (
    ScenarioError,
    example_scenarios,
    parse_scenario,
    parse_scenario_text,
    scenario_to_toml,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_preset_fills_defaults():
    cfg = parse_scenario_text('schema_version = 1\nkind = "integrate"\npreset = "thomas_fermi"\n')
    assert cfg.equation.order == 2 and cfg.equation.lam == 1.5
    assert cfg.equation.phi_params == {"coefficient": 1.0, "sigma": -0.5}
    assert cfg.problem.init == (144.0, -432.0)
    assert cfg.controls.rtol == 1e-9


def test_verify_needs_superlinear():
    text = ('schema_version = 1\nkind = "verify"\npreset = "thomas_fermi"\n'
            '[equation]\nlambda = 0.5\n')
    with pytest.raises(ScenarioError, match=r"superlinear \(lambda > 1\) required for verify"):
        parse_scenario_text(text)


def test_singular_phi_at_origin_rejected():
    text = ('schema_version = 1\nkind = "integrate"\npreset = "thomas_fermi"\n'
            '[problem]\nt0 = 0.0\n')
    with pytest.raises(ScenarioError, match="singular phi at t0"):
        parse_scenario_text(text)


def test_all_problems_reported_with_paths():
    text = ('schema_version = 1\nkind = "integrate"\n'
            '[equation]\norder = 2\nlambda = nan\n[equation.phi]\ntag = "gaussian"\n'
            '[controls]\nrtol = -1.0\nbogus = 3\n')
    with pytest.raises(ScenarioError) as exc:
        parse_scenario_text(text)
    joined = "\n".join(exc.value.problems)
    for path in ("equation.lambda", "equation.phi.tag", "controls.rtol", "controls.bogus", "problem"):
        assert path in joined
    assert len(exc.value.problems) >= 5


def test_unsupported_schema_version():
    with pytest.raises(ScenarioError, match="schema_version"):
        parse_scenario_text('schema_version = 9\nkind = "corpus"\n')


def test_malformed_toml():
    with pytest.raises(ScenarioError):
        parse_scenario_text("kind = ")


@pytest.mark.parametrize("name", sorted(example_scenarios()))
def test_example_scenarios_round_trip(name):
    cfg = parse_scenario_text(example_scenarios()[name])
    assert parse_scenario_text(scenario_to_toml(cfg)) == cfg


@settings(max_examples=40, deadline=None)
@given(
    order=st.integers(1, 4),
    lam=st.floats(1.01, 5.0),
    sigma=st.floats(0.0, 3.0),
    coef=st.floats(0.1, 10.0),
    t_end=st.floats(2.0, 1e3),
    rtol=st.floats(1e-12, 1e-3),
    kind=st.sampled_from(["integrate", "verify", "scan", "classify"]),
)
def test_round_trip_property(order, lam, sigma, coef, t_end, rtol, kind):
    init = ", ".join(["0.5"] * order)
    text = (f'schema_version = 1\nkind = "{kind}"\nic_grid = [[{init}]]\n'
            f'[equation]\norder = {order}\nlambda = {lam!r}\n'
            f'[equation.phi]\ntag = "power"\ncoefficient = {coef!r}\nsigma = {sigma!r}\n'
            f'[problem]\nt0 = 1.0\nt_end = {t_end!r}\ninit = [{init}]\n'
            f'[controls]\nrtol = {rtol!r}\n[classifier]\nblock_count = 12\n')
    cfg = parse_scenario_text(text)
    assert parse_scenario_text(scenario_to_toml(cfg)) == cfg


def test_json_rendering_rules():
    text = to_json({"b": 0.1, "a": float("inf"), "c": [float("-inf"), 1, True, None]})
    assert text.index('"b"') < text.index('"a"')
    assert "0.10000000000000001" in text
    assert '"+inf"' in text and '"-inf"' in text
    json.loads(text)


def test_integrate_csv_export(tmp_path, capsys):
    out = tmp_path / "tf.csv"
    assert main(["integrate", "--preset", "thomas_fermi", "--format", "csv", "--out", str(out)]) == EXIT_OK
    lines = out.read_bytes().split(b"\r\n")
    assert lines[0] == b"t,y0,y1"
    assert lines[1] == b"1,144,-432"


def test_same_scenario_twice_is_byte_identical(tmp_path):
    p = write(tmp_path, "s.toml", example_scenarios()["scan_cubic_oscillator"])
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["scan", "--scenario", str(p), "--out", str(a), "--jobs", "1"]) == EXIT_OK
    assert main(["scan", "--scenario", str(p), "--out", str(b), "--jobs", "3"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    report = json.loads(a.read_text())
    assert len(report["results"]) == 9
    assert all(r["longterm"]["kind"] == "oscillatory" for r in report["results"])


def test_empty_scan_gives_empty_results(tmp_path, capsys):
    p = write(tmp_path, "e.toml", 'schema_version = 1\nkind = "scan"\npreset = "cubic_oscillator"\nic_grid = []\n')
    assert main(["scan", "--scenario", str(p)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["results"] == []


def test_classify_csv_of_cubic(tmp_path, capsys):
    t = np.geomspace(1, 1e4, 20000)
    data = write(tmp_path, "t3.csv", "time,value\n" + "\n".join(f"{float(a)!r},{float(a) ** 3!r}" for a in t))
    assert main(["classify", "--input", str(data)]) == EXIT_OK
    item = json.loads(capsys.readouterr().out)["results"][0]
    assert item["class"] == "S3"
    assert item["pi_hat"] == pytest.approx(3.0, abs=0.05)


def test_classify_oscillating_mix_flags_discrepancy(tmp_path, capsys):
    p = write(tmp_path, "m.toml", example_scenarios()["classify_oscillating_mix"])
    assert main(["classify", "--scenario", str(p)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["results"][0]["xi_hat"] == "+inf"
    assert report["notes"]


def test_verify_thomas_fermi_verdicts(capsys):
    assert main(["verify", "--preset", "thomas_fermi"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    clauses = {v["clause"]: v["status"] for v in report["results"][0]["verdicts"]}
    assert clauses == {"L2": "holds", "T3.vanishing": "holds", "T3.bound": "holds"}


def test_config_error_exit_code(tmp_path, capsys):
    p = write(tmp_path, "bad.toml", 'schema_version = 1\nkind = "verify"\npreset = "riccati"\n[equation]\nlambda = 0.5\n')
    assert main(["verify", "--scenario", str(p)]) == EXIT_CONFIG
    assert "superlinear" in capsys.readouterr().err


def test_kind_mismatch_is_config_error(tmp_path):
    p = write(tmp_path, "s.toml", example_scenarios()["integrate_thomas_fermi"])
    assert main(["scan", "--scenario", str(p)]) == EXIT_CONFIG


def test_missing_scenario_file_is_config_error(tmp_path):
    assert main(["integrate", "--scenario", str(tmp_path / "nope.toml")]) == EXIT_CONFIG


def test_failed_item_exit_code(tmp_path, capsys):
    # a step-size floor above the blow-up scale ends in a step failure
    p = write(tmp_path, "f.toml", 'schema_version = 1\nkind = "integrate"\npreset = "riccati"\n'
                                  '[controls]\nmin_step = 0.001\nblowup_threshold = 1e300\n')
    assert main(["integrate", "--scenario", str(p)]) == EXIT_FAIL


def test_overrides_apply(capsys):
    assert main(["integrate", "--preset", "thomas_fermi", "--t-end", "10", "--rtol", "1e-8"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["scenario"]["problem"]["t_end"] == 10
    assert report["scenario"]["controls"]["rtol"] == pytest.approx(1e-8)


def test_timing_only_on_request():
    cfg = parse_scenario_text(example_scenarios()["integrate_thomas_fermi"])
    assert "wall_time_s" not in render_json(run_scenario(cfg))
    assert "wall_time_s" in render_json(run_scenario(cfg, timing=True))


def test_parse_scenario_from_file(tmp_path):
    p = write(tmp_path, "c.toml", example_scenarios()["corpus"])
    assert parse_scenario(p).kind == "corpus"
