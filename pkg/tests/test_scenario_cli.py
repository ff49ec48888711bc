import csv
import json
from pathlib import Path

import numpy as np
import pytest

from gbdt.cli import main, parse_grid
from gbdt.errors import InvalidTripleError, ScenarioError
from gbdt.scenario import (
    emit_scenario,
    load_scenario,
    loads_scenario,
    parse_scenario,
    scenario_to_dict,
)

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def scalar_raw():
    return json.loads((SCENARIOS / "scalar_desk.json").read_text())


def write(tmp_path, raw, name="scen.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def read_samples(path):
    lines = Path(path).read_text().splitlines()
    footer = lines[-1]
    rows = list(csv.reader(lines[:-1]))
    return rows[0], rows[1:], footer


# -- scenario parsing -------------------------------------------------------------

def test_parse_scalar_file():
    scen = parse_scenario(SCENARIOS / "scalar_desk.json")
    assert scen.triple.n == scen.triple.m == scen.triple.r == 1
    assert scen.triple.A[0, 0] == 1j and scen.step == pytest.approx(1e-3)
    assert scen.box.grid == (64,)


def test_round_trip_preserves_digest():
    for path in SCENARIOS.glob("*.json"):
        scen = load_scenario(path)
        again = loads_scenario(emit_scenario(scen))
        assert again.digest() == scen.digest()
        assert scenario_to_dict(again) == scenario_to_dict(scen)


def test_digest_changes_with_content():
    raw = scalar_raw()
    a = loads_scenario(json.dumps(raw)).digest()
    raw["seed"] = 1
    assert loads_scenario(json.dumps(raw)).digest() != a


def test_duplicate_points_rejected_on_parse(tmp_path):
    raw = scalar_raw()
    raw["triple"]["explicit"]["c"] = [0.0, 0.0]
    raw["family"]["matrices"] *= 2
    raw.pop("box")
    with pytest.raises(InvalidTripleError) as info:
        parse_scenario(write(tmp_path, raw))
    assert info.value.condition == "distinct"


def test_example1_with_empty_second_block():
    raw = json.loads((SCENARIOS / "example1.json").read_text())
    raw["triple"]["example1"]["theta2"] = None
    scen = loads_scenario(json.dumps(raw))
    c1, c2 = scen.closed_form.sylvester_solutions
    assert not np.any(c2)
    assert np.array_equal(scen.triple.S0, c1 + c2)
    assert scen.family.payload == {"m1": 2, "m2": 0}


def test_example_family_must_match(tmp_path):
    raw = json.loads((SCENARIOS / "example1.json").read_text())
    raw["family"] = {"kind": "ConstantSignature", "m1": 1, "m2": 2}
    with pytest.raises(ScenarioError):
        loads_scenario(json.dumps(raw))


@pytest.mark.parametrize("mutate,fragment", [
    (lambda r: r.pop("time"), "time"),
    (lambda r: r["time"].update(steps=5), "steps"),
    (lambda r: r["time"].update(t_end=0), "t_end"),
    (lambda r: r.update(extra=1), "unknown"),
    (lambda r: r["triple"]["explicit"].update(A=[[1, 2]]), "square"),
    (lambda r: r["triple"]["explicit"].update(A=[[[0, 1, 2]]]), "triple.explicit.A[0][0]"),
    (lambda r: r.update(tolerances={"nope": 1}), "tolerances"),
    (lambda r: r.update(box={"bounds": [[0, 1], [0, 1]], "grid": [4, 4]}), "box"),
    (lambda r: r.update(h_vector=[1, 2]), "h_vector"),
    (lambda r: r["family"].update(kind="Other"), "family.kind"),
])
def test_structural_errors_name_the_field(mutate, fragment):
    raw = scalar_raw()
    mutate(raw)
    with pytest.raises(ScenarioError) as info:
        loads_scenario(json.dumps(raw))
    assert fragment in str(info.value)


def test_json_error_reports_position():
    with pytest.raises(ScenarioError) as info:
        loads_scenario('{"triple":\n  [}', "bad.json")
    assert str(info.value).startswith("bad.json:2:")


def test_parse_grid():
    axes = parse_grid("0:1:3", 2)
    assert len(axes) == 2 and np.allclose(axes[0], [0, 0.5, 1])
    with pytest.raises(ValueError):
        parse_grid("0:1", 1)
    with pytest.raises(ValueError):
        parse_grid("0:1:3,0:1:3", 3)


# -- command line ---------------------------------------------------------------------

def test_validate_command(capsys):
    assert main(["validate", "--scenario", str(SCENARIOS / "scalar_desk.json")]) == 0
    assert "valid" in capsys.readouterr().out


def test_validate_reports_condition(tmp_path, capsys):
    raw = scalar_raw()
    raw["triple"]["explicit"]["S0"] = [[[0.51, 0]]]
    out = tmp_path / "out"
    assert main(["validate", "--scenario", write(tmp_path, raw), "--out", str(out)]) == 1
    assert "[identity]" in capsys.readouterr().err
    payload = json.loads((out / "validation.json").read_text())
    assert payload["problems"][0]["condition"] == "identity"


def test_missing_file_is_input_error(tmp_path, capsys):
    assert main(["verify", "--scenario", str(tmp_path / "none.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_tolerance_name_is_input_error(capsys):
    code = main(["verify", "--scenario", str(SCENARIOS / "scalar_desk.json"),
                 "--tol", "bogus=1"])
    assert code == 2


def test_verify_scalar(tmp_path, capsys):
    assert main(["verify", "--scenario", str(SCENARIOS / "scalar_desk.json"),
                 "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["verdict"] == "pass" and len(report["checks"]) == 10
    assert all(c["verdict"] == "pass" for c in report["checks"])
    assert report["scenario_digest"] == load_scenario(SCENARIOS / "scalar_desk.json").digest()


def test_verify_tolerance_override_fails(tmp_path, capsys):
    code = main(["verify", "--scenario", str(SCENARIOS / "scalar_desk.json"),
                 "--out", str(tmp_path), "--tol", "pde=1e-12"])
    assert code == 1
    report = json.loads((tmp_path / "report.json").read_text())
    assert {c["name"]: c["verdict"] for c in report["checks"]}["pde"] == "fail"


def test_verify_perturbed_s0_names_identity(tmp_path, capsys):
    raw = scalar_raw()
    raw["triple"]["explicit"]["S0"] = [[[0.5 + 1e-2, 0]]]
    code = main(["verify", "--scenario", write(tmp_path, raw), "--out", str(tmp_path)])
    assert code != 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert [c["name"] for c in report["checks"]] == ["validation:identity"]
    assert "validation:identity" in capsys.readouterr().out


def test_verify_example2(tmp_path, capsys):
    assert main(["verify", "--scenario", str(SCENARIOS / "example2.json"),
                 "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    ratios = {c["name"]: c["convergence_ratio"] for c in report["checks"]}
    for name in ("pde", "pde_c8", "conservation", "energy_box"):
        assert 3.5 <= ratios[name] <= 4.5


def test_evolve_writes_trajectory(tmp_path, capsys):
    assert main(["evolve", "--scenario", str(SCENARIOS / "scalar_desk.json"),
                 "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "trajectory.csv").open()))
    assert len(rows) == 1001
    assert float(rows[-1]["pi_norm"]) == pytest.approx(np.exp(-1), abs=1e-10)
    data = json.loads((tmp_path / "trajectory.json").read_text())
    assert data["states"][-1]["S"][0][0][0] == pytest.approx(np.exp(-2) / 2, abs=1e-10)


def test_evolve_refuses_invalid(tmp_path, capsys):
    raw = scalar_raw()
    raw["triple"]["explicit"]["S0"] = [[[0.6, 0]]]
    assert main(["evolve", "--scenario", write(tmp_path, raw), "--out", str(tmp_path)]) == 1
    assert not (tmp_path / "trajectory.csv").exists()


def test_transform_scalar(tmp_path, capsys):
    assert main(["transform", "--scenario", str(SCENARIOS / "scalar_desk.json"),
                 "--out", str(tmp_path), "--t", "0,0.5,1"]) == 0
    records = json.loads((tmp_path / "transform.json").read_text())["records"]
    assert len(records) == 3
    for rec in records:
        assert rec["w"][0][0][0] == pytest.approx(-1, abs=1e-10)
        assert rec["H_tilde_eigenvalues"] == pytest.approx([1.0], abs=1e-10)


def test_sample_scalar_origin(tmp_path, capsys):
    assert main(["sample", "--scenario", str(SCENARIOS / "scalar_desk.json"),
                 "--out", str(tmp_path), "--t", "0", "--grid", "0:0:1"]) == 0
    header, rows, footer = read_samples(tmp_path / "samples.csv")
    assert header == ["t", "zeta_1", "i", "j", "re", "im"]
    assert len(rows) == 1
    assert float(rows[0][4]) == pytest.approx(2.0, abs=1e-14)
    assert footer == "# omitted_singular_times=0"


def test_sample_grid_rows(tmp_path, capsys):
    # r = 2 on a 3 x 3 grid, m x n = 2 x 4 entries per point
    assert main(["sample", "--scenario", str(SCENARIOS / "example2.json"),
                 "--out", str(tmp_path), "--t", "0,0.5", "--grid=-1:1:3"]) == 0
    header, rows, _ = read_samples(tmp_path / "samples.csv")
    assert header[:3] == ["t", "zeta_1", "zeta_2"]
    assert len(rows) == 2 * 9 * 2 * 4
    points = {(r[0], r[1], r[2]) for r in rows}
    assert len(points) == 2 * 9


def test_sample_zero_eigenfunction(tmp_path, capsys):
    raw = scalar_raw()
    raw["triple"]["explicit"] = {"A": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]],
                                 "S0": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]],
                                 "Pi0": [[[0, 0]], [[0, 0]]], "c": [2.0]}
    raw.pop("box")
    raw.pop("h_vector")
    assert main(["sample", "--scenario", write(tmp_path, raw), "--out", str(tmp_path),
                 "--t", "0,1"]) == 0
    _, rows, _ = read_samples(tmp_path / "samples.csv")
    assert len(rows) == 2 * 5 * 2
    assert all(float(r[4]) == 0.0 and float(r[5]) == 0.0 for r in rows)


def test_sample_skips_singular_times(tmp_path, capsys):
    # Pi0 = 0 keeps S(t) = S0 = diag(1, 0), which meets the identity but is singular
    raw = scalar_raw()
    raw["triple"]["explicit"] = {"A": [[[1, 0], [0, 0]], [[0, 0], [2, 0]]],
                                 "S0": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]],
                                 "Pi0": [[[0, 0]], [[0, 0]]], "c": [3.0]}
    raw.pop("box")
    raw.pop("h_vector")
    assert main(["sample", "--scenario", write(tmp_path, raw), "--out", str(tmp_path),
                 "--t", "0,1"]) == 0
    _, rows, footer = read_samples(tmp_path / "samples.csv")
    assert rows == [] and footer == "# omitted_singular_times=2"
