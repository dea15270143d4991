import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import CASES_5BUS
from fdilab import caseio
from fdilab.cli import main
from fdilab.errors import ParseError, ValidationError


# -- shipped file parsing ----------------------------------------------------------

def test_shipped_files_match_published_tables(net5, meters5, z5, market5):
    assert [(br.from_bus, br.to_bus, br.x_pu) for br in net5.branches] == [
        (1, 2, 0.03),
        (1, 3, 0.05),
        (2, 4, 0.05),
        (2, 5, 0.08),
        (3, 4, 0.05),
        (4, 5, 0.08),
    ]
    np.testing.assert_array_equal(z5, [0.91, -0.16, 0.19, 0.21, 0.89, 0.09])
    assert all(m.sigma == 0.01 for m in meters5.meters)
    assert [(g.bus, g.price, g.p_max) for g in market5.generators] == [
        (1, 10.0, 250.0),
        (3, 15.0, 300.0),
        (5, 30.0, 500.0),
    ]
    assert [(l.bus, l.mw) for l in market5.loads] == [
        (1, 100.0),
        (2, 100.0),
        (3, 200.0),
        (4, 40.0),
        (5, 60.0),
    ]


def test_empty_file_is_parse_error(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    with pytest.raises(ParseError, match="empty"):
        caseio.load_json(p)


def test_malformed_json_reports_location(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{"buses": [1, 2,\n')
    with pytest.raises(ParseError, match="line 2"):
        caseio.load_json(p)


def test_missing_field_is_parse_error(tmp_path):
    p = tmp_path / "net.json"
    p.write_text(json.dumps({"buses": [1, 2], "slack": 1}))
    with pytest.raises(ParseError, match="branches"):
        caseio.parse_network(p)


def test_branch_to_unknown_bus_names_the_branch(tmp_path):
    doc = json.loads((CASES_5BUS / "network.json").read_text())
    doc["branches"][2]["to"] = 9
    p = tmp_path / "net.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ValidationError, match="2-9"):
        caseio.parse_network(p)


def test_meter_on_missing_branch(tmp_path, net5):
    p = tmp_path / "meters.json"
    p.write_text(json.dumps({"meters": [{"branch": [1, 5], "sigma": 0.01}]}))
    with pytest.raises(ValidationError, match="meters\\[0\\]"):
        caseio.parse_meters(p, net5)


def test_attack_round_trip(tmp_path, h5):
    from fdilab.attack import random_constrained_attack

    atk = random_constrained_attack(h5, [0, 2, 3], seed=5)
    p = tmp_path / "attack.json"
    caseio.dump_attack(atk, p)
    loaded = caseio.parse_attack(p)
    np.testing.assert_allclose(loaded.a, atk.a, atol=1e-15)
    np.testing.assert_allclose(loaded.c, atk.c, atol=1e-15)
    assert loaded.support == atk.support


# -- CLI ----------------------------------------------------------------------------

def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_cli_estimate(capsys, tmp_path):
    out_csv = tmp_path / "est.csv"
    code, out, _ = run_cli(
        capsys,
        "estimate",
        "--case", CASES_5BUS / "network.json",
        "--meters", CASES_5BUS / "meters.json",
        "--measurements", CASES_5BUS / "measurements.json",
        "--out", out_csv,
    )
    assert code == 0
    assert "objective J = 0.131758" in out
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "stage,quantity,index,value"
    assert "estimation,state_rad,2,-0.027264" in lines


def test_cli_detect(capsys):
    code, out, _ = run_cli(
        capsys,
        "detect",
        "--case", CASES_5BUS / "network.json",
        "--meters", CASES_5BUS / "meters.json",
        "--measurements", CASES_5BUS / "measurements.json",
    )
    assert code == 0
    assert "chi_square" in out and "-> clean" in out


def test_cli_attack_random(capsys, tmp_path):
    out_json = tmp_path / "attack.json"
    code, out, _ = run_cli(
        capsys,
        "attack", "random",
        "--case", CASES_5BUS / "network.json",
        "--meters", CASES_5BUS / "meters.json",
        "--support", "0,2,3",
        "--seed", 7,
        "--out", out_json,
    )
    assert code == 0
    doc = json.loads(out_json.read_text())
    assert set(doc["support"]) <= {0, 2, 3}
    assert np.linalg.norm(doc["a"]) == pytest.approx(0.1, rel=1e-9)


def test_cli_attack_targeted(capsys):
    code, out, _ = run_cli(
        capsys,
        "attack", "targeted",
        "--case", CASES_5BUS / "network.json",
        "--meters", CASES_5BUS / "meters.json",
        "--pin", "3=0.03",
    )
    assert code == 0
    assert "c(bus 3) = 0.030000" in out
    assert "a[4] = 0.600000" in out


def test_cli_opf(capsys):
    code, out, _ = run_cli(
        capsys,
        "opf",
        "--case", CASES_5BUS / "network.json",
        "--market", CASES_5BUS / "market.json",
    )
    assert code == 0
    assert out.count("= 15.000000 $/MWh") == 5


def test_cli_scenario_and_reproducibility(capsys, tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    code1, text1, _ = run_cli(capsys, "scenario", "run", CASES_5BUS / "profit.json", "--out", out1)
    code2, text2, _ = run_cli(capsys, "scenario", "run", CASES_5BUS / "profit.json", "--out", out2)
    assert code1 == code2 == 0
    assert text1 == text2
    assert out1.read_bytes() == out2.read_bytes()
    assert "profit" in text1


def test_cli_montecarlo(capsys):
    code, out, _ = run_cli(
        capsys, "montecarlo", CASES_5BUS / "mc_clean.json", "--trials", 50, "--seed", 3
    )
    assert code == 0
    assert "detection rate" in out


def test_cli_missing_file_exits_2(capsys):
    code, _, err = run_cli(
        capsys,
        "estimate",
        "--case", "no/such/file.json",
        "--meters", CASES_5BUS / "meters.json",
        "--measurements", CASES_5BUS / "measurements.json",
    )
    assert code == 2
    assert err.startswith("error:")
    assert "\n" not in err.strip()


def test_cli_infeasible_exits_4(capsys, tmp_path):
    market = tmp_path / "market.json"
    market.write_text(
        json.dumps(
            {
                "generators": [{"bus": 1, "price": 10.0, "pmax": 10.0}],
                "loads": [{"bus": 1, "mw": 100.0}],
            }
        )
    )
    code, _, err = run_cli(
        capsys, "opf", "--case", CASES_5BUS / "network.json", "--market", market
    )
    assert code == 4
    assert "InfeasibleDispatch" in err


def test_cli_montecarlo_needs_simulation(capsys):
    code, _, err = run_cli(
        capsys, "montecarlo", CASES_5BUS / "case1.json", "--trials", 10
    )
    assert code == 2
    assert "ValidationError" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "fdilab", "opf",
         "--case", str(CASES_5BUS / "network.json"),
         "--market", str(CASES_5BUS / "market.json")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "lmp(bus 4) = 15.000000" in proc.stdout
