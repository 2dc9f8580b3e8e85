import json
import subprocess
import sys

import numpy as np
import pytest

from euafnet.cli import main
from euafnet.core import AffineLayer, FeedforwardNetwork, constant_network
from euafnet.serialize import save_network
from euafnet.width_bound import random_narrow_network


def run(*argv):
    return main([str(a) for a in argv])


def test_fit_success_writes_report(tmp_path, capsys):
    assert run("fit", "--target", "sin2pi", "--eps", "0.2", "--seed", "7", "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "fit-sin2pi-eps0.2.json").read_text())
    assert rec["sup_error"] < 0.2 and rec["seed"] == 7
    assert (tmp_path / "fit-sin2pi-eps0.2.csv").read_text().startswith("x,f,phi,abs_err\n")
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config"]["seed"] == 7 and man["config"]["budget"] == 200_000
    assert "met" in capsys.readouterr().out


def test_fit_constant(tmp_path):
    assert run("fit", "--target", "const0.3", "--eps", "0.01", "--out", tmp_path) == 0
    rec = json.loads((tmp_path / "fit-const0.3-eps0.01.json").read_text())
    assert rec["sup_error"] < 1e-9


def test_fit_infeasible_exits_2_with_best_effort(tmp_path, capsys):
    assert run("fit", "--target", "sin2pi", "--eps", "1e-9", "--out", tmp_path) == 2
    rec = json.loads((tmp_path / "fit-sin2pi-eps1e-09.json").read_text())
    assert rec["met"] is False and rec["sup_error"] > 1e-9
    assert "best achieved error" in capsys.readouterr().err


def test_usage_errors_exit_1(tmp_path):
    with pytest.raises(SystemExit) as info:
        run("fit", "--bogus")
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        run("fit", "--eps", "abc")
    assert info.value.code == 1
    assert run("fit", "--target", "nope", "--out", tmp_path) == 1
    assert run("fit", "--eps", "-0.1", "--out", tmp_path) == 1


def test_compose_count_line(tmp_path, capsys):
    assert run("compose", "--d", "2", "--eps", "0.5", "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert "1097 = 183×5 + 1 + 180 + 1" in out
    count = json.loads((tmp_path / "compose-synthetic-d2-eps0.5-count.json").read_text())
    assert count["count"]["total"] == 1097
    assert (tmp_path / "compose-synthetic-d2-eps0.5.csv").read_text().startswith("x1,x2,f,phi,abs_err\n")


def test_compose_d1(tmp_path, capsys):
    assert run("compose", "--d", "1", "--eps", "0.3", "--out", tmp_path) == 0
    assert capsys.readouterr().out.startswith("731 = ")


def test_compose_bad_lambda_is_config_error(tmp_path, capsys):
    assert run("compose", "--d", "2", "--lambda", "0.7,0.7", "--out", tmp_path) == 1
    assert "lambda" in capsys.readouterr().err
    assert run("compose", "--d", "2", "--lambda", "0.5", "--out", tmp_path) == 1


def test_witness_random(tmp_path):
    assert run("witness", "--d", "3", "--random", "100", "--out", tmp_path) == 0
    lines = (tmp_path / "gaps.csv").read_text().splitlines()
    assert lines[0] == "name,e0,e1,gap,floor,holds,status" and len(lines) == 101
    assert all(float(l.split(",")[3]) >= 0.5 for l in lines[1:])
    recs = json.loads((tmp_path / "witnesses.json").read_text())
    assert len(recs) == 100 and "x_tilde" in recs[0]["witness"]


def test_witness_directory_with_skip(tmp_path, capsys):
    nets = tmp_path / "nets"
    save_network(constant_network(0.0, 3, (2,)), nets / "a-zero.json")
    save_network(random_narrow_network(3, 2, np.random.default_rng(0)), nets / "b-random.json")
    wide = FeedforwardNetwork(3, (AffineLayer(np.ones((3, 3)), np.zeros(3)),
                                  AffineLayer(np.ones((1, 3)), [0.0], activated=False)))
    save_network(wide, nets / "c-wide.json")
    out = tmp_path / "out"
    assert run("witness", "--d", "3", "--nets", nets, "--out", out) == 0
    rows = (out / "gaps.csv").read_text().splitlines()
    zero = rows[1].split(",")
    assert zero[0] == "a-zero.json" and float(zero[3]) >= 1
    assert rows[3].startswith("c-wide.json") and rows[3].endswith("skipped")
    assert "c-wide.json: skipped" in capsys.readouterr().err


def test_witness_all_skipped_is_unmet(tmp_path):
    nets = tmp_path / "nets"
    save_network(constant_network(0.0, 2, (1,)), nets / "x.json")
    assert run("witness", "--d", "3", "--nets", nets, "--out", tmp_path / "o") == 2


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("EUAFNET_OUT", str(tmp_path / "env"))
    assert run("witness", "--d", "2", "--random", "3") == 0
    assert (tmp_path / "env" / "gaps.csv").exists()


def test_reruns_are_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run("fit", "--target", "abs_half", "--eps", "0.1,0.05", "--out", tmp_path / name) == 0
        assert run("witness", "--d", "3", "--random", "20", "--seed", "4", "--out", tmp_path / name / "w") == 0
    for rel in ("manifest.json", "fit-abs_half-eps0.05.csv", "fit-abs_half-eps0.1.json",
                "w/gaps.csv", "w/witnesses.json", "w/manifest.json"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_selftest_and_module_entry():
    assert run("selftest") == 0
    proc = subprocess.run([sys.executable, "-m", "euafnet.cli", "selftest"], capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS neuron_count" in proc.stdout
