import json

import pytest

from drmdp.cli import build_parser, main


def test_full_pipeline(tmp_path, capsys):
    inst = tmp_path / "hard.json"
    data = tmp_path / "d.jsonl"
    assert main(["gen-instance", "hard", "--d", "2", "--H", "3", "--rho", "0.5", "--xi-seed", "1", "--out", str(inst)]) == 0
    assert main(["collect", "--instance", str(inst), "--K", "64", "--seed", "3", "--out", str(data)]) == 0
    assert main(["solve-exact", "--instance", str(inst), "--out", str(tmp_path / "exact.json")]) == 0
    exact = json.loads((tmp_path / "exact.json").read_text())
    assert len(exact["V"]) == 3
    for alg in ("drpvi", "va", "modified_va"):
        out = tmp_path / f"{alg}.json"
        assert main(["run", "--instance", str(inst), "--data", str(data), "--algorithm", alg, "--beta", "0.5", "--out", str(out)]) == 0
        res = json.loads(out.read_text())
        assert res["algorithm"] == alg
        assert res["suboptimality_weighted"] >= 0
    assert main(["check", "--instance", str(inst), "--data", str(data)]) == 0
    text = capsys.readouterr().out
    assert "[PASS] worst-case rows inside the TV balls" in text
    assert "FAIL" not in text


def test_random_instance_and_sweep(tmp_path, capsys):
    inst = tmp_path / "r.json"
    assert main(["gen-instance", "random", "--S", "3", "--A", "2", "--H", "2", "--d", "2", "--rho", "0.2", "--out", str(inst)]) == 0
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("instance = r.json\nK_values = 8 16\nseeds = 2\nbeta = 0.1\n")
    assert main(["sweep", "--config", str(cfg), "--output-dir", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "sweep.csv").exists()
    assert "log-log slope" in capsys.readouterr().out


def test_errors_exit_two(tmp_path, capsys):
    assert main(["check", "--instance", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["check", "--instance", str(bad)]) == 2
    assert "missing keys" in capsys.readouterr().err
    assert main(["gen-instance", "hard", "--d", "4", "--K-for-delta", "2", "--out", str(tmp_path / "x.json")]) == 2


def test_sweep_help_lists_csv_columns(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["sweep", "--help"])
    assert "pessimism_violated" in capsys.readouterr().out
