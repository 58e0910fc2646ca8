import json

import numpy as np
import pytest

from mbhts.cli import main
from mbhts.precoding import read_coupling_csv
from mbhts.scenario import load_params, read_channel_csv


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_kv(text):
    return dict(line.split(" = ", 1) for line in text.splitlines() if " = " in line)


def test_scenario_init_and_dump(tmp_path, capsys):
    cfg = tmp_path / "system.ini"
    assert run(capsys, "scenario", "init", "--out", cfg)[0] == 0
    assert load_params(cfg).n_users == 7
    out = tmp_path / "ch.csv"
    assert run(capsys, "scenario", "dump", "--config", cfg, "--seed", 5, "--out", out)[0] == 0
    assert read_channel_csv(out).amplitude.shape == (7, 7)


def test_precode_and_feasibility(tmp_path, capsys):
    ch, mu = tmp_path / "ch.csv", tmp_path / "mu.csv"
    run(capsys, "scenario", "dump", "--seed", 3, "--out", ch)
    assert run(capsys, "precode", "--method", "zf", "--channel", ch, "--out", mu)[0] == 0
    coupling = read_coupling_csv(mu)
    assert np.allclose(coupling - np.diag(np.diag(coupling)), 0, atol=1e-10 * coupling.max())
    code, out, _ = run(capsys, "feasibility", "--coupling", mu, "--xi", 500)
    kv = parse_kv(out)
    assert code == 0 and kv["feasible"] == "true"
    assert float(kv["spectral_radius"]) == pytest.approx(0.5, rel=1e-9)
    code, out, _ = run(capsys, "feasibility", "--coupling", mu, "--xi", 5000, "--json")
    report = json.loads(out)
    # ZF keeps the radius below one; only the budget fails
    assert report["feasible"] is False and report["spectral_radius"] < 1
    assert report["required_power"] > 217.27


def test_feasibility_wrong_demand_count(tmp_path, capsys):
    ch, mu = tmp_path / "ch.csv", tmp_path / "mu.csv"
    run(capsys, "scenario", "dump", "--out", ch)
    run(capsys, "precode", "--channel", ch, "--out", mu)
    code, _, err = run(capsys, "feasibility", "--coupling", mu, "--xi", "1,2")
    assert code == 2 and "demand" in err


def test_allocate_with_trace(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    code, out, _ = run(capsys, "allocate", "--method", "jointopt", "--precoder", "zf",
                       "--seed", 3, "--xi", 650, "--trace-csv", trace)
    kv = parse_kv(out)
    assert code == 0 and kv["method"] == "JointOpt"
    assert len(kv["powers_w"].split()) == 7
    rows = trace.read_text().splitlines()
    assert rows[0] == "n,n_satisfied,sum_rate_mbps"
    sizes = [int(r.split(",")[1]) for r in rows[1:]]
    assert sizes == sorted(sizes) and sizes[-1] == int(kv["n_satisfied"])


def test_allocate_from_channel_file(tmp_path, capsys):
    ch = tmp_path / "ch.csv"
    run(capsys, "scenario", "dump", "--seed", 8, "--out", ch)
    a = parse_kv(run(capsys, "allocate", "--channel", ch, "--method", "equal")[1])
    b = parse_kv(run(capsys, "allocate", "--seed", 8, "--method", "equal")[1])
    assert a["sum_rate_mbps"] == b["sum_rate_mbps"]


def test_train_predict_bench(tmp_path, capsys):
    model = tmp_path / "m.mlp"
    code, out, _ = run(capsys, "train", "--samples", 40, "--test", 10, "--epochs", 3, "--out", model)
    assert code == 0 and model.exists()
    code, out, _ = run(capsys, "predict", "--model", model, "--seed", 2)
    kv = parse_kv(out)
    assert code == 0 and kv["method"] == "Learned"
    assert float(kv["total_power_w"]) == pytest.approx(217.270118, abs=1e-6)
    res = tmp_path / "r.csv"
    code, _, err = run(capsys, "bench", "--trials", 3, "--xi", "250,500", "--precoder", "zf,rzf",
                       "--model", model, "--out", res)
    assert code == 0, err
    methods = {line.split(",")[0] for line in res.read_text().splitlines()[1:]}
    assert methods == {"JointOpt", "SatisSetOpt", "SumOpt", "EqualPower", "Learned"}


def test_bench_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(capsys, "bench", "--trials", 4, "--xi", "250,500", "--methods", "all",
                   "--precoder", "zf,rzf", "--seed", 7, "--out", path)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_bench_timing_flag(tmp_path, capsys):
    out = tmp_path / "t.csv"
    run(capsys, "bench", "--trials", 1, "--xi", 500, "--methods", "equal", "--timing", "--out", out)
    assert out.read_text().splitlines()[1].split(",")[6] != ""


def test_bench_unknown_method(tmp_path, capsys):
    code, _, err = run(capsys, "bench", "--trials", 1, "--methods", "magic", "--out", tmp_path / "x.csv")
    assert code == 2 and "unknown methods" in err


def test_bench_reports_invariant_violation(tmp_path, capsys, monkeypatch):
    import mbhts.harness as harness
    monkeypatch.setattr(harness, "check_invariants", lambda records, rows: ["made-up problem"])
    code, _, err = run(capsys, "bench", "--trials", 1, "--xi", 500, "--methods", "equal",
                       "--out", tmp_path / "x.csv")
    assert code == 1 and "made-up problem" in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, "allocate", "--config", tmp_path / "nope.ini")
    assert code == 2 and "cannot read" in err
