import csv
import json

import numpy as np
import pytest

from choigram import channels as ch
from choigram.cli import figure_tables, load_config, main


def write_channel(path, chan):
    path.write_text(json.dumps(ch.channel_to_dict(chan)))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_channel_check_identity(tmp_path):
    src = write_channel(tmp_path / "id.json", ch.identity_channel(2))
    out = tmp_path / "report.json"
    assert main(["channel-check", src, "--output", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["cp_verdict"] is True
    assert rep["trace_J"] == pytest.approx(1.0)
    assert rep["trace_Omega"] == pytest.approx(0.5)
    assert rep["basis"] == "pauli"


def test_channel_check_transpose(tmp_path):
    src = write_channel(tmp_path / "t.json", ch.choi_from_superop(ch.transpose_map(2)))
    out = tmp_path / "report.json"
    assert main(["channel-check", src, "--basis", "weyl", "--output", str(out)]) == 2
    rep = json.loads(out.read_text())
    assert rep["cp_verdict"] is False
    assert rep["choi_min"] == pytest.approx(-0.25)
    assert rep["gram_min"] == pytest.approx(-1.0)


def test_channel_check_qutrit_kraus(tmp_path):
    src = write_channel(tmp_path / "k.json", ch.random_cp_channel(3, 2, 0))
    out = tmp_path / "r.csv"
    assert main(["channel-check", src, "--basis", "weyl", "--format", "csv", "--output", str(out)]) == 0
    assert read_csv(out)[0]["cp_verdict"] == "True"


def test_channel_check_errors(tmp_path, capsys):
    good = (tmp_path / "g.json")
    write_channel(good, ch.identity_channel(2))
    bad = tmp_path / "bad.json"
    bad.write_text(good.read_text()[:40])
    out = tmp_path / "never.json"
    assert main(["channel-check", str(bad), "--output", str(out)]) == 1
    assert not out.exists()
    assert "cannot parse" in capsys.readouterr().err
    src = write_channel(tmp_path / "half.json", 0.5 * ch.identity_channel(2))
    assert main(["channel-check", src, "--output", str(out)]) == 1
    assert not out.exists()
    q = write_channel(tmp_path / "q.json", ch.identity_channel(3))
    assert main(["channel-check", q, "--basis", "pauli", "--output", str(out)]) == 1


def test_make_channel_round_trip(tmp_path):
    out = tmp_path / "r.json"
    assert main(["make-channel", "random", "--dim", "2", "--rank", "3", "--seed", "5",
                 "--representation", "kraus", "--output", str(out)]) == 0
    chan = ch.channel_from_dict(json.loads(out.read_text()))
    want = ch.random_cp_channel(2, 3, 5)
    assert all(np.allclose(a, b) for a, b in zip(chan.kraus_ops, want.kraus_ops))
    assert main(["make-channel", "transpose", "--representation", "kraus", "--output", str(out)]) == 1


def test_scan_csv_columns_and_markovian_case(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"a": 0.0, "n_points": 21}))
    out = tmp_path / "scan.csv"
    assert main(["scan", "--config", str(cfg), "--output", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["t", "s", "r", "choi_min", "gram_min", "flag"]
    assert len(rows) == 21 * 22 // 2
    assert "violating pairs: 0 of 231" in capsys.readouterr().err


def test_scan_two_point_grid(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('n_points = 2\nt_max = 1.0\nmodel = "pure_dephasing"\n')
    out = tmp_path / "scan.csv"
    assert main(["scan", "--config", str(cfg), "--output", str(out)]) == 0
    assert len(read_csv(out)) == 3


def test_scan_default_violations_are_ratio_above_one(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_points": 61}))
    out = tmp_path / "scan.csv"
    assert main(["scan", "--config", str(cfg), "--output", str(out)]) == 0
    rows = read_csv(out)
    viol = [r for r in rows if float(r["gram_min"]) < -1e-10]
    assert viol
    assert all(float(r["r"]) > 1 + 1e-10 for r in viol)
    assert all(float(r["r"]) <= 1 + 1e-10 for r in rows if r not in viol)


def test_scan_json_format(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_points": 11}))
    out = tmp_path / "scan.json"
    assert main(["scan", "--config", str(cfg), "--format", "json", "--output", str(out)]) == 0
    body = json.loads(out.read_text())
    assert len(body["records"]) == 66
    assert body["config"]["n_points"] == 11


def test_scan_is_deterministic_across_threads(tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_points": 31}))
    outputs = []
    for threads in ("0", "1", "8"):
        monkeypatch.setenv("CHOIGRAM_THREADS", threads)
        out = tmp_path / f"scan{threads}.csv"
        assert main(["scan", "--config", str(cfg), "--output", str(out)]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_bad_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_points": 1}))
    assert main(["scan", "--config", str(cfg)]) == 1
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert main(["scan", "--config", str(cfg)]) == 1
    cfg.write_text(json.dumps({"model": "spin_boson"}))
    assert main(["scan", "--config", str(cfg)]) == 1
    assert main(["scan", "--config", str(tmp_path / "missing.json")]) == 1


def test_load_config_types(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("gamma0 = 1\nn_points = 5\nbasis = 'weyl'\n")
    c = load_config(cfg)
    assert isinstance(c.gamma0, float) and c.n_points == 5 and c.basis == "weyl"


def test_figures(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"step": 1e-3}))
    out = tmp_path / "figs"
    assert main(["figures", "--config", str(cfg), "--output", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert names == {"gamma.csv", "ratio.csv", "eigenvalues.csv", "trace_distance.csv",
                     "coherence.csv", "summary.json"}
    gam = read_csv(out / "gamma.csv")
    assert float(gam[0]["gamma"]) == pytest.approx(0.2 + 1.5)
    td = read_csv(out / "trace_distance.csv")
    assert float(td[0]["D_amplitude_damping"]) == 1.0
    eig = read_csv(out / "eigenvalues.csv")
    assert all((float(r["choi_min"]) < -1e-10) == (float(r["gram_min"]) < -1e-10) for r in eig)
    # gram_min sign changes sit within one grid step of the rate's sign changes
    summary = json.loads((out / "summary.json").read_text())
    step = 6 / 120
    neg_t = [float(r["t"]) for r in eig if float(r["gram_min"]) < -1e-10]
    (a, b), = summary["negative_rate_intervals"]
    assert abs(min(neg_t) - step - a) <= step and abs(max(neg_t) - b) <= step


def test_figures_are_deterministic():
    from choigram.cli import RunConfig

    cfg = RunConfig(n_points=31, step=0.01)
    assert figure_tables(cfg) == figure_tables(cfg)


def test_figures_needs_output_dir():
    assert main(["figures"]) == 1
