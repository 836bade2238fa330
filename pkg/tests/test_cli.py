import json

import pytest

from ldptrack.cli import main


def test_simulate_small(capsys, tmp_path):
    out = tmp_path / "sim.json"
    code = main(["simulate", "--n", "50", "--d", "8", "--k", "2", "--eps", "1.0",
                 "--beta", "0.1", "--reps", "2", "--seed", "3",
                 "--out", str(out)])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload) == {"spec", "gap", "bound", "regime_ok", "reps", "summary"}
    assert out.exists() and (tmp_path / "sim.csv").exists()


def test_simulate_all_algorithms(capsys):
    for algo in ("futurerand", "naive", "sample-one", "bns19"):
        code = main(["simulate", "--n", "30", "--d", "8", "--k", "2",
                     "--eps", "1.0", "--algo", algo, "--reps", "1"])
        assert code == 0
        capsys.readouterr()


def test_simulate_config_error_exit_code(capsys):
    code = main(["simulate", "--n", "50", "--d", "12", "--k", "2", "--eps", "1.0"])
    assert code == 2
    assert "configuration error" in capsys.readouterr().err
    code = main(["simulate", "--n", "50", "--d", "8", "--k", "2", "--eps", "1.5"])
    assert code == 2
    capsys.readouterr()


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--n", "50"])
    assert exc.value.code == 2


def test_gap_command(capsys):
    code = main(["gap", "--k", "4", "--eps", "1.0"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["lb"] == 0 and payload["ub"] == 1
    assert payload["gap"] == pytest.approx(0.036379932, rel=1e-6)
    code = main(["gap", "--k", "8", "--eps", "1.0", "--algo", "naive"])
    assert code == 0
    capsys.readouterr()


def test_audit_randomizer_command(capsys, tmp_path):
    out = tmp_path / "audit.json"
    code = main(["audit", "randomizer", "--k", "3", "--eps", "1.0",
                 "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["pass"] is True and payload["max_ratio"] > 1
    capsys.readouterr()


def test_audit_client_command(capsys):
    code = main(["audit", "client", "--d", "4", "--k", "2", "--eps", "1.0",
                 "--pairs", "5", "--seed", "1"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["pass"] is True


def test_dump_reports(tmp_path, capsys):
    reports = tmp_path / "reports.ndjson"
    code = main(["simulate", "--n", "20", "--d", "8", "--k", "2", "--eps", "1.0",
                 "--reps", "1", "--dump-reports", str(reports)])
    assert code == 0
    capsys.readouterr()
    from ldptrack.protocol import read_reports
    with reports.open() as fp:
        records = read_reports(fp)
    assert records and all(r.bit in (-1, 1) for r in records)


def test_scaling_command(capsys, tmp_path):
    out = tmp_path / "scaling.json"
    code = main(["scaling", "--k-grid", "2,4", "--n", "200", "--d", "8",
                 "--eps", "1.0", "--reps", "2", "--seed", "4",
                 "--algos", "futurerand,naive", "--out", str(out)])
    assert code == 0
    assert "log-log slope" in capsys.readouterr().out
    payload = json.loads(out.read_text())
    assert set(payload) == {"cells", "slopes"}
