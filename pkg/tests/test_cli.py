import csv
import io
import json
import math
import subprocess
import sys

import pytest

from stratcomm import __version__
from stratcomm.cli import main

PHI = (math.sqrt(5) - 1) / 2
HEADER = "R_bits,beta,sigma_s2,D_E,D_D,D_E_paper,D_D_paper,I_YW_bits"
SI_FLAGS = ["--r", "1", "--rho", "0.2", "--rho-xw", "0.4", "--rho-thetaw", "0.3", "--r-w", "1"]
MATCHED_FLAGS = ["--r", "1", "--rho", "0", "--rho-xw", str(-0.5 * PHI), "--rho-thetaw", "0.5", "--r-w", "1"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, (json.loads(out) if out.strip() else None), err


def test_equilibrium_fixture(capsys):
    code, doc, _ = run_json(capsys, "equilibrium", "--r", "1", "--rho", "0")
    assert code == 0
    assert doc["command"] == "equilibrium" and doc["version"] == __version__
    assert doc["config"]["model"] == {"r_theta": 1.0, "rho_xtheta": 0.0, "sigma_x2": 1.0}
    assert doc["result"]["closed_form"]["alpha"] == pytest.approx(0.6180340, abs=1e-7)
    assert doc["result"]["numeric"]["alpha"] == pytest.approx(0.6180340, abs=1e-6)
    assert doc["result"]["consistent"]


def test_equilibrium_degenerate_exit_3(capsys):
    code, out, err = run(capsys, "equilibrium", "--r", "1", "--rho", "1")
    assert code == 3
    assert "DegeneratePrivateInfo" in err


def test_equilibrium_si_with_uninformative_w(capsys):
    _, base, _ = run_json(capsys, "equilibrium", "--r", "1.3", "--rho", "0.2")
    code, si, _ = run_json(
        capsys, "equilibrium", "--si", "--r", "1.3", "--rho", "0.2", "--rho-xw", "0", "--rho-thetaw", "0", "--r-w", "1"
    )
    assert code == 0
    assert si["result"]["numeric"]["alpha"] == pytest.approx(base["result"]["numeric"]["alpha"], abs=1e-9)


def test_equilibrium_si_needs_fields(capsys):
    code, _, _ = run(capsys, "equilibrium", "--si", "--r", "1", "--rho", "0")
    assert code == 2


def test_missing_model_is_config_error(capsys):
    assert run(capsys, "equilibrium")[0] == 2


def test_bad_flag_value_is_config_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["equilibrium", "--r", "abc"])
    assert e.value.code == 2


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"model": {"sigma_x2": 2.0, "rho_xtheta": 0.0, "r_theta": 5.0}}))
    code, doc, _ = run_json(capsys, "equilibrium", "--config", str(cfg), "--r", "1")
    assert code == 0
    assert doc["config"]["model"]["r_theta"] == 1.0
    assert doc["result"]["closed_form"]["d_e"] == pytest.approx(2 * 0.3819660112501051, rel=1e-12)


@pytest.mark.parametrize(
    "doc",
    [
        {"model": {"sigma_x2": 1, "rho_xtheta": 0, "r_theta": 1}, "bogus": 1},
        {"model": {"sigma_x2": 1, "rho_xtheta": 0, "r_theta": 1, "extra": 2}},
        [1, 2],
    ],
)
def test_config_rejects_unknown_keys(tmp_path, capsys, doc):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(doc))
    assert run(capsys, "equilibrium", "--config", str(cfg))[0] == 2


def test_unreadable_config(tmp_path, capsys):
    assert run(capsys, "equilibrium", "--config", str(tmp_path / "missing.json"))[0] == 2


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_rd_curve_header_and_rows(capsys):
    code, out, _ = run(capsys, "rd-curve", "--r", "1", "--rho", "0", "--rates", "0,0.5,60")
    assert code == 0
    assert out.splitlines()[0] == HEADER
    rows = parse_csv(out)
    assert float(rows[0]["D_D"]) == 1.0
    assert float(rows[0]["D_E"]) == pytest.approx(2.0)
    assert float(rows[1]["D_D"]) == pytest.approx(0.6381966011250104, rel=1e-15)
    assert float(rows[2]["D_D"]) == pytest.approx(0.2763932022500210, rel=1e-9)
    assert rows[0]["I_YW_bits"] == "0"


def test_rd_curve_full_precision(capsys):
    _, out, _ = run(capsys, "rd-curve", "--r", "1", "--rho", "0", "--rates", "0.5")
    assert parse_csv(out)[0]["sigma_s2"] == format(1 + PHI**2, ".17g")


def test_rd_curve_si_zero_rate_row(capsys):
    code, out, _ = run(capsys, "rd-curve", "--si", *SI_FLAGS, "--rates", "0,1,3")
    assert code == 0
    rows = parse_csv(out)
    assert float(rows[0]["D_D"]) == pytest.approx(0.84)
    assert rows[0]["D_E_paper"] == "" and rows[0]["D_D_paper"] == ""
    # Observed: the Wyner-Ziv coefficient does not move with the rate.
    assert float(rows[1]["beta"]) == pytest.approx(float(rows[2]["beta"]), abs=1e-9)


def test_rd_curve_nats_relabels(capsys):
    _, out, _ = run(capsys, "rd-curve", "--r", "1", "--rho", "0", "--rates", "1", "--nats")
    assert out.splitlines()[0] == HEADER.replace("_bits", "_nats")
    assert float(parse_csv(out)[0]["R_nats"]) == pytest.approx(math.log(2))


def test_rd_curve_out_file(tmp_path, capsys):
    dest = tmp_path / "curve.csv"
    code, out, _ = run(capsys, "rd-curve", "--r", "1", "--rho", "0", "--rates", "1", "--out", str(dest))
    assert code == 0 and out == ""
    assert dest.read_text().splitlines()[0] == HEADER


def test_rd_curve_thread_invariant(capsys):
    a = run(capsys, "rd-curve", "--si", *SI_FLAGS, "--rates", "0.5,1", "--threads", "1")[1]
    b = run(capsys, "rd-curve", "--si", *SI_FLAGS, "--rates", "0.5,1", "--threads", "3")[1]
    assert a == b


def test_audit_match_pass(capsys):
    code, doc, err = run_json(capsys, "audit", "match", *MATCHED_FLAGS, "--pt", "1", "--sigma-n2", "1")
    assert code == 0
    assert doc["result"]["passed"] and doc["result"]["max_deviation"] < 1e-9
    assert "PASS" in err


def test_audit_match_fail_after_perturbation(capsys):
    flags = list(MATCHED_FLAGS)
    flags[flags.index("--rho-xw") + 1] = str(-0.5 * PHI + 0.05)
    code, doc, err = run_json(capsys, "audit", "match", *flags, "--pt", "1", "--sigma-n2", "1")
    assert code == 4
    assert not doc["result"]["passed"]
    assert 0.04 < doc["result"]["max_deviation"] < 0.07
    assert "FAIL" in err


def test_audit_match_needs_channel(capsys):
    assert run(capsys, "audit", "match", *MATCHED_FLAGS)[0] == 2


def test_audit_deviation_negative_control(capsys):
    code, doc, _ = run_json(capsys, "audit", "deviation", "--r", "1", "--rho", "0", "--alpha", "0", "--n", "200000")
    assert code == 4
    assert not doc["result"]["passed"]


def test_audit_deviation_default_alpha_passes(capsys):
    code, _, _ = run_json(capsys, "audit", "deviation", "--r", "1", "--rho", "0", "--n", "200000", "--grid=-0.2,0,0.2")
    assert code == 0


def test_audit_tx_si_and_rate_loss(capsys):
    assert run(capsys, "audit", "tx-si", *SI_FLAGS)[0] == 0
    assert run(capsys, "audit", "rate-loss", *SI_FLAGS, "--rate", "0.7", "--b-grid=-3,1")[0] == 0


def test_audit_optimality_matched(capsys):
    assert run(capsys, "audit", "optimality", *MATCHED_FLAGS, "--pt", "1", "--sigma-n2", "1")[0] == 0


def test_audit_formulas_reports(capsys):
    code, doc, _ = run_json(capsys, "audit", "formulas", "--r", "1", "--rho", "0", "--rates", "0,1")
    assert code == 0
    assert doc["result"]["details"]["large_rate_limits"][0]["d_d_limit_flagged"]


@pytest.mark.parametrize("name", ["theorem1", "goblick", "theorem5"])
def test_simulate_strategies(capsys, name):
    code, doc, _ = run_json(
        capsys, "simulate", "--r", "1", "--rho", "0", "--pt", "1", "--sigma-n2", "1", "--strategies", name, "--n", "200000"
    )
    assert code == 0
    res = doc["result"]
    for key in ("d_e", "d_d"):
        est = res[f"{key}_hat"]
        assert abs(est["mean"] - res["analytic"][key]) <= 5 * est["stderr"]


def test_simulate_seed_from_environment(capsys, monkeypatch):
    argv = ["simulate", "--r", "1", "--rho", "0", "--n", "1000"]
    monkeypatch.setenv("STRATCOMM_SEED", "9")
    _, a, _ = run_json(capsys, *argv)
    _, b, _ = run_json(capsys, *argv, "--seed", "9")
    assert a["result"]["seed"] == 9
    assert a["result"]["d_e_hat"] == b["result"]["d_e_hat"]


def test_simulate_custom(capsys):
    argv = ["simulate", "--r", "1", "--rho", "0", "--strategies", "custom", "--n", "1000"]
    assert run(capsys, *argv)[0] == 2
    code, doc, _ = run_json(capsys, *argv, "--enc-scale", "1", "--enc-alpha", "0", "--dec-y", "0")
    assert code == 0
    assert doc["result"]["analytic"]["d_d"] == pytest.approx(1.0)


def test_simulate_w_without_si_exit_3(capsys):
    argv = ["simulate", "--r", "1", "--rho", "0", "--strategies", "custom", "--n", "1000"]
    code, _, _ = run(capsys, *argv, "--enc-scale", "1", "--enc-alpha", "0", "--dec-y", "1", "--dec-w", "0.5")
    assert code == 3


def test_simulate_si_linear_needs_si(capsys):
    code, _, _ = run(capsys, "simulate", "--r", "1", "--rho", "0", "--pt", "1", "--sigma-n2", "1", "--strategies", "lemma3")
    assert code == 2


def test_match_construct(capsys):
    code, doc, _ = run_json(
        capsys, "match-construct", "--r", "1", "--rho", "0", "--rho-thetaw", "0.5", "--r-w", "1", "--pt", "1", "--sigma-n2", "1"
    )
    assert code == 0
    assert doc["result"]["model"]["rho_xw"] == pytest.approx(-0.5 * PHI, rel=1e-15)
    assert doc["result"]["matching"]["holds"]


def test_match_construct_pd_failure(capsys):
    code, _, err = run(
        capsys, "match-construct", "--r", "1", "--rho", "0", "--rho-thetaw", "0.9", "--r-w", "1", "--pt", "1", "--sigma-n2", "1"
    )
    assert code == 3
    assert "NotPositiveDefinite" in err


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "stratcomm.cli", "equilibrium", "--r", "1", "--rho", "0"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["closed_form"]["alpha"] == pytest.approx(PHI)
