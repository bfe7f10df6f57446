import hashlib
import json
import math
import subprocess
import sys

import mpmath
import pytest

from hylcycles.cli import fmt, main, parse_grid, ConfigError
from hylcycles.variational import beta_t


def run(argv, capsys):
    code = main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def csv_rows(text):
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    assert lines[0] == "schema=1"
    header = lines[1].split(",")
    return [dict(zip(header, l.split(","))) for l in lines[2:]]


def test_parse_grid():
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("2") == [2.0]
    with pytest.raises(ConfigError):
        parse_grid("1:0:3")
    with pytest.raises(ConfigError):
        parse_grid("0:1")


def test_fmt():
    assert fmt(math.inf, 8) == "inf"
    assert fmt(0.125, 6) == "0.125"
    assert fmt(1 / 3, 6) == "0.333333"
    assert fmt("coexistence", 6) == "coexistence"


def test_bose_both_routes(capsys):
    code, out, _ = run(["bose", "--n", "1.5", "--u", "-0.01"], capsys)
    assert code == 0
    row = csv_rows(out)[0]
    assert abs(float(row["series"]) - float(row["expansion"])) <= 1e-8
    assert float(row["discrepancy"]) <= 1e-8


def test_bose_divergent_exit(capsys):
    code, _, err = run(["bose", "--n", "1", "--u", "0"], capsys)
    assert code == 3
    assert "divergent" in err


def test_bose_zeta(capsys):
    code, out, _ = run(["bose", "--n", "2.5", "--u", "0", "--precision", "15"], capsys)
    assert code == 0
    assert float(csv_rows(out)[0]["value"]) == pytest.approx(float(mpmath.zeta(2.5)), rel=1e-14)


def test_config_errors(capsys):
    assert run(["transitions", "--d", "3", "--beta", "1", "--a", "0.5", "--b", "1"], capsys)[0] == 2
    assert run(["transitions", "--d", "3", "--a", "1", "--b", "0.5"], capsys)[0] == 2
    assert run(["pressure", "--d", "3", "--beta", "1", "--a", "1", "--b", "0.5", "--mu-grid", "1:0:3"], capsys)[0] == 2
    assert run(["bose", "--n", "1", "--u", "0", "--precision", "30"], capsys)[0] == 2
    assert run(["transitions", "--config", "/nonexistent.json"], capsys)[0] == 2


def test_negative_values_parse(capsys):
    code, out, _ = run(["pressure", "--d", "3", "--beta", "1", "--a", "1", "--b", "0.5",
                        "--mu-grid", "-0.5:0.5:3"], capsys)
    assert code == 0
    assert [float(r["mu"]) for r in csv_rows(out)] == [-0.5, 0.0, 0.5]


def test_csv_footer_hash(capsys):
    code, out, _ = run(["transitions", "--d", "3", "--beta", "1", "--a", "1", "--b", "0.5", "--kappa", "0.1"], capsys)
    assert code == 0
    body = "".join(l + "\n" for l in out.splitlines() if not l.startswith("#"))
    footer = [l for l in out.splitlines() if l.startswith("# content-sha256:")][0]
    assert footer.split()[-1] == hashlib.sha256(body.encode()).hexdigest()
    params = json.loads([l for l in out.splitlines() if l.startswith("# params:")][0][len("# params: "):])
    assert params["kappa"] == "0.1" and params["d"] == 3


def test_transitions_examples(capsys):
    code, out, _ = run(["transitions", "--d", "2", "--beta", "1.3", "--a", "1", "--b", "0.4"], capsys)
    row = csv_rows(out)[0]
    assert float(row["mu_t_rel_diff"]) <= 1e-8
    bt = beta_t(5, 1.0, 0.5)
    code, out, _ = run(["transitions", "--d", "5", "--beta", repr(2 * bt), "--a", "1", "--b", "0.5",
                        "--precision", "17"], capsys)
    row = csv_rows(out)[0]
    assert row["beta_t_reached"] == "true"
    assert float(row["mu_t"]) == pytest.approx(float(row["mu_c"]), rel=1e-8)
    code, out, _ = run(["transitions", "--d", "3", "--beta", "1", "--a", "1", "--b", "0.5", "--kappa", "0.1"], capsys)
    row = csv_rows(out)[0]
    assert row["mu_r_check"] == "PASS"
    assert row["mu_r"] == row["mu_r_closed_form"]


def test_transitions_mean_field_notice(capsys):
    code, out, _ = run(["transitions", "--d", "3", "--beta", "1", "--a", "1", "--b", "0"], capsys)
    assert code == 0
    assert "mean-field" in csv_rows(out)[0]["notice"]


def test_phase_diagram_examples(capsys):
    bt = beta_t(5, 1.0, 0.5)
    grid = f"{bt / 2}:{2 * bt}:7"
    code, out, _ = run(["phase-diagram", "--d", "5", "--beta-grid", grid, "--mu", "0.01", "--a", "1",
                        "--b", "0.5", "--precision", "17"], capsys)
    assert code == 0
    rows = csv_rows(out)
    eq = [abs(float(r["mu_t"]) - float(r["mu_c"])) <= 1e-10 * float(r["mu_c"]) for r in rows]
    # flips exactly once, within one grid step of beta_t
    flip = eq.index(True)
    assert all(eq[flip:]) and not any(eq[:flip])
    assert float(rows[flip - 1]["beta"]) < bt <= float(rows[flip]["beta"])
    code, out, _ = run(["phase-diagram", "--d", "3", "--beta-grid", "0.5:2:4", "--mu", "0", "--a", "1",
                        "--b", "0.5"], capsys)
    for r in csv_rows(out):
        assert float(r["mu_t"]) < float(r["mu_star"]) < float(r["mu_c"])
    code, out, _ = run(["phase-diagram", "--d", "1", "--beta-grid", "0.5:2:4", "--mu", "0", "--a", "1",
                        "--b", "0.5"], capsys)
    for r in csv_rows(out):
        assert r["mu_c"] == "inf" and math.isfinite(float(r["mu_t"]))


def test_phase_diagram_partial_rows(capsys):
    # every kappa=inf row resolves without error
    code, out, _ = run(["phase-diagram", "--d", "3", "--beta", "1", "--mu-grid", "0:0.1:3", "--a", "1",
                        "--b", "0.5", "--kappa", "inf"], capsys)
    assert code == 0
    assert all(r["error"] == "" for r in csv_rows(out))


def test_json_roundtrip_and_determinism(tmp_path, capsys):
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    args = ["phase-diagram", "--d", "3", "--beta-grid", "0.5:1.5:3", "--mu-grid", "0:0.1:3", "--a", "1",
            "--b", "0.5", "--kappa", "0.1", "--format", "json", "--precision", "10"]
    assert main(args + ["--out", str(p1)]) == 0
    assert main(["phase-diagram", "--config", str(p1), "--out", str(p2)]) == 0
    assert p1.read_bytes() == p2.read_bytes()
    doc = json.loads(p1.read_text())
    assert doc["schema"] == 1 and len(doc["rows"]) == 9
    assert doc["config"]["kappa"] == "0.1"
    p3 = tmp_path / "c.json"
    assert main(args + ["--out", str(p3)]) == 0
    assert p3.read_bytes() == p1.read_bytes()


def test_simulate_zero_tilt_and_exact(capsys):
    code, out, _ = run(["simulate", "--d", "1", "--beta", "1", "--alpha", "-3", "--a", "0", "--b", "0",
                        "--mu", "-3", "--volumes", "2,4", "--steps", "300000", "--seed", "3"], capsys)
    assert code == 0
    assert all(r["reference_check"] == "PASS" for r in csv_rows(out))
    code, out, _ = run(["simulate", "--d", "1", "--beta", "1", "--alpha", "-3", "--a", "1", "--b", "0.5",
                        "--mu", "0.6", "--kappa", "0.5", "--volumes", "4", "--k-max", "6", "--count-cap", "3",
                        "--exact", "--steps", "400000", "--seed", "5"], capsys)
    assert code == 0
    row = csv_rows(out)[0]
    assert row["exact_check"] == "PASS"
    assert row["target_phase"] in ("subcritical", "coexistence", "intermediate", "supercritical")


def test_simulate_partial_failure(capsys):
    # k_max = 2 violates the tail bound for the larger volume only
    code, out, err = run(["simulate", "--d", "1", "--beta", "1", "--alpha", "-6", "--a", "1", "--b", "0.5",
                          "--mu", "0.1", "--volumes", "1,1e6", "--k-max", "3", "--steps", "20000"], capsys)
    assert code == 4
    rows = csv_rows(out)
    assert rows[0]["error"] == "" and "TailMassError" in rows[1]["error"]


def test_simulate_needs_negative_alpha(capsys):
    assert run(["simulate", "--d", "1", "--beta", "1", "--alpha", "0", "--a", "1", "--b", "0.5",
                "--mu", "0.1", "--volumes", "2"], capsys)[0] == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "hylcycles", "bose", "--n", "2", "--u", "-1", "--format", "json"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    doc = json.loads(out.stdout)
    assert doc["rows"][0]["value"] == pytest.approx(float(mpmath.polylog(2, math.exp(-1))), rel=1e-11)
