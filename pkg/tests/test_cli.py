import csv
import io
import json

import numpy as np
import pytest

from carrier_sim import cli
from carrier_sim import densekernel as dk
from carrier_sim.densekernel import X, ConsistencyError
from carrier_sim.protocol import ProtocolConfig


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_simulate_noiseless(capsys):
    code, out, _ = run(capsys, "simulate", "--rounds", "4")
    assert code == 0
    rows = rows_of(out)
    assert [r["kind"] for r in rows] == ["ghz", "parity", "ghz", "parity"]
    assert all(float(r["fidelity"]) == pytest.approx(1.0, abs=1e-11) for r in rows)
    assert all(float(r["carrier_distance"]) < 1e-11 for r in rows)


def test_simulate_dephasing_fidelities(capsys):
    p = 0.2
    code, out, _ = run(capsys, "simulate", "--noise", "dephasing", "--p", str(p), "--rounds", "6", "--seed", "5")
    assert code == 0
    msgs = ProtocolConfig(rounds=6, seed=5).message_list()
    for row, psi in zip(rows_of(out), msgs):
        if row["kind"] == "ghz":
            assert float(row["fidelity"]) == pytest.approx(1.0, abs=1e-11)
        else:
            rho = psi.density().entries
            mixed = dk.DensityMatrix((1 - p) * rho + p * X @ rho @ X)
            assert float(row["fidelity"]) == pytest.approx(dk.fidelity_pure(mixed, psi), abs=1e-11)


def test_simulate_depolarizing_distance_constant(capsys):
    _, out, _ = run(capsys, "simulate", "--noise", "depolarizing", "--p", "0.4", "--rounds", "6")
    rows = rows_of(out)
    for kind in ("ghz", "parity"):
        d = [float(r["carrier_distance"]) for r in rows if r["kind"] == kind]
        assert max(d) - min(d) < 1e-11 and d[0] > 0


@pytest.mark.parametrize("p", [0.1, 0.2, 0.4])
def test_channel_table(capsys, p):
    _, out, _ = run(capsys, "channel", "--noise", "depolarizing", "--p", str(p))
    rows = {r["kind"]: r for r in rows_of(out)}
    assert float(rows["ghz"]["block_error"]) == pytest.approx(3 * p / 4, abs=1e-11)
    assert float(rows["ghz"]["p_X"]) == pytest.approx(p / 2, abs=1e-11)
    assert float(rows["parity"]["p_X"]) == pytest.approx(p / 2, abs=1e-11)
    _, out, _ = run(capsys, "channel", "--noise", "dephasing", "--p", str(p))
    rows = {r["kind"]: r for r in rows_of(out)}
    assert float(rows["parity"]["p_X"]) == pytest.approx(p, abs=1e-11)
    assert float(rows["ghz"]["p_I"]) == pytest.approx(1.0, abs=1e-11)


def test_channel_both_engines(capsys):
    _, out, _ = run(capsys, "channel", "--noise", "depolarizing", "--p", "0.2", "--engine", "both", "--trials", "50000")
    rows = rows_of(out)
    assert [(r["kind"], r["engine"]) for r in rows] == [
        ("ghz", "dense"),
        ("ghz", "pauliframe"),
        ("parity", "dense"),
        ("parity", "pauliframe"),
    ]
    for dense, mc in (rows[0:2], rows[2:4]):
        assert dense["std_error"] == ""
        se = float(mc["std_error"])
        assert abs(float(mc["p_X"]) - float(dense["p_X"])) < 3 * se


def test_sweep_dephasing_grid(capsys):
    _, out, _ = run(capsys, "sweep", "--noise", "dephasing", "--grid", "0:0.5:0.25")
    rows = [r for r in rows_of(out) if r["kind"] == "parity"]
    assert [float(r["p"]) for r in rows] == [0.0, 0.25, 0.5]
    assert [float(r["p_X"]) for r in rows] == pytest.approx([0.0, 0.25, 0.5], abs=1e-11)
    zero = rows[0]
    assert [float(zero[k]) for k in ("p_I", "p_X", "p_Y", "p_Z")] == pytest.approx([1, 0, 0, 0], abs=1e-11)
    for r in rows:
        assert float(r["average_fidelity"]) == pytest.approx(1 - 2 * float(r["p_X"]) / 3, abs=1e-11)


@pytest.mark.parametrize("q", [0.1, 0.25, 0.5])
def test_average_fidelity_bloch_oracle(q):
    # Monte Carlo average of <psi|Phi(psi)|psi> over uniform Bloch-sphere states
    rng = np.random.default_rng(17)
    v = rng.normal(size=(20_000, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    # for a bit flip: <psi|X psi X|psi> = x^2 (Bloch x component)
    samples = (1 - q) + q * v[:, 0] ** 2
    se = samples.std(ddof=1) / np.sqrt(len(samples))
    assert abs(samples.mean() - (1 - 2 * q / 3)) < 3 * se


def test_bloch_oracle_formula_matches_dense(rng):
    q = 0.3
    for _ in range(5):
        psi = dk.random_qubit(rng)
        rho = psi.density().entries
        out = dk.DensityMatrix((1 - q) * rho + q * X @ rho @ X)
        x = 2 * (psi.amplitudes[0].conjugate() * psi.amplitudes[1]).real
        assert dk.fidelity_pure(out, psi) == pytest.approx((1 - q) + q * x**2, abs=1e-12)


def test_ecc_table(capsys):
    _, out, _ = run(capsys, "ecc", "--grid", "0:0.5:0.1")
    rows = {float(r["q"]): r for r in rows_of(out)}
    assert float(rows[0.1]["logical_rate"]) == pytest.approx(0.028, abs=1e-12)
    assert float(rows[0.0]["logical_rate"]) == 0.0 and rows[0.0]["suppression_factor"] == ""
    assert float(rows[0.5]["logical_rate"]) == pytest.approx(0.5, abs=1e-12)
    assert float(rows[0.1]["suppression_factor"]) == pytest.approx(0.28, abs=1e-12)


def test_ecc_end_to_end(capsys):
    _, out, _ = run(capsys, "ecc", "--noise", "dephasing", "--grid", "0.1:0.1:1", "--format", "json")
    row = json.loads(out.splitlines()[0])
    assert row["end_to_end_rate"] == pytest.approx(0.028, abs=1e-11)
    assert row["q"] == pytest.approx(0.1, abs=1e-11)


def test_check_passes(capsys):
    code, out, _ = run(capsys, "check")
    assert code == 0
    rows = rows_of(out)
    assert len(rows) > 20 and all(r["passed"] == "True" for r in rows)


def test_check_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(cli, "_invariant_checks", lambda receivers: [("broken", 1.0, False)])
    code, _, _ = run(capsys, "check")
    assert code == cli.EXIT_CONSISTENCY


def test_consistency_error_exit_code(capsys, monkeypatch):
    def boom(*_a, **_k):
        raise ConsistencyError("not CPTP")

    monkeypatch.setattr(cli, "complete_channel", boom)
    code, _, err = run(capsys, "channel", "--noise", "dephasing", "--p", "0.1")
    assert code == 3 and "not CPTP" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["sweep", "--grid", "0:1"],
        ["sweep", "--grid", "0.5:0.1:0.1"],
        ["sweep", "--grid", "0:1:0"],
        ["sweep", "--noise", "dephasing", "--grid", "0:2:1"],
        ["channel", "--p", "1.5"],
        ["channel", "--receivers", "1"],
        ["channel", "--noise", "kicks"],
        ["channel", "--engine", "pauliframe", "--trials", "0"],
        ["simulate", "--rounds", "-1"],
        ["simulate", "--config", "/nonexistent/file.ini"],
    ],
)
def test_config_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("carrier-sim:")


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["channel", "--noise", "thermal"])
    assert exc.value.code == 2


def test_config_file_and_flag_precedence(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[DEFAULT]\nnoise = dephasing\n\n[channel]\nnoise = dephasing\np = 0.3\n")
    _, out, _ = run(capsys, "channel", "--config", str(ini))
    assert float(rows_of(out)[1]["p_X"]) == pytest.approx(0.3, abs=1e-11)
    _, out, _ = run(capsys, "channel", "--config", str(ini), "--p", "0.1")
    assert float(rows_of(out)[1]["p_X"]) == pytest.approx(0.1, abs=1e-11)
    # no [simulate] section: DEFAULT applies
    _, out, _ = run(capsys, "simulate", "--config", str(ini), "--rounds", "2")
    assert len(rows_of(out)) == 2
    ini.write_text("[channel]\nbogus = 1\n")
    code, _, _ = run(capsys, "channel", "--config", str(ini))
    assert code == 2
    ini.write_text("[channel]\np = lots\n")
    code, _, _ = run(capsys, "channel", "--config", str(ini))
    assert code == 2


def test_kicks_file(tmp_path, capsys):
    path = tmp_path / "kicks.csv"
    path.write_text("theta1,theta2,theta3,weight\n0.3,0,0,0.5\n-0.3,0,0,0.5\n")
    _, out, _ = run(capsys, "channel", "--noise", "kicks", "--kicks-file", str(path))
    rows = {r["kind"]: r for r in rows_of(out)}
    p = 0.5 * (1 - np.cos(0.6))
    assert float(rows["parity"]["p"]) == pytest.approx(p, abs=1e-11)
    assert float(rows["parity"]["p_X"]) == pytest.approx(p, abs=1e-11)


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_output_byte_identical(tmp_path, capsys, fmt):
    args = ["sweep", "--noise", "depolarizing", "--grid", "0:0.4:0.2", "--engine", "both", "--trials", "20000"]
    a, b = tmp_path / "a.out", tmp_path / "b.out"
    assert cli.main(args + ["--seed", "9", "--format", fmt, "--out", str(a)]) == 0
    assert cli.main(args + ["--seed", "9", "--format", fmt, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.out"
    cli.main(args + ["--seed", "10", "--format", fmt, "--out", str(c)])
    assert a.read_bytes() != c.read_bytes()


def test_tables_round_trip(tmp_path):
    args = ["sweep", "--noise", "depolarizing", "--grid", "0.1:0.3:0.1"]
    cli.main(args + ["--out", str(tmp_path / "t.csv")])
    cli.main(args + ["--format", "json", "--out", str(tmp_path / "t.json")])
    csv_rows = rows_of((tmp_path / "t.csv").read_text())
    json_rows = [json.loads(line) for line in (tmp_path / "t.json").read_text().splitlines()]
    assert len(csv_rows) == len(json_rows) == 6
    for c, j in zip(csv_rows, json_rows):
        assert c["kind"] == j["kind"]
        for key in ("p", "p_I", "p_X", "average_fidelity", "block_error"):
            assert float(c[key]) == j[key]
        # summary statistics re-derived from the parsed weights
        assert j["average_fidelity"] == pytest.approx((2 * j["p_I"] + 1) / 3, abs=1e-11)
        assert j["p_I"] + j["p_X"] + j["p_Y"] + j["p_Z"] == pytest.approx(1.0, abs=1e-11)


@pytest.mark.parametrize(
    "text,expected",
    [("0:0.5:0.25", (0.0, 0.25, 0.5)), ("0.1:0.3:0.1", (0.1, 0.2, 0.3)), ("0.2:0.2:1", (0.2,)), ("0:1:0.3", (0.0, 0.3, 0.6, 0.9))],
)
def test_parse_grid(text, expected):
    assert cli.parse_grid(text) == expected


def test_significant_digits():
    text = cli.render([{"v": 1 / 3}], "csv")
    assert text == "v\n0.333333333333\n"
    assert cli.render([{"v": None}], "json") == '{"v": null}\n'
