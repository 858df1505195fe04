import os

import pytest

from sysrisk import cli
from sysrisk.io import read_table
from sysrisk.validation import corrupt_grid

from conftest import SCENARIOS

FIG1 = os.path.join(SCENARIOS, "fig1.yaml")
EXP1 = os.path.join(SCENARIOS, "table1", "exp1.yaml")
QUICK_GOV = ["--set", "governance.horizon=1.25", "--set", "governance.n_inner=100", "--dt", "0.01",
             "--set", "riccati.n_steps=1000", "--set", "governance.riccati_steps=1000"]


def test_loss_dist_outputs(tmp_path):
    rc = cli.main(["loss-dist", "--scenario", FIG1, "--out", str(tmp_path), "--paths", "300"])
    assert rc == cli.EXIT_OK
    for variant in ("coupled", "uncoupled"):
        cols, rows = read_table(tmp_path / f"loss_{variant}.csv")
        assert cols == list(cli.LOSS_COLUMNS)
        assert [int(r[0]) for r in rows] == list(range(11))
        assert sum(int(r[1]) for r in rows) == 300
        assert sum(float(r[2]) for r in rows) == pytest.approx(1.0)
    head = (tmp_path / "loss_coupled.csv").read_text().split("k,count")[0]
    assert "seed: 12345" in head and "variant: coupled" in head and "threads" not in head


def test_zero_volatility_scenario_has_no_defaults(tmp_path):
    rc = cli.main(["loss-dist", "--scenario", FIG1, "--out", str(tmp_path), "--paths", "50",
                   "--set", "model.sigma_a=0", "--set", "model.sigma_l=0"])
    assert rc == 0
    for variant in ("coupled", "uncoupled"):
        _, rows = read_table(tmp_path / f"loss_{variant}.csv")
        assert int(rows[0][1]) == 50


def test_govern_outputs(tmp_path):
    rc = cli.main(["govern", "--scenario", EXP1, "--out", str(tmp_path), *QUICK_GOV])
    assert rc == 0
    for label in ("1a2a3", "1a2b3", "baseline"):
        cols, rows = read_table(tmp_path / f"decisions_{label}.csv")
        assert cols == list(cli.DECISION_COLUMNS) and len(rows) == 2
        cols, rows = read_table(tmp_path / f"indices_{label}.csv")
        assert cols == list(cli.INDEX_COLUMNS) and len(rows) == 1
    _, rows = read_table(tmp_path / "indices_baseline.csv")
    assert [float(v) for v in rows[0][1:]] == [0.0, 20.0, 20.0]


def test_govern_multiseed(tmp_path):
    rc = cli.main(["govern", "--scenario", EXP1, "--out", str(tmp_path), *QUICK_GOV,
                   "--set", "governance.seeds=[1, 2]", "--set", "governance.strategy_sets=[1a2a3]",
                   "--set", "governance.baseline=false"])
    assert rc == 0
    _, rows = read_table(tmp_path / "multiseed_1a2a3.csv")
    assert [r[0] for r in rows] == ["1", "2", "mean", "std"]
    assert not (tmp_path / "indices_baseline.csv").exists()


def test_riccati_dump(tmp_path):
    rc = cli.main(["riccati", "--scenario", EXP1, "--out", str(tmp_path), "--set", "riccati.n_steps=200"])
    assert rc == 0
    cols, rows = read_table(tmp_path / "riccati.csv")
    assert cols == list(cli.RICCATI_COLUMNS) and len(rows) == 201
    assert float(rows[0][1]) == pytest.approx(0.1 * 0.7615941559557649, abs=1e-9)
    assert float(rows[-1][1]) == 0.0


@pytest.mark.parametrize("argv,code", [
    (["govern", "--scenario", "missing.yaml"], cli.EXIT_PARSE),
    (["riccati"], cli.EXIT_PARSE),
    (["riccati", "--scenario", FIG1, "--set", "model.nothing=1"], cli.EXIT_PARSE),
    (["riccati", "--scenario", FIG1, "--set", "model.rho_a=1.0"], cli.EXIT_INFEASIBLE),
    (["govern", "--scenario", EXP1, "--set", "governance.phi0=0.3"], cli.EXIT_INFEASIBLE),
    (["loss-dist", "--scenario", FIG1, "--paths", "5", "--set", "control.alpha=1e308"], cli.EXIT_BLOWUP),
    (["nonsense"], cli.EXIT_USAGE),
    (["loss-dist", "--threads", "0", "--scenario", FIG1], cli.EXIT_USAGE),
])
def test_exit_codes(tmp_path, argv, code, capsys):
    assert cli.main([*argv, "--out", str(tmp_path)] if argv[0] != "nonsense" else argv) == code


def test_validate_fails_on_corrupted_riccati_grid(tmp_path, capsys):
    rc = cli.main(["validate", "--out", str(tmp_path)], riccati_hook=corrupt_grid)
    out = capsys.readouterr().out
    assert rc == cli.EXIT_VALIDATION
    assert "FAIL riccati_residuals" in out
    _, rows = read_table(tmp_path / "validation.csv")
    assert {r[0]: r[1] for r in rows}["riccati_residuals"] == "false"
