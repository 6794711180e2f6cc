"""Command-line contract: config handling, file formats, exit codes."""

import json

import numpy as np
import pytest

from mcbridge import cli
from mcbridge.errors import ConfigError

FP_ARGS = ["beta=1", "t_end=0.1", "h=0.01", "potential=double-well",
           "q_min=-1.5", "q_max=1.5", "n_points=7", "n_paths=300"]


def run(argv):
    return cli.main(argv)


def test_parse_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nbeta = 2.5\npotential=double-well\n\n")
    values = cli.parse_config_file(str(path))
    assert values == {"beta": "2.5", "potential": "double-well"}


def test_parse_config_rejects_bad_line(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("beta 2.5\n")
    with pytest.raises(ConfigError):
        cli.parse_config_file(str(path))


def test_fp_overdamped_header_and_shape(tmp_path):
    out = tmp_path / "fp.csv"
    code = run(["fp-overdamped", "--seed", "3", "--out", str(out), *FP_ARGS])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "q,estimate,std_error,mean_weight"
    assert len(lines) == 8
    assert out.with_suffix(".json").exists()


def test_same_seed_gives_identical_bytes(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert run(["fp-overdamped", "--seed", "9", "--out", str(a), *FP_ARGS]) == 0
    assert run(["fp-overdamped", "--seed", "9", "--out", str(b), *FP_ARGS]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_different_seed_changes_output(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    run(["fp-overdamped", "--seed", "1", "--out", str(a), *FP_ARGS])
    run(["fp-overdamped", "--seed", "2", "--out", str(b), *FP_ARGS])
    assert a.read_bytes() != b.read_bytes()


def test_missing_beta_exits_2(tmp_path, capsys):
    out = tmp_path / "fp.csv"
    args = [a for a in FP_ARGS if not a.startswith("beta")]
    code = run(["fp-overdamped", "--out", str(out), *args])
    assert code == 2
    assert "beta" in capsys.readouterr().err


def test_unknown_potential_exits_2(tmp_path):
    out = tmp_path / "fp.csv"
    args = ["potential=banana" if a.startswith("potential") else a
            for a in FP_ARGS]
    assert run(["fp-overdamped", "--out", str(out), *args]) == 2


def test_numerical_failure_exits_3(tmp_path):
    out = tmp_path / "fp.csv"
    args = ["fp-overdamped", "--seed", "1", "--out", str(out),
            "beta=1", "t_end=10", "h=0.5", "potential=quadratic",
            "potential_stiffness=100", "q_min=-1", "q_max=1",
            "n_points=3", "n_paths=50"]
    assert run(args) == 3


def test_paths_flag_overrides_config(tmp_path):
    out = tmp_path / "fp.csv"
    run(["fp-overdamped", "--seed", "3", "--paths", "150", "--out", str(out),
         *FP_ARGS])
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["config"]["n_paths"] == "150"


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("\n".join(FP_ARGS) + "\n")
    out = tmp_path / "fp.csv"
    code = run(["fp-overdamped", "--config", str(cfg), "--seed", "3",
                "--out", str(out), "n_points=4"])
    assert code == 0
    assert len(out.read_text().splitlines()) == 5


def test_summary_echoes_config_and_seed(tmp_path):
    out = tmp_path / "fp.csv"
    run(["fp-overdamped", "--seed", "17", "--out", str(out), *FP_ARGS])
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["seed"] == 17
    assert summary["config"]["potential"] == "double-well"
    assert "runtime_seconds" in summary


def test_hjb_value_runs(tmp_path):
    out = tmp_path / "v.csv"
    code = run(["hjb-value", "--seed", "1", "--out", str(out),
                "beta=1", "t_end=0.1", "h=0.01", "potential=zero",
                "terminal=position-squared", "point=0.5", "n_paths=400"])
    assert code == 0
    header, row = out.read_text().splitlines()
    assert header == "x0,estimate,std_error"
    est = float(row.split(",")[1])
    assert abs(est - (0.25 + 0.2)) < 0.2


def test_bridge_iterate_emits_drift_table(tmp_path):
    out = tmp_path / "b.csv"
    table = tmp_path / "drift.npz"
    code = run(["bridge-iterate", "--seed", "1", "--out", str(out),
                "beta=1", "t_end=0.1", "h=0.01", "u_iota=quartic-shift",
                "u_f=double-well", "x_min=-3", "x_max=3", "n_points=31",
                "n_iters=2", "n_paths=2000", f"drift_out={table}"])
    assert code == 0
    with np.load(table) as data:
        assert data["drift"].shape == (11, 31)


def test_oracle_check_only_filter(capsys):
    assert run(["oracle-check", "--only", "AC11"]) == 0
    out = capsys.readouterr().out
    assert "AC11" in out and "AC1:" not in out


def test_oracle_check_rejects_unknown_id():
    assert run(["oracle-check", "--only", "AC99"]) == 2


def test_determinism_cases_cover_every_csv_subcommand():
    names = {name for name, _ in cli.determinism_cases()}
    assert names == set(cli.COMMANDS)
