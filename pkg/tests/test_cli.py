import json

import pytest

from spacetime_perc import cli
from spacetime_perc import meanfield as mf
from spacetime_perc import validation


def run(argv, tmp_path, name="out"):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def test_quantum_validate_two_vertex(tmp_path):
    code, out = run(["quantum-validate", "--seed", "1"], tmp_path)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report["elements"]) == 16
    assert all(abs(e["z"]) <= 3 for e in report["elements"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 1 and "report.json" in manifest["files"]


def test_quantum_validate_failure_exit_2(tmp_path):
    code, _ = run(["quantum-validate", "--seed", "1", "--set", "sweeps=3200", "--set", "z_max=0.001"], tmp_path)
    assert code == 2


def test_branching_zero_lambda(tmp_path):
    code, out = run(["branching", "--seed", "3", "--set", "lams=[0.0]"], tmp_path)
    assert code == 0
    lines = (out / "branching.csv").read_text().splitlines()
    assert lines[1].split(",")[4] == "0"


def test_meanfield_giant_supercritical(tmp_path):
    code, out = run(["meanfield-giant", "--seed", "4", "--set", "lams=[2.0]"], tmp_path)
    assert code == 0
    row = (out / "giant.csv").read_text().splitlines()[1].split(",")
    assert abs(float(row[1]) - float(row[3])) <= 0.03


def test_outputs_byte_identical(tmp_path):
    args = ["percolation-decay", "--seed", "9", "--set", "trials=1500"]
    _, a = run(args, tmp_path, "a")
    _, b = run([*args, "--workers", "2"], tmp_path, "b")
    for name in ("theta.csv", "survival.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["content_hash"] == mb["content_hash"]


def test_run_from_config_file(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("experiment: rc-chain\nseed: 5\nsweeps: 300\nburn_in: 50\ngraph: {kind: path, n: 2}\n")
    code, out = run(["run", "--config", str(cfg)], tmp_path)
    assert code == 0
    assert (out / "checkpoint.txt").exists() and (out / "observables.csv").exists()


def test_contact_and_entanglement_run(tmp_path):
    assert run(["contact", "--seed", "2", "--set", "trials=300"], tmp_path, "c")[0] == 0
    code, out = run(["entanglement-sweep", "--seed", "0", "--set", "L=[2,3]", "--set", "m=[0,1]"], tmp_path, "e")
    assert code == 0 and len((out / "entropy.csv").read_text().splitlines()) == 5


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        ["branching"],  # no seed
        ["branching", "--seed", "1", "--set", "colour=red"],
        ["branching", "--seed", "1", "--set", "novalue"],
        ["run", "--seed", "1", "--set", "experiment=teleport"],
        ["rc-chain", "--seed", "1", "--set", "q=1.5"],
        ["quantum-validate", "--seed", "1", "--set", "graph={kind: path, n: 13}"],
        ["branching", "--seed", "1", "--config", "/nonexistent.yaml"],
    ],
)
def test_errors_exit_1(argv, tmp_path, capsys):
    with pytest.raises(SystemExit) if argv == ["bogus"] else _noop():
        code, _ = run(argv, tmp_path)
        assert code == 1
    assert "error" in capsys.readouterr().err


class _noop:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def test_unknown_subcommand_status(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == 1


def test_validate_subset(tmp_path):
    code, out = run(["validate", "--seed", "0", "--set", "only=[6]"], tmp_path)
    assert code == 0
    report = json.loads((out / "validation.json").read_text())
    assert [r["criterion"] for r in report] == [6] and report[0]["passed"]


def test_tampered_formula_detected(monkeypatch):
    real = mf.Fq
    monkeypatch.setattr(mf, "Fq", lambda beta, lam, q: 1.0001 * real(beta, lam, q) if q == 1 else real(beta, lam, q))
    assert not validation.formula_identities("quick", 0).passed


def test_help_lists_modules(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    text = capsys.readouterr().out
    for name in cli.EXPERIMENTS:
        assert name in text
