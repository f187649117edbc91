import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from crowdwifi.cli import main
from crowdwifi.config import ConfigError, RunConfig, apply_override, load

SCHEMAS = Path(__file__).resolve().parents[1] / "src" / "crowdwifi" / "schemas"
FAST = ["--set", "solver.eps1=5", "--set", "solver.eps2=2"]


def schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def sweep_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "params": {"alpha": 0.5, "c": 50},
        "sweep": {"Q": [30, 120, 180]},
        "solver": {"eps1": 5.0, "eps2": 2.0},
    }))
    return path


def test_sweep_has_three_rows(capsys, sweep_config):
    code, out, _ = run(capsys, "sweep", "--config", str(sweep_config))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 3 and out.count("\n") == 4
    assert [float(r["Q"]) for r in rows] == [30.0, 120.0, 180.0]
    assert all(r["converged"] in ("true", "false") for r in rows)


def test_sweep_reruns_are_byte_identical(tmp_path, sweep_config):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", str(sweep_config), "--seed", "4", "--out", str(a)]) == 0
    assert main(["sweep", "--config", str(sweep_config), "--seed", "4", "--out", str(b),
                 "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_full_precision_floats(capsys):
    _, out, _ = run(capsys, "benchmark", "--set", "sweep.Q=[30]")
    row = list(csv.DictReader(io.StringIO(out)))[0]
    assert float(row["x1_bar"]) == 0.2 ** 0.5


@pytest.mark.parametrize("argv,name", [
    (["stage2", "--p1", "800", "--p2", "60", "--set", "params.Q=30"], "subscription"),
    (["equilibrium", "--set", "params.Q=30", *FAST], "pricing"),
    (["benchmark", "--format", "json"], "rows"),
    (["stage2-map", "--format", "json", "--set", "map.p1=[0, 2000, 3]",
      "--set", "map.p2=[0, 100, 2]"], "rows"),
])
def test_json_output_matches_schema(capsys, argv, name):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    jsonschema.validate(json.loads(out), schema(name))


def test_config_schema_accepts_resolved_config(sweep_config):
    cfg = load(sweep_config)
    jsonschema.validate(cfg.to_dict(), schema("config"))
    assert isinstance(cfg, RunConfig)


def test_malformed_json_exits_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"params": {"Q": 30,}}')
    code, _, err = run(capsys, "sweep", "--config", str(bad))
    assert code == 2 and "line 1" in err


@pytest.mark.parametrize("override", ["sweep.Q=[]", "params.alpha=2", "bogus.key=1",
                                      "sweep.gamma=[1]", "output.format=\"xml\"",
                                      "dist.kind=\"cauchy\""])
def test_bad_config_exits_2(capsys, override):
    code, _, err = run(capsys, "sweep", "--set", override)
    assert code == 2 and err.startswith("crowdwifi: error")


def test_stage2_needs_prices(capsys):
    assert run(capsys, "stage2")[0] == 2
    assert run(capsys, "stage2", "--p1", "-5", "--p2", "1")[0] == 2


def test_unknown_figure(capsys):
    code, _, err = run(capsys, "figures", "nope")
    assert code == 2 and "price_vs_Q" in err


def test_missing_config_file(capsys, tmp_path):
    assert run(capsys, "benchmark", "--config", str(tmp_path / "missing.json"))[0] == 2


def test_unsupported_case_exits_2(capsys):
    code, _, _ = run(capsys, "stage2", "--p1", "100", "--p2", "10", "--set", 'dist.kind="cauchy"')
    assert code == 2


def test_payoffs_at_explicit_prices(capsys):
    code, out, _ = run(capsys, "payoffs", "--p1", "800", "--p2", "60", "--set", "params.Q=30")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 200
    assert rows[-1]["theta"] == "1.0"


def test_overrides():
    data = {}
    apply_override(data, "params.Q=60")
    apply_override(data, "dist.kind=truncated_normal")
    assert data == {"params": {"Q": 60}, "dist": {"kind": "truncated_normal"}}
    with pytest.raises(ConfigError):
        apply_override(data, "params.Q")
    with pytest.raises(ConfigError):
        load(None, ["sweep.beta=[1]", "sweep.beta_frac=[0.5]"])


def test_verify_passes_on_default_config(tmp_path):
    summary = tmp_path / "summary.json"
    proc = subprocess.run([sys.executable, "-m", "crowdwifi", "verify", "--summary", str(summary)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout
    data = json.loads(summary.read_text())
    jsonschema.validate(data, schema("verify"))
    assert data["passed"] and data["n_failed"] == 0
    assert proc.stdout.startswith("name,passed,residual,tolerance,detail")
