import csv
import io
import json
import math

import jsonschema
import numpy as np
import pytest

from regmod.cli import load_suite, main, parse_suite, resolve_base, run_suite
from regmod.errors import ConfigError, UsageError
from regmod.report import canonical_json, format_float, load_schema


def _suite_dir(tmp_path, name="out"):
    return tmp_path / name


def test_format_float():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(2.0) == "2.0"
    assert format_float(-0.0) == "0.0"
    assert format_float(1e-20) == "9.9999999999999995e-21"
    assert format_float(math.inf) == "inf" and format_float(-math.inf) == "-inf"
    assert format_float(math.nan) == "nan"


def test_canonical_json_is_sorted_strict_json():
    text = canonical_json({"b": [1.0, math.inf], "a": {"z": None, "y": True}, "c": np.float64(0.5)})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    doc = json.loads(text)
    assert doc["b"] == [1.0, "inf"] and doc["a"] == {"y": True, "z": None}
    assert canonical_json(doc) == text


def test_catalog_command(capsys):
    assert main(["catalog"]) == 0
    out = capsys.readouterr().out
    assert "zq3" in out and "quartic-gap" in out


def test_crit_command(tmp_path, capsys):
    out = tmp_path / "crit.json"
    assert main(["crit", "zq3", "--point", "1.1,0.9,0", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["query"]["distance"] == pytest.approx(0.1414213562373095)
    assert main(["crit", "zq3", "--out", str(out)]) == 2
    assert "refusing to overwrite" in capsys.readouterr().err
    assert main(["crit", "zq3", "--out", str(out), "--force"]) == 0


def test_estimate_command_and_dump(tmp_path):
    rep, dump = tmp_path / "r.json", tmp_path / "s.csv"
    argv = ["estimate", "zq3", "--base", "crit:0", "--radii", "0.2,0.1,0.05", "--n", "64", "--seed", "7",
            "--out", str(rep), "--dump", str(dump)]
    assert main(argv) == 0
    doc = json.loads(rep.read_text())
    np.testing.assert_allclose(doc["base"], [1.0, 1.0, 0.0], atol=1e-14)
    assert doc["subregularity"]["value"] == pytest.approx(0.5, rel=0.02)
    rows = list(csv.reader(io.StringIO(dump.read_text())))
    assert rows[0] == ["x1", "x2", "x3", "fgap", "sdist", "cdist", "rnorm"]
    assert len(rows) == 1 + 192


def test_commands_require_a_seed(capsys):
    assert main(["estimate", "zq3", "--n", "64"]) == 2
    assert "seed required" in capsys.readouterr().err


def test_check_and_flow_commands(tmp_path):
    rep = tmp_path / "c.json"
    assert main(["check", "quartic-gap", "--base", "0", "--n", "64", "--seed", "3", "--out", str(rep)]) == 0
    doc = json.loads(rep.read_text())
    assert {c["id"]: c["status"] for c in doc["checks"]}["C"] == "skipped"
    traj = tmp_path / "t.csv"
    assert main(["flow", "abs", "--x0", "1", "--tau", "0.25", "--T", "2", "--out", str(traj)]) == 0
    rows = list(csv.reader(io.StringIO(traj.read_text())))
    assert rows[0] == ["k", "x1", "f", "step_norm"]
    assert [float(r[1]) for r in rows[1:]] == [1.0, 0.75, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0]
    assert main(["flow", "zq3", "--x0", "1,1,0", "--out", str(tmp_path / "z.csv")]) == 3


def test_resolve_base(inst):
    np.testing.assert_allclose(resolve_base(inst("zq3"), "crit:0"), [1.0, 1.0, 0.0])
    np.testing.assert_allclose(resolve_base(inst("zq3"), "[1, 2, 0]"), [1.0, 2.0, 0.0])
    with pytest.raises(UsageError):
        resolve_base(inst("zq3"), "crit:5")


def test_suite_config_errors():
    with pytest.raises(ConfigError) as err:
        parse_suite({"runs": [{"instance": "zq3"}]})
    assert err.value.path == "runs[0].seed" and "seed required" in str(err.value)
    with pytest.raises(ConfigError) as err:
        parse_suite({"runs": [{"instance": "zq3", "seed": 1, "colour": 2}]})
    assert err.value.path == "runs[0].colour"
    with pytest.raises(ConfigError):
        parse_suite({"runs": [{"instance": "zq3", "seed": 1}, {"instance": "zq3", "seed": 2}]})
    assert parse_suite({"seed": 5, "runs": [{"instance": "zq3"}]}).runs[0].seed == 5


def test_missing_seed_exits_2(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"runs": [{"instance": "zq3", "base": [1, 1, 0]}]}))
    assert main(["suite", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "seed required" in err[0]


def test_runtime_error_is_one_line(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"runs": [{"instance": "zq3", "base": [1, 1, 1], "seed": 1, "n": 32}]}))
    assert main(["suite", str(cfg), "--out", str(tmp_path / "o")]) == 3
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: zq3:")


@pytest.fixture(scope="module")
def suite_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("suite")
    status = run_suite(load_suite("paper-examples"), out=out)
    return status, out


def test_bundled_suite(suite_run):
    status, out = suite_run
    assert status == 0
    reports = sorted(p.name for p in out.glob("*.report.json"))
    assert reports == [f"{n}.report.json" for n in ("bilinear-4x4", "lasso-toy", "quartic-gap", "zq3-nonneg", "zq3")]
    assert (out / "zq3.kl-fit.csv").exists() and (out / "zq3.solver.csv").exists()
    assert (out / "lasso-toy.flow.csv").exists() and not (out / "zq3.flow.csv").exists()
    q = json.loads((out / "quartic-gap.report.json").read_text())
    assert q["estimates"]["subregularity"]["divergence"] is True
    assert {c["id"]: c["status"] for c in q["checks"]}["E"] == "skipped"


def test_reports_validate_against_the_schema(suite_run):
    schema = load_schema()
    jsonschema.Draft202012Validator.check_schema(schema)
    for path in suite_run[1].glob("*.report.json"):
        jsonschema.validate(json.loads(path.read_text()), schema)


def test_schema_rejects_a_report_without_checks(suite_run):
    doc = json.loads((suite_run[1] / "zq3.report.json").read_text())
    del doc["checks"]
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, load_schema())


def test_suite_refuses_to_overwrite(suite_run, capsys):
    status, out = suite_run
    assert run_suite(load_suite("paper-examples"), out=out) == 2
    assert "refusing to overwrite" in capsys.readouterr().err


def test_worker_count_does_not_change_reports(suite_run, tmp_path):
    _, out = suite_run
    assert run_suite(load_suite("paper-examples"), out=tmp_path, jobs=3) == 0
    for path in out.glob("*"):
        assert (tmp_path / path.name).read_bytes() == path.read_bytes()


def test_failed_check_gives_exit_1(tmp_path):
    # a deliberately wrong prox-regularity constant breaks the certificate
    cfg = {"runs": [{"instance": "neg-half-square", "base": [0.0], "seed": 1, "n": 64, "rho": 0.5}]}
    assert run_suite(parse_suite(cfg), out=tmp_path) == 1
