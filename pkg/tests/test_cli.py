import json
from importlib import resources

import jsonschema
import pytest
from click.testing import CliRunner

from volblocks import harness as H
from volblocks.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def _schema(name: str) -> dict:
    ref = resources.files("volblocks") / "schemas" / name
    return json.loads(ref.read_text())


@pytest.fixture(scope="module")
def tick_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("ticks") / "day.csv"
    r = CliRunner().invoke(main, ["simulate", "--model", "model1",
                                  "--n-obs", "2925", "--seed", "11",
                                  "--out", str(p)])
    assert r.exit_code == 0, r.output
    return p


def test_simulate_csv_and_json(runner, tmp_path):
    csv_out = tmp_path / "ticks.csv"
    r = runner.invoke(main, ["simulate", "--n-obs", "1170", "--seed", "3",
                             "--out", str(csv_out)])
    assert r.exit_code == 0, r.output
    lines = csv_out.read_text().strip().splitlines()
    assert lines[0] == "date,time_sec,price"
    assert len(lines) == 1172  # header + n_obs + 1 endpoints

    json_out = tmp_path / "truth.json"
    r = runner.invoke(main, ["simulate", "--n-obs", "1170", "--seed", "3",
                             "--format", "json", "--out", str(json_out)])
    assert r.exit_code == 0, r.output
    payload = json.loads(json_out.read_text())
    assert payload["truth"]["iv"] > 0
    assert payload["truth"]["rho"] == pytest.approx(
        payload["truth"]["rho"], rel=0)


def test_estimate_rk_auto(runner, tick_file, tmp_path):
    out = tmp_path / "rk.csv"
    r = runner.invoke(main, ["estimate", "rk", str(tick_file),
                             "--kernel", "th2", "--blocks", "2",
                             "--jitter", "5", "--out", str(out)])
    assert r.exit_code == 0, r.output
    lines = out.read_text().strip().splitlines()
    header = lines[0].split(",")
    row = dict(zip(header, lines[1].split(",")))
    assert row["estimator"] == "rk(th2)" and row["B"] == "2"
    assert float(row["estimate"]) > 0
    assert len(row["bandwidths"].split(";")) == 2


def test_estimate_rk_fixed_bandwidth(runner, tick_file):
    r = runner.invoke(main, ["estimate", "rk", str(tick_file),
                             "--bandwidth", "30", "--out", "-"])
    assert r.exit_code == 0, r.output
    assert ",30," not in r.output.splitlines()[0]
    assert "30" in r.output  # the fixed H is reported
    r = runner.invoke(main, ["estimate", "rk", str(tick_file),
                             "--no-auto"])
    assert r.exit_code != 0  # neither --bandwidth nor --auto


def test_estimate_qmle(runner, tick_file):
    r = runner.invoke(main, ["estimate", "qmle", str(tick_file),
                             "--blocks", "2", "--format", "json",
                             "--out", "-"])
    assert r.exit_code == 0, r.output
    rows = json.loads(r.output)
    assert rows[0]["estimator"] == "qmle"
    assert rows[0]["estimate"] > 0
    r = runner.invoke(main, ["estimate", "qmle", str(tick_file),
                             "--box", "1,2"])
    assert r.exit_code != 0  # malformed box


def test_mc_config_roundtrip(runner, tmp_path):
    cfg = {"schema": "volblocks-mc-config-1", "model": "model2", "M": 2,
           "base_seed": 5, "sizes": [2925], "xi2_levels": [0.001],
           "blocks": [1, 2], "estimators": ["rk(th2)", "qmle"],
           "workers": 1}
    jsonschema.validate(cfg, _schema("mc_config.schema.json"))
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "report.json"
    r = runner.invoke(main, ["mc", "--config", str(cfg_path),
                             "--out", str(out)])
    assert r.exit_code == 0, r.output
    report = json.loads(out.read_text())
    report["config"]["model"] = str(report["config"]["model"])
    jsonschema.validate(report, _schema("mc_report.schema.json"))
    assert len(report["cells"]) == 4

    # CLI overrides beat the file
    out2 = tmp_path / "report2.json"
    r = runner.invoke(main, ["mc", "--config", str(cfg_path),
                             "--seed", "5", "--reps", "2",
                             "--out", str(out2)])
    assert r.exit_code == 0, r.output
    assert json.loads(out2.read_text())["cells"] == report["cells"]


def test_mc_rejects_bad_config(runner, tmp_path):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({"model": "model2", "M": 1,
                                    "bogus_key": 1}))
    r = runner.invoke(main, ["mc", "--config", str(cfg_path),
                             "--out", str(tmp_path / "x.json")])
    assert r.exit_code != 0
    cfg_path.write_text(json.dumps({"schema": "other-schema",
                                    "model": "model2", "M": 1}))
    r = runner.invoke(main, ["mc", "--config", str(cfg_path),
                             "--out", str(tmp_path / "x.json")])
    assert r.exit_code != 0


def test_load_mc_config_defaults(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"model": "model1", "M": 7}))
    cfg = H.load_mc_config(str(p))
    assert cfg.model == "model1" and cfg.M == 7
    assert cfg.blocks == (1, 2, 4, 6, 8)


def test_avar_loss_grid(runner):
    r = runner.invoke(main, ["avar", "--rho-min", "0.5", "--rho-max",
                             "0.9", "--rho-steps", "3", "--blocks",
                             "1,4", "--n-grid", "4000", "--out", "-"])
    assert r.exit_code == 0, r.output
    lines = r.output.strip().splitlines()
    assert lines[0] == "rho,kappa,estimator,B,loss"
    rows = [dict(zip(lines[0].split(","), ln.split(",")))
            for ln in lines[1:]]
    assert len(rows) == 3 * 2 * 2  # rho x estimators x blocks
    # loss shrinks with B at fixed rho for each estimator
    for tok in ("rk(th2)", "qmle"):
        for rho in {row["rho"] for row in rows}:
            sub = {int(row["B"]): float(row["loss"]) for row in rows
                   if row["estimator"] == tok and row["rho"] == rho}
            assert sub[4] < sub[1]
            assert sub[4] >= -1e-9


def test_avar_rejects_unreachable_rho(runner):
    r = runner.invoke(main, ["avar", "--rho-min", "2.5", "--rho-max",
                             "2.6", "--rho-steps", "1", "--n-grid",
                             "2000"])
    assert r.exit_code != 0


def test_empirical_cli(runner, tick_file, tmp_path):
    out = tmp_path / "emp.json"
    r = runner.invoke(main, ["empirical", str(tick_file), "--blocks",
                             "1,2", "--jitter", "5", "--out", str(out)])
    assert r.exit_code == 0, r.output
    payload = json.loads(out.read_text())
    assert payload["schema"] == H.SCHEMA_VERSION
    assert len(payload["rows"]) == 4  # 2 estimators x 2 block counts
