import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from ecsflow import io
from ecsflow.cli import main
from ecsflow.config import ConfigError, RunConfig, config_from_dict, parse_config
from ecsflow.flow import FlowConfig, run
from ecsflow.seeds import build_seed, whitney_lobe

SMALL_WHITNEY = {"seed": {"N": 256}, "flow": {"a_stop_factor": 25}}
SMALL_CIRCLE = {"seed": {"kind": "circle", "N": 128}, "flow": {"a_stop_factor": 30}}


def write_cfg(path, data):
    path.write_text(json.dumps(data))
    return str(path)


# -- configuration ------------------------------------------------------------


def test_empty_config_gives_defaults(tmp_path):
    cfg = parse_config(write_cfg(tmp_path / "c.json", {}))
    assert cfg == RunConfig()
    assert cfg.seed.kind == "whitney" and cfg.flow.m == 2 and cfg.seed.N == 1024 and cfg.flow.cfl == 0.25


def test_circle_control_config(tmp_path):
    cfg = parse_config(write_cfg(tmp_path / "c.json", {"seed": {"kind": "circle", "R": 2.0}, "flow": {"m": 3}}))
    curve = build_seed(cfg.seed_spec())
    assert not curve.is_lobe and curve.m == 3
    assert np.allclose(np.hypot(*curve.nodes.T), 2.0)


@pytest.mark.parametrize(
    "data, message",
    [
        ({"flow": {"cfl": 0.9}}, r"cfl out of range \(0, 0.5\]"),
        ({"flow": {"cfll": 0.2}}, "unknown key 'flow.cfll'"),
        ({"bogus": 1}, "unknown key 'bogus'"),
        ({"seed": {"N": "many"}}, "seed.N: expected an integer"),
        ({"seed": {"kind": "butterfly"}}, "seed.kind"),
        ({"flow": {"m": 1}}, "flow.m"),
        ({"blowup": {"rho": 1.0}}, "blowup.rho"),
    ],
)
def test_config_errors_name_the_key(data, message):
    with pytest.raises(ConfigError, match=message):
        config_from_dict(data)


def test_config_file_errors_are_distinct(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="malformed JSON"):
        parse_config(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        parse_config(bad)


def test_config_round_trip():
    cfg = config_from_dict({"seed": {"kind": "perturbed_whitney", "eps": 0.05}, "flow": {"t_max": 0.01}})
    assert config_from_dict(json.loads(cfg.to_json())) == cfg


# -- persistence ----------------------------------------------------------------


def test_run_round_trip(tmp_path):
    h = run(whitney_lobe(2, 128), FlowConfig(t_max=0.01, snapshot_every=50))
    io.write_run(tmp_path, h)
    back = io.load_run(tmp_path)
    assert back.m == h.m and back.termination == h.termination
    assert [s.step for s in back.snapshots] == [s.step for s in h.snapshots]
    for name, col in h.series.items():
        np.testing.assert_array_equal(back.series[name], col)
    np.testing.assert_array_equal(back.final_curve.nodes, h.final_curve.nodes)
    text = (tmp_path / "series.csv").read_bytes()
    assert b"\r" not in text


# -- command line -----------------------------------------------------------------


def test_dry_run_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["--dry-run", "--out", str(out), "pipeline"]) == 0
    assert not out.exists()
    assert json.loads(capsys.readouterr().out)["out_dir"] == str(out)


def test_bad_config_exits_with_usage_status(tmp_path, capsys):
    path = write_cfg(tmp_path / "c.json", {"flow": {"cfl": 0.9}})
    assert main(["--config", path, "pipeline"]) == 2
    assert "cfl out of range" in capsys.readouterr().err


def test_plot_on_empty_dir(tmp_path, caplog):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["plot", str(empty), "--out", str(tmp_path / "p")]) == 0
    assert "skipping" in caplog.text
    assert not list(tmp_path.rglob("*.svg"))
    assert main(["--strict", "plot", str(empty)]) == 1


def test_small_whitney_pipeline(tmp_path):
    out = tmp_path / "out"
    status = main(["--config", write_cfg(tmp_path / "c.json", SMALL_WHITNEY), "--out", str(out), "pipeline"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert status == 0 and manifest["exit_status"] == 0
    assert set(manifest["stages"]) == {"seed", "run", "verify", "blowup", "plots"}
    assert all(s["status"] == "ok" for s in manifest["stages"].values())
    for stage in manifest["stages"].values():
        for name, digest in stage["files"].items():
            assert io.sha256(out / name) == digest
    svgs = sorted((out / "plots").glob("*.svg"))
    assert len(svgs) == 3
    for f in svgs:
        ET.parse(f)
    blow = (out / "plots" / "blowup.svg").read_text()
    assert "reaper" in blow
    # the rescaled run reloads as the same history
    back = io.load_run(out / "run")
    assert back.termination == "curvature_blowup"


def test_circle_pipeline_discriminates_type(tmp_path):
    plain = write_cfg(tmp_path / "a.json", SMALL_CIRCLE)
    assert main(["--config", plain, "--out", str(tmp_path / "a"), "pipeline"]) == 0
    strict = dict(SMALL_CIRCLE, blowup={"assert_type_ii": True})
    path = write_cfg(tmp_path / "b.json", strict)
    assert main(["--config", path, "--out", str(tmp_path / "b"), "pipeline"]) != 0
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert manifest["stages"]["blowup"]["verdicts"]["type_ii"] is False


def test_subcommands_chain(tmp_path, capsys):
    out = tmp_path / "run"
    args = ["--out", str(out), "run", "--seed", "circle", "--n-nodes", "128", "--a-stop-factor", "30"]
    assert main(args) == 0
    assert main(["verify", str(out), "--out", str(tmp_path / "v")]) == 0
    assert "NOT_APPLICABLE" in capsys.readouterr().out
    assert main(["blowup", str(out), "--out", str(tmp_path / "b")]) == 0
    summary = json.loads((tmp_path / "b" / "blowup.json").read_text())
    assert summary["n_frames"] >= 2 and summary["verdicts"]["type_ii"] is False
    assert main(["plot", str(out), "--out", str(tmp_path / "p")]) == 0


def test_sweep_runs_each_config(tmp_path):
    a = write_cfg(tmp_path / "one.json", SMALL_CIRCLE)
    b = write_cfg(tmp_path / "two.json", dict(SMALL_CIRCLE, flow={"m": 3, "a_stop_factor": 30}))
    out = tmp_path / "sweep"
    assert main(["--out", str(out), "pipeline", "--sweep", a, b]) == 0
    assert json.loads((out / "sweep.json").read_text()) == {"runs": {"one": 0, "two": 0}}
    m3 = json.loads((out / "two" / "manifest.json").read_text())
    assert m3["config"]["flow"]["m"] == 3


def test_blowup_needs_matching_capture_levels(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["--out", str(out), "run", "--seed", "circle", "--n-nodes", "128", "--rho", "1.5"]) == 0
    assert main(["blowup", str(out), "--rho", "1.5", "--out", str(tmp_path / "b")]) == 0
    assert main(["blowup", str(out), "--out", str(tmp_path / "c")]) == 3
    assert "same blowup a0_factor and rho" in capsys.readouterr().err
