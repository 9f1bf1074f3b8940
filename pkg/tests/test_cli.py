"""Config parsing, snapshot round-trips, and command exit codes."""

import filecmp
import json

import numpy as np
import pytest

from capflow.cli import ConfigError, RunManifest, main, parse_config
from capflow.snapshots import (
    SCHEMA,
    CorruptRecordError,
    SchemaMismatchError,
    frame_record,
    load_snapshot,
    read_snapshot,
    write_csv,
    write_snapshot,
)

BASE_CONFIG = """\
s = 0.5
theta = 1.5707963267948966
dt = 1e-3
resolution = 64
topology = full-sphere
t_end = 3e-3
homotopy_order = 4
"""


def _write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


# ----------------------------------------------------------------------
# parse_config
# ----------------------------------------------------------------------


def test_parse_config_minimal(tmp_path):
    path = _write_config(
        tmp_path,
        "s=0.4\ntheta=1.0\ndt=1e-3\nresolution=64\ntopology=full-sphere\n",
    )
    cfg, base = parse_config(path)
    assert cfg.s == 0.4
    assert cfg.theta == 1.0
    assert cfg.resolution == 64
    assert cfg.topology == "full-sphere"
    assert cfg.initial == "constant:1.0"
    assert base == str(tmp_path / "run")


def test_parse_config_ignores_comments_and_blanks(tmp_path):
    path = _write_config(
        tmp_path,
        "# capillary run\n\ns=0.5\ntheta=1.0\ndt=1e-3\n"
        "resolution=64\ntopology=full-sphere\n  # trailing note\n",
    )
    cfg, _ = parse_config(path)
    assert cfg.s == 0.5


def test_parse_config_output_key_sets_base(tmp_path):
    path = _write_config(tmp_path, BASE_CONFIG + f"output = {tmp_path}/custom\n")
    _, base = parse_config(path)
    assert base == f"{tmp_path}/custom"


@pytest.mark.parametrize(
    "old, new, fragment",
    [
        (None, "colour = red", "unknown key 'colour'"),
        (None, "s = 0.7", "duplicate key 's'"),
        (None, "just some words", "expected key=value"),
        ("dt = 1e-3", "dt = fast", "dt must be a number, got 'fast'"),
        (
            "resolution = 64",
            "resolution = 64.5",
            "resolution must be an integer, got '64.5'",
        ),
    ],
)
def test_parse_config_rejects_bad_lines(tmp_path, old, new, fragment):
    text = BASE_CONFIG + new + "\n" if old is None else BASE_CONFIG.replace(old, new)
    path = _write_config(tmp_path, text)
    with pytest.raises(ConfigError, match=fragment):
        parse_config(path)


def test_parse_config_unknown_key_lists_legal_keys(tmp_path):
    path = _write_config(tmp_path, BASE_CONFIG + "shape = round\n")
    with pytest.raises(ConfigError) as err:
        parse_config(path)
    msg = str(err.value)
    assert "legal keys" in msg
    for key in ("s", "theta", "dt", "resolution", "topology", "output"):
        assert key in msg


def test_parse_config_missing_required_keys(tmp_path):
    path = _write_config(tmp_path, "s=0.5\ntheta=1.0\n")
    with pytest.raises(ConfigError, match="missing required keys"):
        parse_config(path)


def test_parse_config_wraps_range_errors(tmp_path):
    path = _write_config(tmp_path, BASE_CONFIG.replace("s = 0.5", "s = 1.2"))
    with pytest.raises(ConfigError, match=r"s must lie in \(0,1\), got 1.2"):
        parse_config(path)


def test_parse_config_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        parse_config("/nonexistent/run.cfg")


# ----------------------------------------------------------------------
# manifest round-trip
# ----------------------------------------------------------------------


def test_manifest_roundtrips_through_json(tmp_path):
    path = _write_config(tmp_path, BASE_CONFIG)
    cfg, _ = parse_config(path)
    manifest = RunManifest.from_config(cfg)
    wire = json.loads(json.dumps(manifest.to_dict()))
    assert RunManifest.from_dict(wire) == manifest
    assert manifest.deterministic is True
    assert manifest.grid == {"n": 1, "resolution": 64, "topology": "full-sphere"}
    assert manifest.config["s"] == 0.5


# ----------------------------------------------------------------------
# snapshot files
# ----------------------------------------------------------------------


def _sample_snapshot(tmp_path, values=None):
    rng = np.random.default_rng(17)
    vals = rng.uniform(0.9, 1.1, 64) if values is None else values
    manifest = {
        "grid": {"n": 1, "resolution": 64, "topology": "full-sphere"},
        "config": {"s": 0.5},
    }
    frames = [
        frame_record(0.0, vals, 0.0, 3.1),
        frame_record(1e-3, vals * 0.99, 1e-9, 3.0),
    ]
    path = tmp_path / "sample.snap"
    write_snapshot(path, manifest, frames)
    return path, manifest, frames


def test_snapshot_values_roundtrip_bit_exact(tmp_path):
    path, manifest, frames = _sample_snapshot(tmp_path)
    grid, values, loaded_manifest = load_snapshot(path)
    assert loaded_manifest == manifest
    assert grid.size == 64
    assert np.array_equal(values, np.asarray(frames[-1]["values"]))


def test_read_snapshot_returns_all_frames(tmp_path):
    path, _, frames = _sample_snapshot(tmp_path)
    _, loaded = read_snapshot(path)
    assert loaded == frames


def test_snapshot_rejects_other_schema(tmp_path):
    path, _, _ = _sample_snapshot(tmp_path)
    lines = path.read_text().splitlines()
    header = json.loads(lines[0])
    header["schema"] = "capflow-snapshot/2"
    lines[0] = json.dumps(header)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaMismatchError, match="capflow-snapshot/2"):
        read_snapshot(path)
    assert SCHEMA == "capflow-snapshot/1"


def test_snapshot_rejects_truncated_frame(tmp_path):
    path, _, _ = _sample_snapshot(tmp_path)
    text = path.read_text()
    path.write_text(text[: len(text) - 40])
    with pytest.raises(CorruptRecordError, match="truncated or unparseable"):
        read_snapshot(path)


def test_snapshot_rejects_header_only(tmp_path):
    path = tmp_path / "empty.snap"
    write_snapshot(path, {"grid": {}}, [])
    with pytest.raises(CorruptRecordError, match="no frames"):
        read_snapshot(path)


def test_snapshot_rejects_empty_file(tmp_path):
    path = tmp_path / "nothing.snap"
    path.write_text("")
    with pytest.raises(CorruptRecordError, match="empty"):
        read_snapshot(path)


def test_snapshot_rejects_missing_frame_field(tmp_path):
    path, _, frames = _sample_snapshot(tmp_path)
    bad = dict(frames[0])
    del bad["volume"]
    lines = path.read_text().splitlines()
    lines[1] = json.dumps(bad)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CorruptRecordError, match="volume"):
        read_snapshot(path)


def test_load_snapshot_rejects_size_mismatch(tmp_path):
    path, _, _ = _sample_snapshot(tmp_path, values=np.ones(32))
    with pytest.raises(CorruptRecordError, match="32 values"):
        load_snapshot(path)


def test_csv_layout(tmp_path):
    path = tmp_path / "diag.csv"
    diag = [
        {
            "t": 0.0,
            "volume": 3.14,
            "sup_dev": 0.0,
            "max_bc_residual": 0.0,
            "picard_iters": 0,
            "dt": 1e-3,
        }
    ]
    write_csv(path, {"grid": {}}, diag)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# manifest: ")
    assert lines[1] == "t,volume,sup_dev,max_bc_residual,picard_iters,dt"
    assert len(lines[2].split(",")) == 6
    assert lines[2].split(",")[1] == repr(3.14)


# ----------------------------------------------------------------------
# command entry points
# ----------------------------------------------------------------------


def test_run_command_writes_outputs(tmp_path, capsys):
    path = _write_config(tmp_path, BASE_CONFIG)
    assert main(["run", str(path)]) == 0
    out = capsys.readouterr().out
    assert "completed" in out
    assert (tmp_path / "run.snap").exists()
    assert (tmp_path / "run.csv").exists()
    manifest, frames = read_snapshot(tmp_path / "run.snap")
    assert manifest["config"]["dt"] == 1e-3
    assert len(frames) == 4  # initial state plus three steps
    assert frames[-1]["time"] == pytest.approx(3e-3)


def test_run_command_is_byte_deterministic(tmp_path):
    first = _write_config(
        tmp_path, BASE_CONFIG + f"output = {tmp_path}/a\n", name="a.cfg"
    )
    second = _write_config(
        tmp_path, BASE_CONFIG + f"output = {tmp_path}/b\n", name="b.cfg"
    )
    assert main(["run", str(first)]) == 0
    assert main(["run", str(second)]) == 0
    assert filecmp.cmp(tmp_path / "a.snap", tmp_path / "b.snap", shallow=False)
    assert filecmp.cmp(tmp_path / "a.csv", tmp_path / "b.csv", shallow=False)


@pytest.mark.parametrize(
    "dt, extra, code",
    [
        ("4.0", "", 3),
        ("2.5e-3", "initial = constant:0.12\nrefresh_remainders = per-step\n", 4),
        ("1e-3", "initial = constant:0.12\nrefresh_remainders = per-step\n", 5),
    ],
)
def test_run_command_failure_exit_codes(tmp_path, capsys, dt, extra, code):
    text = (
        "s = 0.5\ntheta = 1.5707963267948966\nresolution = 64\n"
        f"topology = full-sphere\nhomotopy_order = 4\ndt = {dt}\n" + extra
    )
    path = _write_config(tmp_path, text)
    assert main(["run", str(path)]) == code
    assert (tmp_path / "run.snap").exists()


def test_config_error_exit_code(tmp_path, capsys):
    path = _write_config(tmp_path, BASE_CONFIG.replace("s = 0.5", "s = 1.2"))
    assert main(["run", str(path)]) == 2
    err = capsys.readouterr().err
    assert "config error" in err
    assert "s must lie in (0,1), got 1.2" in err


def test_validate_unknown_suite_exit_code(capsys):
    assert main(["validate", "nope"]) == 2
    err = capsys.readouterr().err
    assert "unknown suite 'nope'" in err
    for name in ("bc", "identities", "m1-identity", "scaling", "shrinking-circle"):
        assert name in err


def test_inspect_summarizes_snapshot(tmp_path, capsys):
    path = _write_config(tmp_path, BASE_CONFIG)
    main(["run", str(path)])
    capsys.readouterr()
    assert main(["inspect", str(tmp_path / "run.snap")]) == 0
    out = capsys.readouterr().out
    assert "frames: 4" in out
    assert "time span: 0 .. 0.003" in out
    assert "64 nodes" in out


def test_inspect_missing_file_exit_code(tmp_path, capsys):
    assert main(["inspect", str(tmp_path / "absent.snap")]) == 6
    assert "snapshot error" in capsys.readouterr().err


def test_restart_from_snapshot_continues_field(tmp_path):
    path = _write_config(tmp_path, BASE_CONFIG)
    assert main(["run", str(path)]) == 0
    restart = _write_config(
        tmp_path,
        BASE_CONFIG + f"initial = snapshot:{tmp_path}/run.snap\n",
        name="restart.cfg",
    )
    assert main(["run", str(restart)]) == 0
    _, first_frames = read_snapshot(tmp_path / "run.snap")
    _, second_frames = read_snapshot(tmp_path / "restart.snap")
    assert second_frames[0]["values"] == first_frames[-1]["values"]
