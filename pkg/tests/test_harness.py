import json
import math
import os

import pytest

from lsqlab.cli import main
from lsqlab.config import ConfigError, build_model, parse_config
from lsqlab.experiments import EXPERIMENTS, run_experiment
from lsqlab.records import MalformedRecordError, ResultRecord, read_records, write_records
from lsqlab.report import check_records

TAIL_CFG = """
experiment = tail_curve_mc
d = 2
n = 12
replicates = 2000
seed = 7
model.family = iid_coords
model.law = uniform
grids.t_grid = [0.05, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0]
"""

MINIMAX_CFG = """
experiment = minimax_risk_mc   # trailing comment
d = 3
n = 10
sigma2 = 2.0
replicates = 3000
seed = 1
model.family = gaussian
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- config ----------------------------------------------------------------------

def test_digest_ignores_runtime_keys_and_order():
    a = parse_config(MINIMAX_CFG)
    b = parse_config("\n".join(reversed(MINIMAX_CFG.strip().splitlines())).replace("seed = 1", "seed = 9")
                     + "\nthreads = 4\noutput.path = x.jsonl")
    assert a.digest == b.digest and len(a.digest) == 64
    c = parse_config(MINIMAX_CFG.replace("n = 10", "n = 11"))
    assert c.digest != a.digest


@pytest.mark.parametrize("text,match", [
    ("d = 2", "experiment"),
    ("experiment = x\nbogus = 1", "unknown keys"),
    ("experiment = x\nd = 1\nd = 2", "duplicate"),
    ("experiment = x\nseed = -1", "seed"),
    ("experiment = x\nnot a pair", "key = value"),
    ("experiment = x\ngrids.t_grid = [\"a\"]", "grids"),
    ("experiment = x\noutput.format = xml", "output.format"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_build_linear_image_model():
    cfg = parse_config("experiment = minimax_risk_mc\nd = 2\nmodel.family = linear_image\n"
                       "model.base.family = iid_coords\nmodel.base.law = uniform\nmodel.A = [[2, 1], [0, 1]]")
    model = build_model(cfg.model, cfg.d)
    assert model.family == "linear_image" and model.covariance.tolist() == [[5.0, 1.0], [1.0, 1.0]]
    with pytest.raises(ConfigError):
        build_model({"family": "nope"}, 2)


# -- records ------------------------------------------------------------------------

def test_tail_curve_records_share_digest(tmp_path):
    cfg = parse_config(TAIL_CFG)
    recs = run_experiment(cfg)
    assert len(recs) == 8
    assert len({r.config_digest for r in recs}) == 1
    assert all(r.wall_time_ms is None for r in recs)
    assert [r.params["t"] for r in recs] == cfg.grids["t_grid"]


@pytest.mark.parametrize("fmt", ["json-lines", "csv"])
def test_records_roundtrip(tmp_path, fmt):
    recs = run_experiment(parse_config(TAIL_CFG))
    path = tmp_path / ("out." + ("jsonl" if fmt == "json-lines" else "csv"))
    write_records(recs, path, fmt)
    back = read_records(path)
    assert [r.as_dict() for r in back] == [r.as_dict() for r in recs]


def test_non_finite_values_roundtrip(tmp_path):
    rec = ResultRecord("x", "0" * 64, 1, {"a": 1}, math.inf, math.nan, -math.inf, math.inf, {"upper:u": math.inf},
                       0, None)
    write_records([rec], tmp_path / "r.jsonl")
    (back,) = read_records(tmp_path / "r.jsonl")
    assert back.estimate == math.inf and math.isnan(back.stderr) and back.bound_values["upper:u"] == math.inf


def test_malformed_records(tmp_path):
    p = write(tmp_path, "bad.jsonl", '{"experiment": "x"}\n')
    with pytest.raises(MalformedRecordError):
        read_records(p)


def test_failed_write_leaves_target_untouched(tmp_path, monkeypatch):
    target = write(tmp_path, "out.jsonl", "previous\n")
    recs = run_experiment(parse_config(TAIL_CFG))

    def boom(*args, **kwargs):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        write_records(recs, target)
    assert target.read_text() == "previous\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.jsonl"]


# -- cli -------------------------------------------------------------------------------

def test_rerun_is_byte_identical_across_threads(tmp_path, monkeypatch):
    cfg = write(tmp_path, "m.cfg", MINIMAX_CFG)
    outs = []
    for i, threads in enumerate(["1", "4", "auto"]):
        out = tmp_path / f"r{i}.jsonl"
        assert main(["run", "--config", str(cfg), "--threads", threads, "--out", str(out), "--quiet"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    monkeypatch.setenv("LSQLAB_THREADS", "3")
    out = tmp_path / "env.jsonl"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    assert out.read_bytes() == outs[0]


def test_seed_override_changes_values(tmp_path):
    cfg = write(tmp_path, "m.cfg", MINIMAX_CFG)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    main(["run", "--config", str(cfg), "--out", str(a), "--quiet"])
    main(["run", "--config", str(cfg), "--seed", "99", "--out", str(b), "--quiet"])
    ra, rb = read_records(a)[0], read_records(b)[0]
    assert rb.seed == 99 and ra.config_digest == rb.config_digest and ra.estimate != rb.estimate


def test_timing_flag_records_wall_time(tmp_path):
    cfg = write(tmp_path, "m.cfg", MINIMAX_CFG)
    out = tmp_path / "t.csv"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--format", "csv", "--timing", "--quiet"]) == 0
    assert read_records(out)[0].wall_time_ms > 0


def test_report_modes_and_inversion(tmp_path, capsys):
    cfg = write(tmp_path, "m.cfg", MINIMAX_CFG)
    out = tmp_path / "m.jsonl"
    main(["run", "--config", str(cfg), "--out", str(out), "--quiet"])
    assert main(["report", "--mode", "sandwich", str(out)]) == 0
    assert main(["report", "--mode", "envelope", str(out)]) == 0
    assert main(["report", "--mode", "envelope", "--invert", str(out)]) == 1
    # no identity targets in this file: nothing checkable
    assert main(["report", "--mode", "identity", str(out)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_identity_report_on_leverage_records(tmp_path):
    cfg = write(tmp_path, "l.cfg", "experiment = leverage_identity_mc\nd = 2\nn = 10\nreplicates = 5000\n"
                                   "model.family = iid_coords\nmodel.law = uniform\n")
    out = tmp_path / "l.jsonl"
    main(["run", "--config", str(cfg), "--out", str(out), "--quiet"])
    results = check_records(read_records(out), "identity")
    assert len(results) == 2 and all(r.passed for r in results)
    assert main(["report", "--mode", "identity", str(out)]) == 0
    assert main(["report", "--mode", "identity", "--invert", str(out)]) == 1


@pytest.mark.parametrize("text,code", [
    ("experiment = nope\n", 2),
    ("experiment = minimax_risk_mc\nd = 2\nreplicates = 10\nmodel.family = gaussian\n", 2),  # n missing
    ("experiment = tail_curve_mc\nd = 2\nn = 10\nreplicates = 10\nmodel.family = gaussian\n"
     "grids.t_grid = [0.5]\n", 2),  # precondition: too few replicates
    ("experiment = minimax_risk_mc\nd = 2\nn = 4\nreplicates = 5000\nmodel.family = axis_mixture\n"
     "model.atoms = [[1, 0], [0, 1]]\n", 3),  # degenerate design
])
def test_exit_codes(tmp_path, text, code):
    cfg = write(tmp_path, "c.cfg", text)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o.jsonl"), "--quiet"]) == code
    assert not (tmp_path / "o.jsonl").exists()


def test_missing_files_exit_two(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["report", "--mode", "sandwich", str(tmp_path / "missing.jsonl")]) == 2


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in EXPERIMENTS)


def test_jsonl_floats_use_17_digits(tmp_path):
    out = tmp_path / "m.jsonl"
    main(["run", "--config", str(write(tmp_path, "m.cfg", MINIMAX_CFG)), "--out", str(out), "--quiet"])
    line = out.read_text().splitlines()[0]
    rec = json.loads(line)
    assert float(repr(rec["estimate"])) == rec["estimate"]
    assert read_records(out)[0].estimate == rec["estimate"]
