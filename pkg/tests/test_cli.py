import csv
import json
import time

import pytest

from pmala.cli import main
from pmala.harness import ExperimentConfig, load_trace_samples
from pmala.errors import BadConfig


def write_config(path, **overrides):
    cfg = {
        "model": {"kind": "synthetic_logistic", "n": 100, "d": 3, "seed": 1},
        "samplers": ["pmala", "mmala"],
        "step_size": {"pmala": 0.5, "mmala": 0.5},
        "n_iters": 300,
        "burn_in": 100,
        "n_replicates": 2,
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


def test_run_writes_artifacts(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    out = tmp_path / "out"
    start = time.perf_counter()
    assert main(["run", "--config", str(cfg), "--out", str(out), "--threads", "1",
                 "--save-traces"]) == 0
    assert time.perf_counter() - start < 60
    with (out / "aggregate.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["PMALA", "MMALA"]
    assert float(rows[0]["ess_min_mean"]) > 0
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["methods"]) == {"pmala", "mmala"}
    for fam in ("pmala", "mmala"):
        for r in range(2):
            rep = json.loads((out / "runs" / f"{fam}_rep{r}.json").read_text())
            assert rep["replicate"] == r and rep["seed"] == r
            samples, meta = load_trace_samples(out / "traces" / f"{fam}_rep{r}")
            assert samples.shape == (300, 3) and meta["family"] == fam


def test_run_is_deterministic_across_workers(tmp_path):
    cfg = write_config(tmp_path / "c.json", record_timing=False)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "--threads", "1"])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--threads", "2"])
    a = (tmp_path / "a" / "aggregate.csv").read_bytes()
    assert a == (tmp_path / "b" / "aggregate.csv").read_bytes()
    assert b",," in a or a.rstrip().endswith(b",")


def test_tuning_without_step_sizes(tmp_path):
    cfg = write_config(tmp_path / "c.json", step_size={}, samplers=["pmala"],
                       tuning={"mode": "acceptance", "target": 0.574, "budget": 600})
    assert main(["tune", "--config", str(cfg), "--out", str(tmp_path / "t"), "--threads", "1"]) == 0
    steps = json.loads((tmp_path / "t" / "step_sizes.json").read_text())["step_size"]
    assert steps["pmala"] > 0


def test_unknown_sampler_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", samplers=["hmc"])
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "BadConfig" in capsys.readouterr().err


def test_bad_config_fields():
    with pytest.raises(BadConfig):
        ExperimentConfig.from_dict({"model": {"kind": "example"}, "samplers": [], "iters": 3})
    with pytest.raises(BadConfig):
        ExperimentConfig.from_dict({"samplers": ["pmala"]})
    with pytest.raises(BadConfig):
        ExperimentConfig.from_dict({"model": {"kind": "example"}, "samplers": ["pmala"],
                                    "step_size": {"pmala": -1}})


def test_missing_dataset_exits_2(tmp_path):
    cfg = write_config(tmp_path / "c.json", model={"kind": "logistic", "path": "nope.csv"})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_make_synthetic_and_run_from_csv(tmp_path):
    data = tmp_path / "d" / "toy.csv"
    assert main(["make-synthetic", "logistic", "--out", str(data), "--n", "80", "--d", "3"]) == 0
    meta = json.loads(data.with_suffix(".meta.json").read_text())
    assert len(meta["true_beta"]) == 3
    cfg = write_config(tmp_path / "c.json", model={"kind": "logistic", "path": str(data)},
                       n_replicates=1, samplers=["pmala"], step_size={"pmala": 0.5})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--threads", "1"]) == 0
    assert "toy" in (tmp_path / "o" / "aggregate.csv").read_text()
    fhn = tmp_path / "fhn.csv"
    assert main(["make-synthetic", "fhn", "--out", str(fhn), "--seed", "3"]) == 0
    assert fhn.read_text().splitlines()[0] == "t,W,R"


def verify_config(path, **verify):
    path.write_text(json.dumps({"model": {"kind": "example"}, "samplers": [], "verify": verify}))
    return path


def test_verify_insufficient_samples(tmp_path):
    cfg = verify_config(tmp_path / "v.json", n_paths=10, n_steps=300, burn_in=100)
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize("claim, code", [("pi_f", 0), ("pi", 1)])
def test_verify_small(tmp_path, capsys, claim, code):
    cfg = verify_config(tmp_path / "v.json", n_paths=200, n_steps=20_000, burn_in=1000,
                        claimed_mmala=claim, threshold=0.05)
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == code
    records = json.loads((tmp_path / "o" / "verify_report.json").read_text())
    by_label = {r["spec_label"]: r for r in records}
    assert by_label[f"mmala~{claim}"]["pass"] is (claim == "pi_f")
    assert by_label["pmala~pi"]["pass"]
    assert by_label["omega==gamma[logistic]"]["pass"]
    out = capsys.readouterr().out
    assert out.count("PASS") + out.count("FAIL") == len(records)
