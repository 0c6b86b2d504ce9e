"""Experiment configuration and the run / verify / tune drivers behind the CLI.

Configuration is a JSON object; command-line flags override its fields.
Replicate ``r`` of every sampler uses seed ``base_seed + r``.
"""

import copy
import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .diagnostics import AGGREGATE_COLUMNS, aggregate_row, ess_report, summarize
from .diffusion_lab import EnsembleConfig, compare_density, simulate_ensemble, simulate_path
from .errors import BadConfig, MissingDataset
from .geometry import Family, MetricBundle, assemble_diffusion, gamma_drift, omega_drift
from .models import (
    ExampleMetricModel,
    FitzHughNagumoModel,
    GaussianModel,
    LogisticModel,
    PolynomialMetric,
    generate_fhn_dataset,
    load_logistic_csv,
    synthetic_logistic,
)
from .models.fhn import FhnDataset
from .samplers import DEFAULT_TARGET_ACCEPT, run_chain, tune_step_size, tune_step_size_ess

log = logging.getLogger(__name__)

MODEL_KINDS = ("logistic", "synthetic_logistic", "fhn", "example", "gaussian")


@dataclass
class ExperimentConfig:
    model: dict
    samplers: list
    step_size: dict = field(default_factory=dict)
    tuning: dict = field(default_factory=lambda: {"mode": "acceptance",
                                                  "target": DEFAULT_TARGET_ACCEPT,
                                                  "budget": 2000})
    n_iters: int = 5000
    burn_in: int = 1000
    n_replicates: int = 1
    base_seed: int = 0
    out: str = "results"
    threads: int | None = None
    save_traces: bool = False
    record_timing: bool = True
    dataset_name: str = ""
    verify: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise BadConfig("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise BadConfig(f"unknown config field(s): {sorted(unknown)}")
        if "model" not in raw:
            raise BadConfig("config field 'model' is required")
        cfg = cls(**copy.deepcopy(raw))
        cfg.validate()
        return cfg

    def validate(self):
        if not isinstance(self.model, dict) or self.model.get("kind") not in MODEL_KINDS:
            raise BadConfig(f"model.kind must be one of {MODEL_KINDS}, got "
                            f"{self.model.get('kind') if isinstance(self.model, dict) else self.model!r}")
        if isinstance(self.samplers, str):
            self.samplers = [self.samplers]
        for name in self.samplers:
            try:
                Family.parse(name)
            except ValueError as exc:
                raise BadConfig(f"samplers: {exc}") from None
        for name, h in self.step_size.items():
            Family.parse(name)
            if not (isinstance(h, (int, float)) and h > 0):
                raise BadConfig(f"step_size.{name} must be a positive number, got {h!r}")
        if self.n_replicates < 1:
            raise BadConfig("n_replicates must be at least 1")
        if self.n_iters < 1 or self.burn_in < 0:
            raise BadConfig("n_iters must be >= 1 and burn_in >= 0")
        if self.tuning.get("mode", "acceptance") not in ("acceptance", "ess_grid"):
            raise BadConfig("tuning.mode must be 'acceptance' or 'ess_grid'")
        if self.threads is None:
            self.threads = os.cpu_count() or 1
        if self.threads < 1:
            raise BadConfig("threads must be at least 1")

    def to_dict(self):
        return {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise BadConfig(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise BadConfig(f"{path}: invalid JSON ({exc})") from None
    return raw


def read_fhn_csv(path, noise_sd=0.5, init_state=(-1.0, 1.0)):
    """Observations from a CSV with header ``t,W,R``."""
    path = Path(path)
    if not path.is_file():
        raise MissingDataset(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"t", "W", "R"} <= set(reader.fieldnames):
            raise BadConfig(f"{path}: expected columns t, W, R")
        rows = [(float(r["t"]), float(r["W"]), float(r["R"])) for r in reader]
    arr = np.array(rows).reshape(-1, 3)
    return FhnDataset(arr[:, 0], arr[:, 1:], arr[:, 1:], (), tuple(init_state), float(noise_sd))


def write_fhn_csv(data, path):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "W", "R"])
        for t, (w, r) in zip(data.times, data.observations):
            writer.writerow([repr(float(t)), repr(float(w)), repr(float(r))])


def build_model(spec):
    """``(model, x0, dataset_name)`` from a ``model`` config block."""
    spec = dict(spec)
    kind = spec.pop("kind")
    try:
        if kind in ("logistic", "synthetic_logistic"):
            intercept = spec.pop("intercept", True)
            standardize = spec.pop("standardize", True)
            prior_var = spec.pop("prior_var", 100.0)
            if kind == "logistic":
                if "path" not in spec:
                    raise BadConfig("model.path is required for kind 'logistic'")
                path = spec.pop("path")
                data = load_logistic_csv(path)
                name = Path(path).stem
            else:
                data = synthetic_logistic(spec.pop("seed", 0), n=spec.pop("n", 500),
                                          d=spec.pop("d", 5))
                name = "synthetic"
            _reject_leftovers(kind, spec)
            model = LogisticModel(data.design(intercept, standardize), data.responses, prior_var)
            return model, np.zeros(model.dim), name
        if kind == "fhn":
            literal = spec.pop("literal_bt", False)
            if "path" in spec:
                data = read_fhn_csv(spec.pop("path"), spec.pop("noise_sd", 0.5))
                name = "fhn"
            else:
                data = generate_fhn_dataset(spec.pop("seed", 0), noise_sd=spec.pop("noise_sd", 0.5),
                                            literal_bt=literal)
                name = "fhn_synthetic"
            theta0 = spec.pop("theta0", (0.2, 0.2, 3.0))
            opts = {k: spec.pop(k) for k in ("prior_sd", "estimate_noise", "noise_param", "dt_max")
                    if k in spec}
            _reject_leftovers(kind, spec)
            model = FitzHughNagumoModel.from_dataset(data, literal_bt=literal, **opts)
            return model, model.initial_state(theta0), name
        if kind == "example":
            _reject_leftovers(kind, spec)
            return ExampleMetricModel(), np.zeros(2), "example"
        dim = spec.pop("dim", 2)
        rho = spec.pop("rho", 0.5)
        metric_seed = spec.pop("metric_seed", 0)
        _reject_leftovers(kind, spec)
        cov = (1 - rho) * np.eye(dim) + rho * np.ones((dim, dim))
        metric = PolynomialMetric.random(dim, np.random.default_rng(metric_seed))
        return GaussianModel(np.zeros(dim), cov, metric), np.zeros(dim), "gaussian"
    except TypeError as exc:
        raise BadConfig(f"model: {exc}") from None


def _reject_leftovers(kind, spec):
    if spec:
        raise BadConfig(f"unknown model option(s) for kind {kind!r}: {sorted(spec)}")


@lru_cache(maxsize=4)
def _cached_model(model_json):
    return build_model(json.loads(model_json))


def _run_replicate(args):
    model_json, family, h, n_iters, burn_in, seed = args
    model, x0, _ = _cached_model(model_json)
    return run_chain(family, model, x0, h, n_iters, seed, burn_in=burn_in)


def resolve_step_sizes(cfg, model, x0):
    """Configured step sizes, tuning any family that has none."""
    out = {}
    tuning = cfg.tuning or {}
    for i, name in enumerate(cfg.samplers):
        fam = Family.parse(name)
        given = cfg.step_size.get(name, cfg.step_size.get(fam.value))
        if given is not None:
            out[fam.value] = float(given)
            continue
        seed = cfg.base_seed + 100_000 + i
        if tuning.get("mode", "acceptance") == "ess_grid":
            grid = tuning.get("grid")
            if not grid:
                raise BadConfig("tuning.grid is required for mode 'ess_grid'")
            res = tune_step_size_ess(fam, model, x0, grid, n_iters=tuning.get("n_iters", 1000),
                                     seed=seed, burn_in=tuning.get("burn_in", 200))
        else:
            res = tune_step_size(fam, model, x0, tuning.get("target", DEFAULT_TARGET_ACCEPT),
                                 budget=tuning.get("budget", 2000), seed=seed)
        log.info("tuned %s: h=%.4g (acceptance %.3f)", fam.value, res.h, res.acceptance_rate)
        out[fam.value] = res.h
    return out


def _fmt(v):
    if isinstance(v, str):
        return v
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def save_trace(trace, path_stem):
    """Samples as little-endian float64 with a JSON sidecar describing the shape."""
    path_stem = Path(path_stem)
    trace.samples.astype("<f8").tofile(path_stem.with_suffix(".f64"))
    sidecar = {"shape": list(trace.samples.shape), "dtype": "<f8", "order": "C",
               "accepted": trace.accepted.astype(int).tolist(), "h": trace.h_used,
               "seed": trace.rng_seed, "family": trace.family, "burn_in": trace.burn_in}
    path_stem.with_suffix(".json").write_text(json.dumps(sidecar))


def load_trace_samples(path_stem):
    path_stem = Path(path_stem)
    meta = json.loads(path_stem.with_suffix(".json").read_text())
    data = np.fromfile(path_stem.with_suffix(".f64"), dtype=meta["dtype"])
    return data.reshape(meta["shape"]), meta


def cmd_run(cfg):
    """Run every sampler for every replicate and write reports.

    Outputs in ``cfg.out``: ``aggregate.csv``, ``summary.json``,
    ``runs/<family>_rep<r>.json`` and, with ``save_traces``, trace binaries.
    """
    model, x0, name = build_model(cfg.model)
    name = cfg.dataset_name or name
    out = Path(cfg.out)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    if cfg.save_traces:
        (out / "traces").mkdir(exist_ok=True)
    steps = resolve_step_sizes(cfg, model, x0)
    model_json = json.dumps(cfg.model, sort_keys=True)

    jobs = [(model_json, fam, steps[fam], cfg.n_iters, cfg.burn_in, cfg.base_seed + r)
            for fam in steps for r in range(cfg.n_replicates)]
    if cfg.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            traces = list(pool.map(_run_replicate, jobs))
    else:
        traces = [_run_replicate(job) for job in jobs]

    rows = []
    summary_out = {"dataset": name, "config": cfg.to_dict(), "step_sizes": steps, "methods": {}}
    for fam in steps:
        fam_traces = [t for t, j in zip(traces, jobs) if j[1] == fam]
        for r, trace in enumerate(fam_traces):
            report = ess_report(trace).to_dict()
            report.update(replicate=r, seed=trace.rng_seed, h=trace.h_used)
            if not cfg.record_timing:
                report["wall_time_s"] = report["min_ess_per_s"] = None
            (out / "runs" / f"{fam}_rep{r}.json").write_text(json.dumps(report, indent=2))
            if cfg.save_traces:
                save_trace(trace, out / "traces" / f"{fam}_rep{r}")
        summary = summarize(fam_traces)
        row = aggregate_row(name, fam.upper(), summary)
        if not cfg.record_timing:
            row["cpu_s"] = row["min_ess_per_s"] = None
        rows.append(row)
        block = summary.to_dict()
        block.pop("reports")
        if not cfg.record_timing:
            for key in ("wall_time_s", "min_ess_per_s", "per_param_ess_per_s"):
                block.pop(key)
        summary_out["methods"][fam] = block

    with (out / "aggregate.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in AGGREGATE_COLUMNS])
    (out / "summary.json").write_text(json.dumps(summary_out, indent=2, default=_json_default))
    return 0


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj)}")


def cmd_tune(cfg):
    model, x0, name = build_model(cfg.model)
    steps = resolve_step_sizes(cfg, model, x0)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "step_sizes.json").write_text(json.dumps({"dataset": name, "step_size": steps},
                                                    indent=2))
    return 0


VERIFY_DEFAULTS = {
    "n_paths": 200,
    "n_steps": 200_000,
    "step": 0.01,
    "burn_in": 2_000,
    "seed": 0,
    "bins": 40,
    "bounds": [-6.0, 6.0],
    "threshold": 0.03,
    "min_gap": 0.05,
    "claimed_mmala": "pi_f",
    "path_steps": 1000,
    "identity_points": 100,
}


def _example_claims(model):
    return {
        "pi": model.log_density,
        "pi_f": lambda x: model.log_density(x) + np.log(model.f(x[..., 1])),
    }


def verify_checks(opts):
    """Run the diffusion-lab checks; returns a list of JSON-ready records."""
    records = []
    rng = np.random.default_rng(opts["seed"])

    example = ExampleMetricModel()
    claims = _example_claims(example)
    if opts["claimed_mmala"] not in claims:
        raise BadConfig(f"verify.claimed_mmala must be one of {sorted(claims)}")

    def ensemble(family, seed):
        spec = assemble_diffusion(example, family)
        cfg = EnsembleConfig(n_paths=opts["n_paths"], n_steps=opts["n_steps"], step=opts["step"],
                             burn_in=opts["burn_in"], seed=seed,
                             x0=lambda g, n: g.standard_normal((n, 2)))
        return simulate_ensemble(spec, cfg).samples

    bounds = tuple(opts["bounds"])
    cloud = ensemble(Family.MMALA, opts["seed"])
    claimed = opts["claimed_mmala"]
    for cmp in compare_density(cloud, claims[claimed], [1], opts["bins"], opts["threshold"],
                               bounds, label=f"mmala~{claimed}"):
        records.append(cmp.to_record())
    if claimed == "pi_f":
        # the usual MMALA diffusion must visibly miss the intended density
        miss = compare_density(cloud, claims["pi"], [1], opts["bins"], opts["threshold"], bounds)[0]
        records.append({"spec_label": "mmala!~pi", "coord": 1, "tv_distance": miss.tv_distance,
                        "threshold": opts["min_gap"],
                        "pass": bool(miss.tv_distance >= opts["min_gap"])})
    cloud = ensemble(Family.PMALA, opts["seed"] + 1)
    for cmp in compare_density(cloud, claims["pi"], [1], opts["bins"], opts["threshold"], bounds,
                               label="pmala~pi"):
        records.append(cmp.to_record())

    equivalence_models = {
        "example": example,
        "gaussian_poly": GaussianModel(np.zeros(2), [[1.0, 0.3], [0.3, 1.0]],
                                       PolynomialMetric.random(2, np.random.default_rng(1))),
    }
    for label, model in equivalence_models.items():
        noises = np.sqrt(opts["step"]) * rng.standard_normal((opts["path_steps"], model.dim))
        x0 = rng.standard_normal(model.dim)
        p1 = simulate_path(assemble_diffusion(model, Family.PMALA), x0, opts["step"], noises)
        p2 = simulate_path(assemble_diffusion(model, Family.MMALA_HALF), x0, opts["step"], noises)
        gap = float(np.max(np.abs(p1 - p2)))
        records.append({"spec_label": f"half_omega==pmala_path[{label}]", "coord": -1, "statistic": gap,
                        "threshold": 1e-8, "pass": bool(gap <= 1e-8)})

    data = synthetic_logistic(opts["seed"], n=200, d=4)
    logistic = LogisticModel(data.design(), data.responses)
    worst = 0.0
    for _ in range(opts["identity_points"]):
        bundle = MetricBundle.from_model(logistic, rng.normal(scale=0.5, size=logistic.dim))
        worst = max(worst, float(np.max(np.abs(omega_drift(bundle) - gamma_drift(bundle)))))
    records.append({"spec_label": "omega==gamma[logistic]", "coord": -1, "statistic": worst,
                    "threshold": 1e-8, "pass": bool(worst <= 1e-8)})
    return records


def cmd_verify(cfg):
    """Exit status 0 when every check passes, 1 otherwise."""
    opts = dict(VERIFY_DEFAULTS)
    unknown = set(cfg.verify) - set(VERIFY_DEFAULTS)
    if unknown:
        raise BadConfig(f"unknown verify option(s): {sorted(unknown)}")
    opts.update(cfg.verify)
    records = verify_checks(opts)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify_report.json").write_text(json.dumps(records, indent=2))
    for rec in records:
        status = "PASS" if rec["pass"] else "FAIL"
        stat = rec.get("tv_distance", rec.get("statistic"))
        print(f"{status}  {rec['spec_label']:<38} stat={stat:.3g} "
              f"threshold={rec['threshold']:.3g}")
    return 0 if all(r["pass"] for r in records) else 1

