"""Config resolution and the simulate / fit / compare / diagnose pipelines.

A run configuration is a single JSON tree.  Missing sections and keys are
filled from :data:`DEFAULTS`; ``desk=True`` shortens both chains to
8000 / 3000 / 5 before the user's values are applied.  Every output file
is a deterministic function of the resolved configuration and the seed.
"""

from __future__ import annotations

import copy
import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .estimators import BernsteinSpectralEstimator, VarSpectralEstimator
from .io import read_json, read_series_csv, write_json, write_series_csv
from .likelihood import (TimeSeries, average_hellinger, average_kl, extended_whittle_log_likelihood,
                         fourier_coefficients, fourier_frequencies, lambda_n, real_valued_whittle_log_likelihood)
from .plots import plot_summary
from .summaries import error_metrics, read_summary_median
from .var import VarmaModel, difference_lag, simulate_varma, true_spectral_density, var2_example, vma1_example

SEED_ENV = "MATSPEC_SEED"

DEFAULTS = {
    "model": None,
    "seed": None,
    "out": None,
    "prior": {"alpha_mass": 2.0, "beta0": 1e-4},
    "basis": {"xi_l": 0.1, "xi_r": 0.9, "k_max": 500, "degree_prior_c": 0.01},
    "sampler": {"total_iterations": 80000, "burn_in": 30000, "thin": 5, "L": None, "target_acceptance": 0.44,
                "adapt_cap": 0.01, "init_k": 100},
    "var": {"order": None, "p_max": 10, "iterations": 80000, "burn_in": 30000, "thin": 5, "prior_var": 1e4,
            "nu0": 1e-4, "s0": 1e-4},
    "summary": {"level": 0.9, "grid": "fourier", "grid_size": 256, "plots": True},
    "simulate": {"n": 256, "replicates": 1, "burn": 1000, "header": False, "prefix": "series"},
    "data": {"inputs": [], "header": "auto", "difference_lag": 0, "center": True},
    "compare": {"fits": None, "replicates": 20, "n": 256, "methods": ["NP", "VAR"]},
    "diagnose": {"input": None, "fit": None, "grid_size": 4096},
}

DESK = {"sampler": {"total_iterations": 8000, "burn_in": 3000, "thin": 5},
        "var": {"iterations": 8000, "burn_in": 3000, "thin": 5}}

_pos_int = {"type": "integer", "minimum": 1}
_nonneg_int = {"type": "integer", "minimum": 0}
_pos = {"type": "number", "exclusiveMinimum": 0}
_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

_model_schema = {
    "oneOf": [
        {"type": "string", "enum": ["var2", "vma1"]},
        {"type": "object", "required": ["file"], "additionalProperties": False,
         "properties": {"file": {"type": "string"}}},
        {"type": "object", "required": ["sigma"], "additionalProperties": False,
         "properties": {"ar": {"type": "array", "items": _matrix}, "ma": {"type": "array", "items": _matrix},
                        "sigma": _matrix,
                        "innovations": {"enum": ["gaussian", "student_t4", "centered_exponential"]}}},
    ]
}


def _section(props: dict) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props}


CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {"anyOf": [{"type": "null"}, _model_schema]},
        "seed": {"type": ["integer", "null"], "minimum": 0},
        "out": {"type": ["string", "null"]},
        "prior": _section({"alpha_mass": _pos, "beta0": _pos}),
        "basis": _section({"xi_l": {"type": "number", "minimum": 0, "maximum": 1},
                           "xi_r": {"type": "number", "minimum": 0, "maximum": 1},
                           "k_max": _pos_int, "degree_prior_c": _pos}),
        "sampler": _section({"total_iterations": _pos_int, "burn_in": _nonneg_int, "thin": _pos_int,
                             "L": {"type": ["integer", "null"], "minimum": 1},
                             "target_acceptance": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                             "adapt_cap": _pos, "init_k": _pos_int}),
        "var": _section({"order": {"type": ["integer", "null"], "minimum": 1}, "p_max": _pos_int,
                         "iterations": _pos_int, "burn_in": _nonneg_int, "thin": _pos_int, "prior_var": _pos,
                         "nu0": _pos, "s0": _pos}),
        "summary": _section({"level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                             "grid": {"enum": ["fourier", "uniform"]}, "grid_size": {"type": "integer", "minimum": 2},
                             "plots": {"type": "boolean"}}),
        "simulate": _section({"n": {"type": "integer", "minimum": 2}, "replicates": _pos_int, "burn": _nonneg_int,
                              "header": {"type": "boolean"}, "prefix": {"type": "string", "minLength": 1}}),
        "data": _section({"inputs": {"type": "array", "items": {"type": "string"}},
                          "header": {"enum": ["auto", True, False]}, "difference_lag": _nonneg_int,
                          "center": {"type": "boolean"}}),
        "compare": _section({"fits": {"anyOf": [{"type": "null"},
                                                {"type": "object",
                                                 "additionalProperties": {"type": "array",
                                                                          "items": {"type": "string"}}}]},
                             "replicates": _pos_int, "n": {"type": "integer", "minimum": 4},
                             "methods": {"type": "array", "items": {"enum": ["NP", "VAR"]}, "minItems": 1}}),
        "diagnose": _section({"input": {"type": ["string", "null"]}, "fit": {"type": ["string", "null"]},
                              "grid_size": {"type": "integer", "minimum": 16}}),
    },
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, upd: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in upd.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def validate_config(raw: dict) -> None:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {loc}: {exc.message}") from None


def resolve_config(raw: dict, desk: bool = False, base_dir=None) -> dict:
    """Validate a raw config and fill defaults; relative paths resolve against ``base_dir``."""
    validate_config(raw)
    cfg = _merge(DEFAULTS, DESK) if desk else copy.deepcopy(DEFAULTS)
    cfg = _merge(cfg, raw)
    validate_config(cfg)
    if base_dir is not None:
        base = Path(base_dir)

        def fix(p):
            return p if p is None or Path(p).is_absolute() else str(base / p)

        cfg["data"]["inputs"] = [fix(p) for p in cfg["data"]["inputs"]]
        cfg["diagnose"]["input"] = fix(cfg["diagnose"]["input"])
        cfg["diagnose"]["fit"] = fix(cfg["diagnose"]["fit"])
        if isinstance(cfg["model"], dict) and "file" in cfg["model"]:
            cfg["model"] = {"file": fix(cfg["model"]["file"])}
        if cfg["compare"]["fits"]:
            cfg["compare"]["fits"] = {k: [fix(p) for p in v] for k, v in cfg["compare"]["fits"].items()}
    s = cfg["sampler"]
    if s["burn_in"] >= s["total_iterations"]:
        raise ConfigError("sampler.burn_in must be smaller than sampler.total_iterations")
    v = cfg["var"]
    if v["burn_in"] >= v["iterations"]:
        raise ConfigError("var.burn_in must be smaller than var.iterations")
    if cfg["basis"]["xi_l"] >= cfg["basis"]["xi_r"]:
        raise ConfigError("basis.xi_l must be smaller than basis.xi_r")
    return cfg


def load_config(path, desk: bool = False) -> dict:
    path = Path(path)
    try:
        raw = read_json(path)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return resolve_config(raw, desk=desk, base_dir=path.parent)


def resolve_seed(cli_seed, cfg: dict) -> int:
    """Command-line seed, else the config's seed, else $MATSPEC_SEED, else 0."""
    if cli_seed is not None:
        return int(cli_seed)
    if cfg.get("seed") is not None:
        return int(cfg["seed"])
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return 0


def load_model(cfg: dict) -> VarmaModel:
    m = cfg.get("model")
    if m is None:
        raise ConfigError("this command needs a 'model'")
    if m == "var2":
        return var2_example()
    if m == "vma1":
        return vma1_example()
    if "file" in m:
        return VarmaModel.load(m["file"])
    return VarmaModel.from_json(m)


def output_grid(cfg: dict, n: int) -> np.ndarray | None:
    """None for the Fourier frequencies, else an equispaced grid on [0, pi]."""
    if cfg["summary"]["grid"] == "fourier":
        return None
    return np.linspace(0.0, np.pi, cfg["summary"]["grid_size"])


# ---------------------------------------------------------------- simulate

def simulate(cfg: dict, seed: int, out_dir) -> list:
    """Write ``{prefix}_{i:03d}.csv`` plus a sidecar JSON per replicate; return the CSV paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = load_model(cfg)
    sim = cfg["simulate"]
    paths = []
    for i in range(sim["replicates"]):
        rng = np.random.default_rng(seed + i)
        ts = simulate_varma(model, sim["n"], burn=sim["burn"], rng=rng)
        stem = f"{sim['prefix']}_{i:03d}"
        path = out_dir / f"{stem}.csv"
        write_series_csv(path, ts.values, header=sim["header"])
        write_json(out_dir / f"{stem}.json", {"model": model.to_json(), "seed": seed, "replicate": i,
                                               "replicate_seed": seed + i, "n": sim["n"], "burn": sim["burn"],
                                               "version": __version__})
        paths.append(path)
    return paths


# ---------------------------------------------------------------- fitting

def load_series(path, cfg: dict) -> TimeSeries:
    values = read_series_csv(path, header=cfg["data"]["header"])
    ts = TimeSeries(values)
    if cfg["data"]["difference_lag"]:
        ts = difference_lag(ts, cfg["data"]["difference_lag"])
    return ts


def np_estimator(cfg: dict, rng, grid=None) -> BernsteinSpectralEstimator:
    s, b, p = cfg["sampler"], cfg["basis"], cfg["prior"]
    return BernsteinSpectralEstimator(alpha_mass=p["alpha_mass"], beta0=p["beta0"], xi_l=b["xi_l"], xi_r=b["xi_r"],
                                      k_max=b["k_max"], degree_prior_c=b["degree_prior_c"],
                                      total_iterations=s["total_iterations"], burn_in=s["burn_in"], thin=s["thin"],
                                      L=s["L"], target_acceptance=s["target_acceptance"], adapt_cap=s["adapt_cap"],
                                      init_k=s["init_k"], level=cfg["summary"]["level"], grid=grid,
                                      center=cfg["data"]["center"], random_state=rng)


def var_estimator(cfg: dict, rng, grid=None) -> VarSpectralEstimator:
    v = cfg["var"]
    return VarSpectralEstimator(order=v["order"], p_max=v["p_max"], iterations=v["iterations"], burn_in=v["burn_in"],
                                thin=v["thin"], prior_var=v["prior_var"], nu0=v["nu0"], s0=v["s0"],
                                level=cfg["summary"]["level"], grid=grid, center=cfg["data"]["center"],
                                random_state=rng)


def fit_series(ts: TimeSeries, method: str, cfg: dict, rng):
    grid = output_grid(cfg, ts.n)
    est = np_estimator(cfg, rng, grid) if method == "NP" else var_estimator(cfg, rng, grid)
    return est.fit(ts.values)


def _metadata(est, method: str, cfg: dict, seed: int, source: str, ts: TimeSeries) -> dict:
    meta = {"command": "fit-np" if method == "NP" else "fit-var", "method": method, "source": source,
            "seed": seed, "n": ts.n, "d": ts.d, "C_level": est.summary_.c_level, "level": est.summary_.level,
            "config": cfg, "version": __version__}
    if method == "NP":
        dr = est.draws_
        meta["acceptance"] = dr.acceptance
        meta["L"] = dr.config["L"]
        meta["step_sizes"] = dr.step_sizes
        meta["degree_mean"] = float(np.mean(dr.k))
    else:
        meta["order"] = est.order_
    return meta


def write_draws(path, est) -> None:
    """Thinned NP draws as JSON lines ``{"k", "atoms"}``."""
    with open(path, "w") as fh:
        for s in est.draws_.states():
            fh.write(json.dumps(s.to_json(), sort_keys=True) + "\n")


def write_fit_outputs(est, method: str, ts: TimeSeries, cfg: dict, seed: int, source: str, out_dir, stem: str):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = method.lower()
    files = {"summary": out_dir / f"{stem}_{tag}_summary.csv", "metadata": out_dir / f"{stem}_{tag}_meta.json"}
    est.summary_.to_csv(files["summary"])
    write_json(files["metadata"], _metadata(est, method, cfg, seed, source, ts))
    if method == "NP":
        files["draws"] = out_dir / f"{stem}_{tag}_draws.jsonl"
        write_draws(files["draws"], est)
    if cfg["summary"]["plots"]:
        per = None
        if cfg["summary"]["grid"] == "fourier":
            tsc = ts.centered()[0] if cfg["data"]["center"] else ts
            per = fourier_coefficients(tsc).periodogram()
        files["plots"] = plot_summary(est.summary_, out_dir, prefix=f"{stem}_{tag}_", periodogram=per)
    return files


def _fit_job(args):
    path, method, cfg, seed, out_dir = args
    ts = load_series(path, cfg)
    est = fit_series(ts, method, cfg, np.random.default_rng(seed))
    return write_fit_outputs(est, method, ts, cfg, seed, str(path), out_dir, Path(path).stem)


def _run_jobs(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def fit_files(method: str, cfg: dict, seed: int, out_dir, inputs=None, workers: int = 1) -> list:
    """Fit every input file; file i uses the seed ``seed + i``."""
    inputs = list(inputs if inputs is not None else cfg["data"]["inputs"])
    if not inputs:
        raise ConfigError("no input series: set data.inputs or pass --input")
    jobs = [(p, method, cfg, seed + i, str(out_dir)) for i, p in enumerate(inputs)]
    return _run_jobs(_fit_job, jobs, workers)


# ---------------------------------------------------------------- compare

COMPARE_COLUMNS = ["method", "replicates", "l1_mean", "l1_se", "l2_mean", "l2_se"]


def _error_table(errors: dict) -> list:
    rows = []
    for method, errs in errors.items():
        e = np.asarray(errs, dtype=float).reshape(-1, 2)
        m = e.shape[0]
        se = e.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.full(2, np.nan)
        rows.append([method, m, *(v for pair in zip(e.mean(axis=0), se) for v in pair)])
    return rows


def write_table(path, rows: list, columns=COMPARE_COLUMNS) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(x if isinstance(x, str) else (str(x) if isinstance(x, (int, np.integer)) else
                                                                 "%.17g" % x) for x in r) + "\n")


def compare_summaries(model: VarmaModel, fits: dict) -> dict:
    """Per-method lists of (L1, L2) errors of summary-CSV medians against the true spectrum."""
    errors = {}
    grid = None
    for method, paths in fits.items():
        errs = []
        for p in paths:
            omegas, med = read_summary_median(p)
            if grid is None:
                grid = omegas
            elif omegas.shape != grid.shape or not np.allclose(omegas, grid, rtol=0, atol=1e-12):
                raise ValueError(f"{p}: frequency grid differs from the other fits")
            if med.shape[-1] != model.d:
                raise ValueError(f"{p}: dimension {med.shape[-1]} does not match the model")
            errs.append(error_metrics(med, true_spectral_density(model, omegas)))
        errors[method] = errs
    return errors


def _experiment_job(args):
    i, cfg, seed, out_dir = args
    model = load_model(cfg)
    ss = np.random.SeedSequence(seed + i)
    data_ss, np_ss, var_ss = ss.spawn(3)
    ts = simulate_varma(model, cfg["compare"]["n"], burn=cfg["simulate"]["burn"], rng=np.random.default_rng(data_ss))
    stem = f"replicate_{i:03d}"
    res = {}
    for method, child in (("NP", np_ss), ("VAR", var_ss)):
        if method not in cfg["compare"]["methods"]:
            continue
        est = fit_series(ts, method, cfg, np.random.default_rng(child))
        tag = method.lower()
        est.summary_.to_csv(Path(out_dir) / f"{stem}_{tag}_summary.csv")
        res[method] = error_metrics(est.summary_.median, true_spectral_density(model, est.summary_.omegas))
    return res


def run_experiment(cfg: dict, seed: int, out_dir, workers: int = 1) -> dict:
    """Simulate ``compare.replicates`` series and fit each with the requested methods.

    Replicate i derives its data, NP and VAR streams from ``seed + i``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(i, cfg, seed, str(out_dir)) for i in range(cfg["compare"]["replicates"])]
    results = _run_jobs(_experiment_job, jobs, workers)
    return {m: [r[m] for r in results] for m in cfg["compare"]["methods"]}


def compare(cfg: dict, seed: int, out_dir, workers: int = 1) -> dict:
    """Write ``comparison.csv`` (mean errors) and ``comparison_replicates.csv``; return the errors."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = load_model(cfg)
    if cfg["compare"]["fits"]:
        errors = compare_summaries(model, cfg["compare"]["fits"])
    else:
        errors = run_experiment(cfg, seed, out_dir, workers)
    write_table(out_dir / "comparison.csv", _error_table(errors))
    rows = [[m, i, l1, l2] for m, errs in errors.items() for i, (l1, l2) in enumerate(errs)]
    write_table(out_dir / "comparison_replicates.csv", rows, ["method", "replicate", "l1", "l2"])
    write_json(out_dir / "comparison_meta.json", {"command": "compare", "seed": seed, "config": cfg,
                                                  "version": __version__})
    return errors


# ---------------------------------------------------------------- diagnose

def diagnose(cfg: dict, out_dir, input_path=None) -> dict:
    """Write ``diagnostics.json`` with Lambda_n, the Whittle cross-form residual and, given a fit, distances."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = input_path or cfg["diagnose"]["input"] or (cfg["data"]["inputs"][0] if cfg["data"]["inputs"] else None)
    if path is None:
        raise ConfigError("diagnose needs diagnose.input or data.inputs")
    model = load_model(cfg)
    ts = load_series(path, cfg)
    if ts.d != model.d:
        raise ValueError("series dimension does not match the model")
    if cfg["data"]["center"]:
        ts = ts.centered()[0]
    truth = lambda w: true_spectral_density(model, w)  # noqa: E731
    fc = fourier_coefficients(ts)
    f_full = truth(fc.omegas)
    ext = extended_whittle_log_likelihood(fc, f_full)
    real = real_valued_whittle_log_likelihood(fc, f_full)
    out = {"source": str(path), "n": ts.n, "d": ts.d,
           "lambda_n": lambda_n(ts, truth, cfg["diagnose"]["grid_size"]),
           "extended_whittle": ext, "real_valued_whittle": real, "whittle_form_residual": abs(ext - real),
           "average_hellinger": None, "average_kl": None, "fit": None, "version": __version__}
    fit = cfg["diagnose"]["fit"]
    if fit is not None:
        omegas, med = read_summary_median(fit)
        ref = fourier_frequencies(ts.n)
        if omegas.shape != ref.shape or not np.allclose(omegas, ref, rtol=0, atol=1e-12):
            raise ValueError("fit summary must be on the Fourier frequencies of the input series")
        out["fit"] = str(fit)
        out["average_hellinger"] = average_hellinger(med, truth, ts.n)
        out["average_kl"] = average_kl(truth, med, ts.n)
    write_json(out_dir / "diagnostics.json", out)
    return out


__all__ = ["CONFIG_SCHEMA", "DEFAULTS", "ConfigError", "load_config", "resolve_config", "resolve_seed", "simulate",
           "fit_files", "compare", "diagnose", "run_experiment", "compare_summaries"]
