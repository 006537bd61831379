"""
Command-line entry point: ``fraccomp simulate|specify|fit|diagnose|forecast|evaluate``.

A run is described by a JSON configuration (validated against
``schemas/config.schema.json``) plus flag overrides; flags win over the file,
which wins over defaults.  Tables are written as CSV with a JSON sidecar
holding the configuration hash, seed, package versions and wall time.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure (1 for anything unexpected).  Errors are reported on stderr as one
JSON object.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from importlib import resources

import numpy as np
import pandas as pd

from . import __version__
from .exceptions import (
    DataError,
    DegenerateModelError,
    FracCompError,
    InvalidArgumentError,
    NumericalFailureError,
)

__all__ = ["main", "run", "load_config", "ConfigError"]

COMMANDS = ("simulate", "specify", "fit", "diagnose", "forecast", "evaluate")
STOCHASTIC = {"simulate", "specify", "fit", "forecast", "evaluate"}

DEFAULTS = {
    "input_format": "series",
    "covariance_order": "upper_row",
    "output": ".",
    "threads": 1,
    "horizons": [1, 5, 10, 20],
    "specify": {},
    "estimation": {},
    "evaluation": {},
}


class ConfigError(FracCompError):
    """Configuration could not be parsed or violates the schema."""


def _schema():
    text = resources.files("fraccomp").joinpath("schemas/config.schema.json").read_text()
    return json.loads(text)


def load_config(path=None, overrides=None):
    """
    Merge defaults, a JSON file and flag overrides, then validate.

    Returns
    -------
    dict
    """
    import jsonschema

    cfg = json.loads(json.dumps(DEFAULTS))
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        for key, val in data.items():
            if isinstance(val, dict) and isinstance(cfg.get(key), dict):
                cfg[key] = {**cfg[key], **val}
            else:
                cfg[key] = val
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if "." in key:
            outer, inner = key.split(".", 1)
            cfg.setdefault(outer, {})[inner] = val
        else:
            cfg[key] = val
    try:
        jsonschema.validate(cfg, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    return cfg


def _config_hash(cfg):
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _versions():
    import scipy

    return {"fraccomp": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "pandas": pd.__version__}


class _Writer:
    def __init__(self, cfg, command):
        self.dir = cfg["output"]
        os.makedirs(self.dir, exist_ok=True)
        self.meta = {"command": command, "config_hash": _config_hash(cfg), "seed": cfg.get("seed"),
                     "versions": _versions()}
        self.start = time.perf_counter()
        self.files = []

    def _sidecar(self, name, extra=None):
        meta = {**self.meta, "artifact": name,
                "wall_time_seconds": round(time.perf_counter() - self.start, 3)}
        if extra:
            meta.update(extra)
        with open(os.path.join(self.dir, name + ".meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    def csv(self, name, frame, index=True, extra=None):
        path = os.path.join(self.dir, name)
        frame.to_csv(path, index=index, float_format="%.17g")
        self._sidecar(name, extra)
        self.files.append(path)
        return path

    def json(self, name, data, extra=None):
        path = os.path.join(self.dir, name)
        payload = {"meta": {k: v for k, v in self.meta.items() if k != "versions"}, **data}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        self._sidecar(name, extra)
        self.files.append(path)
        return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# inputs


def read_series(path):
    """Read a series panel CSV; a non-numeric or unnamed first column becomes the index."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read panel {path}: {exc}") from exc
    first = frame.columns[0]
    unnamed = str(first).startswith("Unnamed:")
    if unnamed or not pd.api.types.is_numeric_dtype(frame[first]) or str(first).lower() in (
        "date", "time", "t"
    ):
        frame = frame.set_index(first)
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = np.flatnonzero((numeric.isna() & frame.notna()).any(axis=1).to_numpy())
    if bad.size:
        raise DataError("non-numeric entries in rows " + ", ".join(str(b + 1) for b in bad[:10]),
                        rows=(bad + 1).tolist())
    return numeric


def _inputs(cfg):
    """Return ``(series DataFrame, CovPanel or None)``."""
    from .realized import load_panel, to_logz

    path = cfg.get("input")
    if not path:
        raise ConfigError("this command needs an input file (--input)")
    if not os.path.exists(path):
        raise DataError(f"input file {path} does not exist")
    fmt = cfg["input_format"]
    if fmt == "series":
        return read_series(path), None
    panel = load_panel(path, format=fmt, order=cfg["covariance_order"])
    return to_logz(panel), panel


def _spec(cfg, p=None):
    from .model import DofcSpec

    if "spec" not in cfg:
        raise ConfigError("this command needs a model specification (spec)")
    data = dict(cfg["spec"])
    if p is not None and data["p"] != p:
        raise ConfigError(f"spec.p = {data['p']} but the input has {p} series")
    return DofcSpec.from_dict(data)


def _params(cfg):
    from .model import params_from_dict

    src = cfg.get("params")
    if src is None:
        raise ConfigError("this command needs parameters (params)")
    if isinstance(src, str):
        try:
            with open(src) as fh:
                src = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read parameter file: {exc}") from exc
    try:
        spec, params = params_from_dict(src)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed parameter document: {exc}") from exc
    return spec, params


def _fit_result(cfg):
    from .statespace import FitResult

    path = cfg.get("fit_result")
    if not path:
        raise ConfigError("this command needs a fit result (fit_result)")
    try:
        return FitResult.load(path)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read fit result {path}: {exc}") from exc


def _fit_options(cfg):
    from .statespace import FitOptions

    est = cfg["estimation"]
    keys = set(FitOptions().to_dict())
    return FitOptions(**{k: v for k, v in est.items() if k in keys})


def _require_seed(cfg, command):
    if command in STOCHASTIC and cfg.get("seed") is None:
        raise ConfigError(f"'{command}' is stochastic and needs a seed (--seed)")
    return cfg.get("seed")


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, out):
    from .model import simulate_dofc, validate
    from .realized import CovPanel, from_logz, logz_columns, save_panel, _dim_from_p

    spec_from_file, params = _params(cfg)
    spec = _spec(cfg) if "spec" in cfg else spec_from_file
    if spec is None:
        raise ConfigError("spec missing from both the config and the parameter file")
    problems = validate(spec, params)
    if problems:
        raise ConfigError("invalid parameters: " + "; ".join(problems))
    n = cfg.get("n")
    if n is None:
        raise ConfigError("simulate needs the sample size n")
    y = simulate_dofc(spec, params, int(n), np.random.default_rng(cfg["seed"]))
    cols = [f"y{i + 1}" for i in range(spec.p)]
    if cfg.get("as_covariance"):
        k = _dim_from_p(spec.p)
        cols = logz_columns(k)
    frame = pd.DataFrame(y, columns=cols)
    frame.index.name = "t"
    out.csv("panel.csv", frame)
    if cfg.get("as_covariance"):
        panel = CovPanel(np.array([from_logz(v) for v in y]))
        save_panel(os.path.join(out.dir, "covariances.csv"), panel, order=cfg["covariance_order"])
        out._sidecar("covariances.csv")


def cmd_specify(cfg, out):
    from .model import params_to_dict
    from .semiparam import specify

    y, _ = _inputs(cfg)
    opts = cfg["specify"]
    report = specify(
        y.to_numpy(),
        lags=opts.get("lags", 3),
        alpha=opts.get("alpha", 0.05),
        m=opts.get("bandwidth"),
        doc_lags=opts.get("doc_lags", 3),
        in_levels=opts.get("in_levels", True),
        ar_order=opts.get("ar_order", 1),
        rng=cfg["seed"],
    )
    out.json("specification.json", report.to_dict())
    out.json("starting_values.json", params_to_dict(report.start, report.spec))
    comps = pd.DataFrame(report.components, index=y.index,
                         columns=[f"component{i + 1}" for i in range(report.components.shape[1])])
    out.csv("components.csv", comps)


def cmd_fit(cfg, out):
    from .semiparam import initial_params
    from .statespace import bic_search, fit_ml, std_errors

    y, _ = _inputs(cfg)
    data = y.to_numpy()
    spec = _spec(cfg, data.shape[1])
    options = _fit_options(cfg)
    est = cfg["estimation"]
    if "params" in cfg:
        file_spec, init = _params(cfg)
        if file_spec is not None and file_spec != spec:
            raise ConfigError("spec of the parameter file differs from the configured spec")
    else:
        init = initial_params(data, spec, rng=cfg["seed"])
    if est.get("bic_search"):
        ranked = bic_search(data, spec, lambda s: initial_params(data, s, rng=cfg["seed"]), options)
        fit = ranked[0][1]
        table = pd.DataFrame([
            {"group_sizes": " ".join(map(str, s.group_sizes)), "s0": s.s0, "loglik": r.loglik,
             "bic": r.bic, "n_free": r.n_free, "converged": r.converged}
            for s, r in ranked
        ])
        out.csv("bic_search.csv", table, index=False)
    else:
        fit = fit_ml(spec, data, init, options)
    rng = np.random.default_rng(cfg["seed"])
    for method in est.get("std_errors", []):
        std_errors(fit, data, method=method, n_boot=est.get("n_boot", 100), rng=rng, options=options)
    fit.save(os.path.join(out.dir, "fit.json"))
    out._sidecar("fit.json")
    table = pd.DataFrame({"estimate": fit.estimates}, index=fit.param_names)
    for method, se in fit.std_errors.items():
        table[f"se_{method}"] = se
    table.index.name = "parameter"
    out.csv("estimates.csv", table)


def cmd_diagnose(cfg, out):
    from .statespace import build_system, kalman_filter, residual_diagnostics, smoothed_components

    fit = _fit_result(cfg)
    y, _ = _inputs(cfg)
    system = build_system(fit.spec, fit.params, len(y))
    filt = kalman_filter(system, y.to_numpy())
    diag = residual_diagnostics(filt)
    diag.index = [f"e_{c}" for c in y.columns]
    out.csv("diagnostics.csv", diag)
    out.csv("smoothed_components.csv", smoothed_components(system, y))


def cmd_forecast(cfg, out):
    from .realized import from_logz
    from .statespace import build_system, kalman_filter, predict

    fit = _fit_result(cfg)
    y, cov = _inputs(cfg)
    horizons = sorted(set(cfg["horizons"]))
    system = build_system(fit.spec, fit.params, len(y))
    filt = kalman_filter(system, y.to_numpy())
    means, covs = predict(system, filt, max(horizons))
    rows = []
    for h in horizons:
        row = {"horizon": h}
        row.update({f"mean_{c}": v for c, v in zip(y.columns, means[h - 1])})
        row.update({f"sd_{c}": v for c, v in zip(y.columns, np.sqrt(np.diag(covs[h - 1])))})
        rows.append(row)
    out.csv("forecast_moments.csv", pd.DataFrame(rows), index=False)
    if cov is not None:
        rng = np.random.default_rng(cfg["seed"])
        n_sim = cfg["evaluation"].get("n_sim", 1000)
        k = cov.k
        rows = []
        for h in horizons:
            x = from_logz(means[h - 1], covs[h - 1], n_sim, rng)
            row = {"horizon": h}
            row.update({f"X{i + 1}{j + 1}": x[i, j] for i in range(k) for j in range(i, k)})
            rows.append(row)
        out.csv("forecast_covariances.csv", pd.DataFrame(rows), index=False)


def cmd_evaluate(cfg, out):
    from .forecast import DofcForecaster, benchmark, risk_table, rolling_eval

    y, cov = _inputs(cfg)
    if cov is None:
        raise ConfigError("evaluate needs a covariance input (input_format wide or long)")
    ev = cfg["evaluation"]
    names = ev.get("models", ["DOFC", "ARMA"])
    n_sim = ev.get("n_sim", 1000)
    models = {}
    for name in names:
        if name == "DOFC":
            models[name] = DofcForecaster(_spec(cfg, y.shape[1]), _fit_options(cfg), n_sim=n_sim)
        else:
            models[name] = benchmark(name, n_sim=n_sim)
    returns = None
    if ev.get("returns"):
        returns = read_series(ev["returns"]).to_numpy()
    table = rolling_eval(
        models, cov, window=ev.get("window", 1508), horizons=cfg["horizons"], returns=returns,
        refit_every=ev.get("refit_every", 1), seed=cfg["seed"], n_jobs=cfg["threads"],
    )
    table.to_csv(os.path.join(out.dir, "losses.csv"))
    out._sidecar("losses.csv", {"settings": table.settings})
    losses = ev.get("losses", ["LF", "LS", "L3", "LMV"] + (["LD"] if returns is not None else []))
    levels = tuple(ev.get("mcs_level", [0.8, 0.9]))
    n_boot = ev.get("n_boot", 999)
    risks, details = risk_table(table, n_boot=n_boot, levels=levels, seed=cfg["seed"],
                                losses=tuple(losses))
    out.csv("risks.csv", risks, extra={"mcs": {"n_boot": n_boot, "levels": list(levels),
                                               "block_len": "max(5, h)"}})
    out.json("mcs.json", {"mcs": {f"h{h}_{loss}": res.to_dict() for (h, loss), res in details.items()}})


HANDLERS = {
    "simulate": cmd_simulate,
    "specify": cmd_specify,
    "fit": cmd_fit,
    "diagnose": cmd_diagnose,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
}


def run(command, cfg):
    """Execute one command with a validated configuration; returns the written files."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    _require_seed(cfg, command)
    out = _Writer(cfg, command)
    HANDLERS[command](cfg, out)
    return out.files


def _parser():
    parser = argparse.ArgumentParser(prog="fraccomp", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--input", help="input data file")
    parser.add_argument("--output", help="output directory")
    parser.add_argument("--seed", type=int, help="random seed (required for stochastic commands)")
    parser.add_argument("--threads", type=int, help="worker processes for evaluate")
    parser.add_argument("--window", type=int, help="rolling window length")
    parser.add_argument("--horizons", help="comma-separated forecast horizons, e.g. 1,5,10,20")
    parser.add_argument("--n-boot", type=int, help="bootstrap replications (MCS and SEs)")
    parser.add_argument("--mcs-level", help="comma-separated MCS confidence levels, e.g. 0.8,0.9")
    return parser


_EXIT = [
    (ConfigError, 2),
    (DataError, 3),
    (NumericalFailureError, 4),
    (DegenerateModelError, 4),
    (InvalidArgumentError, 2),
    (FracCompError, 4),
]


def _csv_list(text, cast):
    if text is None:
        return None
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        overrides = {
            "command": args.command,
            "input": args.input,
            "output": args.output,
            "seed": args.seed,
            "threads": args.threads,
            "horizons": _csv_list(args.horizons, int),
            "evaluation.window": args.window,
            "evaluation.mcs_level": _csv_list(args.mcs_level, float),
        }
        if args.n_boot is not None:
            overrides["evaluation.n_boot"] = args.n_boot
            overrides["estimation.n_boot"] = args.n_boot
        cfg = load_config(args.config, overrides)
        files = run(args.command, cfg)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code = next((c for cls, c in _EXIT if isinstance(exc, cls)), 1)
        if isinstance(exc, OSError):
            code = 3
        report = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        if isinstance(exc, DataError) and exc.rows:
            report["rows"] = exc.rows[:50]
        if isinstance(exc, NumericalFailureError) and exc.time_index is not None:
            report["time_index"] = int(exc.time_index)
        print(json.dumps(report), file=sys.stderr)
        return code
    print(json.dumps({"command": args.command, "files": files}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
