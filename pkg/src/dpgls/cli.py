"""``dpgls`` command line: simulate, fit-sur, fit-rem, fit-crem, summarize.

Exit codes: 0 on success, 2 for invalid input or configuration, 3 for a
numerical failure inside a sampler.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (
    ChainArchive, _as_bool, _split, atomic_write, config_hash, export_histogram, format_kv, load_archive,
    load_csv, panel_grid, read_kv, read_table, rows_to_csv, save_archive, summarize_chains, table_to_csv,
)
from .dp_core import AlphaConfig, InverseGamma, InverseWishart
from .errors import DpglsError, MissingColumn, NumericalError, ReplicationError, ValidationError
from .gls import BetaPrior
from .mcmc import McmcConfig
from .panel import PanelData, run_dp_crem, run_dp_rem, run_parametric_crem, run_parametric_rem, translog_design, translog_restore
from .sim import SimScenario, run_replications
from .sur import elasticity_chain, leontief_system, run_dp_sur, run_parametric_sur

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

MCMC_KEYS = {"n_sweeps": int, "burn_in": int, "thin": int, "seed": int, "k_max_frac": float,
             "tau": float, "grid_size": int, "alpha": float}
SCENARIO_KEYS = {"model": str, "error_family": str, "df": float, "N": int, "T": int, "R": int,
                 "correlation": float, "lognormal_sigma": float}
PRIOR_KEYS = {"method", "beta_precision"}
SUR_KEYS = PRIOR_KEYS | {"design", "intercept", "iw_nu", "iw_scale", "prices", "inputs", "output", "trend", "factors"}
PANEL_KEYS = PRIOR_KEYS | {"design", "y", "x", "id", "t", "which", "composite", "ig_a", "ig_b", "u_ig_a", "u_ig_b",
                           "cost", "prices", "outputs", "intercept"}


def _convert(key, value, kind):
    try:
        if kind is float and str(value).strip().lower() in ("inf", "infinity"):
            return math.inf
        return kind(value)
    except ValueError:
        raise ValidationError(f"{key}: cannot convert {value!r} to {kind.__name__}") from None


def mcmc_config(cfg: dict) -> McmcConfig:
    kw = {k: _convert(k, cfg[k], MCMC_KEYS[k]) for k in MCMC_KEYS if k in cfg}
    if "alpha" in kw:
        a = kw.pop("alpha")
        if not a > 0:
            raise ValidationError("alpha must be positive")
        kw["alpha"] = AlphaConfig.fixed(a)
    return McmcConfig(**kw)


def _check_keys(cfg, allowed, what):
    unknown = sorted(set(cfg) - set(allowed) - set(MCMC_KEYS))
    unknown = [k for k in unknown if not k.startswith("eq.")]
    if unknown:
        raise ValidationError(f"unknown {what} keys: {', '.join(unknown)}")


def _method(cfg):
    m = cfg.get("method", "dp")
    if m not in ("dp", "parametric"):
        raise ValidationError("method must be 'dp' or 'parametric'")
    return m


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _write_outputs(out, archive: ChainArchive, cfg: dict):
    out = Path(out)
    save_archive(out / "chains.csv", archive)
    rows = summarize_chains(archive)
    atomic_write(out / "summary.csv", rows_to_csv(rows, {"config_hash": archive.meta["config_hash"]}))
    atomic_write(out / "config.txt", format_kv(cfg))


def _meta(cfg, mcmc, data_path):
    return {"config_hash": config_hash(cfg), "seed": mcmc.seed, "data_hash": _file_hash(data_path),
            "kept": mcmc.n_kept, "version": __version__}


def cmd_fit_sur(args) -> int:
    cfg = read_kv(args.config)
    cfg.setdefault("command", "fit-sur")
    _check_keys(cfg, SUR_KEYS | {"command"}, "fit-sur")
    mcmc = mcmc_config(cfg)
    design = cfg.get("design", "linear")
    extra = {}
    if design == "leontief":
        table = read_table(args.data)
        prices = _split(cfg.get("prices", ""))
        inputs = _split(cfg.get("inputs", ""))
        if not prices or len(prices) != len(inputs) or "output" not in cfg:
            raise ValidationError("leontief design needs prices, inputs (same length) and output")
        missing = [c for c in prices + inputs + [cfg["output"]] + _split(cfg.get("trend", "")) if c not in table]
        if missing:
            raise MissingColumn(f"{args.data}: missing column {missing[0]!r}")
        P = np.column_stack([table[c] for c in prices])
        Xin = np.column_stack([table[c] for c in inputs])
        trend = table[cfg["trend"]] if cfg.get("trend") else None
        factors = _split(cfg.get("factors", "")) or inputs
        data = leontief_system(P, Xin, table[cfg["output"]], trend, factors)
    elif design == "linear":
        data = load_csv(args.data, "system", cfg)
    else:
        raise ValidationError(f"unknown SUR design {design!r}")
    p = sum(data.sizes)
    prior = BetaPrior.weak(p, _convert("beta_precision", cfg.get("beta_precision", "1e-6"), float))
    m = data.n_eq
    nu = _convert("iw_nu", cfg.get("iw_nu", m + 2), float)
    scale = _convert("iw_scale", cfg.get("iw_scale", "1"), float)
    iw = InverseWishart(nu, scale * np.eye(m))
    if _method(cfg) == "dp":
        chains = run_dp_sur(data, prior, iw, mcmc)
    else:
        chains = run_parametric_sur(data, prior, iw, mcmc)
    if design == "leontief":
        shares = data.y.mean(axis=0)
        pbar = P.mean(axis=0)
        E = elasticity_chain(chains, pbar, shares, trend=trend is not None)
        for k, fk in enumerate(factors):
            for s, fs in enumerate(factors):
                extra[f"e_{fk}{fs}"] = E[:, k, s]
    archive = ChainArchive.from_chains(chains, _meta(cfg, mcmc, args.data), extra)
    _write_outputs(args.out, archive, cfg)
    return EXIT_OK


def _panel_data(cfg, path):
    design = cfg.get("design", "linear")
    if design == "linear":
        return load_csv(path, "panel", cfg), None
    if design != "translog":
        raise ValidationError(f"unknown panel design {design!r}")
    table = read_table(path)
    id_col, t_col = cfg.get("id", "id"), cfg.get("t", "t")
    ids, periods, index = panel_grid(table, id_col, t_col, path)
    prices, outputs = _split(cfg.get("prices", "")), _split(cfg.get("outputs", ""))
    if len(prices) < 2 or not outputs or "cost" not in cfg:
        raise ValidationError("translog design needs cost, at least two prices and one output")
    for c in prices + outputs + [cfg["cost"]]:
        if c not in table:
            raise MissingColumn(f"{path}: missing column {c!r}")
    flat = index.reshape(-1)
    resp, cols, names = translog_design(table[cfg["cost"]][flat], np.column_stack([table[c][flat] for c in prices]),
                                        np.column_stack([table[c][flat] for c in outputs]), prices, outputs)
    N, T = index.shape
    if _as_bool(cfg.get("intercept", "false")):
        cols = np.column_stack([np.ones(len(resp)), cols])
        names = ["const"] + names
    data = PanelData(resp.reshape(N, T), cols.reshape(N, T, -1), names, list(ids), list(periods))
    return data, (prices, outputs)


def cmd_fit_panel(args, crem: bool) -> int:
    cfg = read_kv(args.config)
    cfg.setdefault("command", "fit-crem" if crem else "fit-rem")
    _check_keys(cfg, PANEL_KEYS | {"command"}, cfg["command"])
    mcmc = mcmc_config(cfg)
    data, translog = _panel_data(cfg, args.data)
    which = []
    if crem:
        which = _split(cfg["which"]) if "which" in cfg else [n for n in data.names if n != "const"]
    K = data.n_regressors + len(which)
    prior = BetaPrior.weak(K, _convert("beta_precision", cfg.get("beta_precision", "1e-6"), float))
    g_eta = InverseGamma(_convert("ig_a", cfg.get("ig_a", 3), float), _convert("ig_b", cfg.get("ig_b", 2), float))
    g_u = InverseGamma(_convert("u_ig_a", cfg.get("u_ig_a", 3), float), _convert("u_ig_b", cfg.get("u_ig_b", 2), float))
    composite = cfg.get("composite", "prior")
    if _method(cfg) == "dp":
        if crem:
            chains = run_dp_crem(data, which, prior, (g_u, g_eta), mcmc, composite=composite)
        else:
            chains = run_dp_rem(data, prior, (g_u, g_eta), mcmc, composite=composite)
    elif crem:
        chains = run_parametric_crem(data, which, prior, (g_eta, g_u), mcmc, composite=composite)
    else:
        chains = run_parametric_rem(data, prior, (g_eta, g_u), mcmc, composite=composite)
    extra = {}
    if translog is not None:
        prices, outputs = translog
        full = [translog_restore(dict(zip(chains.names, b)), prices, outputs) for b in chains.beta]
        for key in full[0]:
            if key not in chains.names:
                extra[key] = np.array([f[key] for f in full])
    archive = ChainArchive.from_chains(chains, _meta(cfg, mcmc, args.data), extra)
    _write_outputs(args.out, archive, cfg)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = read_kv(args.scenario)
    cfg.setdefault("command", "simulate")
    _check_keys(cfg, set(SCENARIO_KEYS) | {"command"}, "scenario")
    skw = {k: _convert(k, cfg[k], SCENARIO_KEYS[k]) for k in SCENARIO_KEYS if k in cfg}
    skw["seed"] = _convert("seed", cfg.get("seed", 0), int)
    scn = SimScenario(**skw)
    mcmc = mcmc_config(cfg)
    table = run_replications(scn, mcmc)
    h = config_hash(cfg)
    out = Path(args.out)
    atomic_write(out / "summary.csv", rows_to_csv(
        [{k: (v[j] if k == "name" else float(v[j])) for k, v in table.columns().items()} for j in range(len(table.names))],
        {"config_hash": h, "R": scn.R, "delta_pct": "mean of per-replication values",
         "delta_pct_of_means": "from averaged s.d. columns"}))
    reps = {}
    for stat in ("mean_dp", "mean_param", "sd_dp", "sd_param"):
        arr = table._stack(stat)
        for j, name in enumerate(table.names):
            reps[f"{stat}[{name}]"] = arr[:, j]
    for j, name in enumerate(table.names):
        reps[f"delta_pct[{name}]"] = table.delta_per_replication[:, j]
    atomic_write(out / "replications.csv", table_to_csv(reps, {"config_hash": h}))
    atomic_write(out / "config.txt", format_kv(cfg))
    return EXIT_OK


def cmd_summarize(args) -> int:
    archive = load_archive(args.chains)
    recorded = archive.meta.get("config_hash")
    cfg_path = Path(args.config) if args.config else Path(args.chains).with_name("config.txt")
    if args.config or cfg_path.exists():
        actual = config_hash(read_kv(cfg_path))
        if recorded != actual:
            raise ValidationError(f"archive config hash {recorded} does not match {cfg_path} ({actual})")
    levels = [float(x) for x in _split(args.levels)]
    meta = {"config_hash": recorded}
    if args.histogram:
        text = rows_to_csv(export_histogram(archive, args.histogram, args.bins), meta)
    else:
        text = rows_to_csv(summarize_chains(archive, levels), meta)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpgls", description="Dirichlet-process GLS estimators for SUR and panel models")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", help="run a simulation cell and write its summary table")
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    for name in ("fit-sur", "fit-rem", "fit-crem"):
        f = sub.add_parser(name, help=f"{name[4:].upper()} fit of a CSV dataset")
        f.add_argument("--data", required=True)
        f.add_argument("--config", required=True)
        f.add_argument("--out", required=True)
    m = sub.add_parser("summarize", help="posterior summaries of a chain archive")
    m.add_argument("--chains", required=True)
    m.add_argument("--levels", default="0.025,0.5,0.975")
    m.add_argument("--config", help="config file to verify against the archive's hash")
    m.add_argument("--histogram", metavar="PARAM", help="emit histogram bins for one parameter instead")
    m.add_argument("--bins", type=int, default=20)
    m.add_argument("--out", help="write to this file instead of stdout")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "fit-sur": cmd_fit_sur,
        "fit-rem": lambda a: cmd_fit_panel(a, crem=False),
        "fit-crem": lambda a: cmd_fit_panel(a, crem=True),
        "summarize": cmd_summarize,
    }
    return handlers[args.command](args)


def main(argv=None) -> int:
    try:
        return run(argv)
    except ReplicationError as exc:
        print(f"dpgls: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc.cause, ArithmeticError) else EXIT_VALIDATION
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"dpgls: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, ValueError, OSError) as exc:
        print(f"dpgls: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DpglsError as exc:
        print(f"dpgls: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
