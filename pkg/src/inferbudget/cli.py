"""Command-line front end.

Subcommands: ``gen maze|rsa|game``, ``fit``, ``eval``, ``sweep``,
``experiment``, ``plot``.  Failures print one machine-readable JSON object
to stderr and exit nonzero (2 for config/data problems, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import families
from . import fitting as fitmod
from . import harness
from . import mcts as mc
from .core import ConfigError, DataError, OptimizationError, ParameterError


def _load_config(path) -> dict:
    if path is None:
        raise ConfigError("--config is required for this subcommand")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.deterministic:
        cfg["deterministic"] = True
    return cfg


def _out_dir(args) -> Path:
    if args.out is None:
        raise ConfigError("--out is required for this subcommand")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _family_for(cfg: dict, ds: harness.Dataset, model: str):
    kind = cfg["kind"]
    if kind == "maze":
        grid = harness.maze_grid(cfg.get("grid_max", 20))
        if model == "boltzmann":
            return harness.make_family(
                ds, "boltzmann",
                temp_values=cfg.get("temp_grid", [0.0, 0.5, 1.0, 2.0, 4.0]),
                committed=cfg.get("boltzmann_committed", False))
        return harness.make_family(ds, "libm", grid=grid)
    if kind == "rsa":
        grid = harness.rsa_grid(cfg.get("grid_max", 3))
        freeze = cfg.get("freeze_lexicon", False)
        if model == "boltzmann":
            return harness.make_family(
                ds, "boltzmann", temp_values=cfg.get("temp_grid",
                                                     [0.0, 0.5, 1.0, 2.0, 4.0]),
                freeze_theta=freeze)
        return harness.make_family(ds, "libm", grid=grid, freeze_theta=freeze)
    grid = harness.mcts_grid(cfg.get("grid_max", 256))
    if model == "puct":
        return harness.make_family(
            ds, "puct", puct_values=cfg.get("puct_grid", [0.1, 0.3, 1.0, 3.0, 10.0]))
    return harness.make_family(
        ds, "libm", grid=grid,
        params=mc.MctsParams(beta_puct=cfg.get("beta_puct", 1.0)))


def _load_or_generate(cfg: dict, dataset_path) -> harness.Dataset:
    if dataset_path:
        return harness.load_dataset(dataset_path)
    return harness.generate_dataset(cfg)


def cmd_gen(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    if cfg.get("kind") != args.domain:
        raise ConfigError(
            f"$.kind: config says {cfg.get('kind')!r}, subcommand wants "
            f"{args.domain!r}")
    ds = harness.generate_dataset(cfg)
    harness.save_dataset(ds, _out_dir(args))
    print(f"wrote {len(ds.items)} items ({ds.n_records} records) "
          f"to {args.out}")
    return 0


def _run_fit(args, rates=None) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    harness.validate_config(cfg)
    model = cfg.get("model", "libm")
    ds = _load_or_generate(cfg, args.dataset)
    train, valid, _test = harness.split_dataset(
        ds, cfg["seed"], tuple(cfg.get("split", (0.8, 0.1, 0.1))))
    fam_tr = _family_for(cfg, train, model)
    fam_va = _family_for(cfg, valid, model)
    config = harness._fit_config(cfg)
    fit_fn = fitmod.fit_boltzmann if model in ("boltzmann", "puct") else fitmod.fit
    kw = {}
    if model.startswith("fixed_"):
        fit_fn = fitmod.fixed_budget_baseline
        kw["budget"] = float(model.split("_", 1)[1])
    if rates:
        result = fitmod.sweep_learning_rates(fam_tr, config, rates,
                                             valid_family=fam_va,
                                             fit_fn=fit_fn, **kw)
    else:
        result = fit_fn(fam_tr, config, **kw)
        result.valid_nll = float(fitmod.marginal_nll(fam_va, result.params))
    out = _out_dir(args)
    (out / "fitresult.json").write_text(
        json.dumps(result.to_dict(), indent=2) + "\n")
    harness.write_budget_posterior_csv(out / "budget_posterior.csv",
                                       result.params, fam_tr.budget_values)
    print(f"fit {model}: train NLL {result.nll:.4f}, "
          f"valid NLL {result.valid_nll:.4f}, {result.n_iters} iterations")
    return 0


def cmd_fit(args) -> int:
    return _run_fit(args, rates=None)


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    rates = cfg.get("lr_sweep") or harness.MAZE_LR_SWEEP
    return _run_fit(args, rates=rates)


def cmd_eval(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    harness.validate_config(cfg)
    model = cfg.get("model", "libm")
    ds = _load_or_generate(cfg, args.dataset)
    _train, _valid, test = harness.split_dataset(
        ds, cfg["seed"], tuple(cfg.get("split", (0.8, 0.1, 0.1))))
    fam = _family_for(cfg, test, model)
    fr = json.loads(Path(args.fitresult).read_text())
    params = fitmod.ModelParams(
        None if fr["theta_raw"] is None else np.array(fr["theta_raw"]),
        np.array(fr["eta_logits"]), fr.get("budget_kind", "runtime"))
    report = harness.metrics_report(fam, params)
    out = _out_dir(args)
    rows = [[model, "test", f"{report.accuracy:.6f}",
             f"{report.mean_nll:.6f}", fam.n_records]]
    for sub, stats in sorted(report.per_subpop.items()):
        rows.append([f"{model}/subpop{sub}", "test",
                     f"{stats['accuracy']:.6f}", f"{stats['mean_nll']:.6f}",
                     stats["records"]])
    harness.write_csv(out / "metrics.csv", rows,
                      ["model", "split", "accuracy", "mean_nll", "records"])
    print(f"eval {model}: accuracy {report.accuracy:.4f}, "
          f"mean NLL {report.mean_nll:.4f}")
    return 0


def cmd_experiment(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    result = harness.run_experiment(cfg, _out_dir(args))
    for name, info in sorted(result["summary"]["models"].items()):
        print(f"{name}: accuracy {info['accuracy']:.4f}, "
              f"mean NLL {info['mean_nll']:.4f}")
    return 0


def cmd_plot(args) -> int:
    src = Path(args.posterior)
    if not src.exists():
        raise ConfigError(f"posterior CSV not found: {args.posterior}")
    _header, rows = harness.read_csv(src)
    by_sub: dict[str, list] = {}
    for row in rows:
        by_sub.setdefault(row["subpop"], []).append(row)
    out = _out_dir(args)
    for sub, entries in sorted(by_sub.items()):
        harness.svg_bar_chart(
            out / f"budget_prior_subpop{sub}.svg",
            [e["budget"] for e in entries],
            [float(e["probability"]) for e in entries],
            title=f"subpopulation {sub}")
    print(f"wrote {len(by_sub)} charts to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inferbudget",
        description="Fit reward parameters and latent budget priors to "
                    "agent behavior.")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--config", default=None, help="path to a JSON config")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--deterministic", action="store_true",
                        help="force canonical reduction order")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset")
    p_gen.add_argument("domain", choices=["maze", "rsa", "game"])
    p_gen.set_defaults(func=cmd_gen)

    for name, func, extra in (("fit", cmd_fit, True), ("sweep", cmd_sweep, True),
                              ("eval", cmd_eval, True)):
        p = sub.add_parser(name)
        p.add_argument("--dataset", default=None,
                       help="dataset directory (default: generate from config)")
        if name == "eval":
            p.add_argument("--fitresult", required=True,
                           help="fitresult.json from a fit/sweep run")
        p.set_defaults(func=func)

    p_exp = sub.add_parser("experiment", help="full generate/fit/eval pipeline")
    p_exp.set_defaults(func=cmd_experiment)

    p_plot = sub.add_parser("plot", help="render budget-prior SVG bar charts")
    p_plot.add_argument("--posterior", required=True,
                        help="budget_posterior.csv to render")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataError, ParameterError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)},
                  sys.stderr)
        sys.stderr.write("\n")
        return 2
    except OptimizationError as exc:
        json.dump({"error": "OptimizationError", "message": str(exc),
                   "trace": [float(v) for v in exc.trace]}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
