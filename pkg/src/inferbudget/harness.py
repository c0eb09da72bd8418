"""Dataset I/O, metrics, splits, and experiment orchestration.

Datasets are JSONL on disk with a JSON manifest; configs are versioned
JSON; metrics land in CSV and budget priors in CSV plus self-contained SVG
bar charts.  Every artifact is a pure function of (config, seed).
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .core import (
    BudgetGrid,
    BudgetPrior,
    ConfigError,
    DataError,
    maze_grid,
    mcts_grid,
    rsa_grid,
)
from . import families
from . import fitting as fitmod
from . import maze as mz
from . import mcts as mc
from . import rsa as rs

SCHEMA_VERSION = 1


@dataclass
class Dataset:
    """Records grouped by subpopulation, plus the environment pool."""

    domain: str                      # maze | rsa | game
    items: list                      # Trajectory | RsaRound | GameMove
    extras: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.domain not in ("maze", "rsa", "game"):
            raise DataError(f"unknown domain {self.domain!r}")
        subs = sorted({self._subpop(it) for it in self.items})
        if subs and subs != list(range(len(subs))):
            raise DataError("subpopulation ids must be dense from 0")
        self._validate_actions()

    @staticmethod
    def _subpop(item) -> int:
        return item.subpop_id

    def _validate_actions(self):
        if self.domain == "maze":
            mazes = self.extras["mazes"]
            for i, tr in enumerate(self.items):
                pos = tr.positions[0]
                for a in tr.actions:
                    if a not in mazes[tr.maze_id].legal_actions(pos):
                        raise DataError(f"trajectory {i}: illegal action {a} at {pos}")
                    pos = mazes[tr.maze_id].step(pos, a)
        elif self.domain == "rsa":
            games = self.extras["games"]
            for i, rr in enumerate(self.items):
                g = games[rr.game_id]
                if not (0 <= rr.utterance_index < g.n_utterances
                        and 0 <= rr.target_index < g.n_targets):
                    raise DataError(f"round {i}: index out of range")
        else:
            for i, mv in enumerate(self.items):
                if mv.board[mv.action] != ".":
                    raise DataError(f"move {i}: cell {mv.action} occupied")

    @property
    def n_subpops(self) -> int:
        return 1 + max((self._subpop(it) for it in self.items), default=-1)

    def by_subpop(self) -> dict[int, list]:
        groups: dict[int, list] = {}
        for it in self.items:
            groups.setdefault(self._subpop(it), []).append(it)
        return groups

    def maze_records(self):
        recs = []
        for tr in self.items:
            for pos, a in tr.pairs():
                recs.append((tr.maze_id, pos, a, tr.subpop_id))
        return recs

    @property
    def n_records(self) -> int:
        if self.domain == "maze":
            return sum(len(tr.actions) for tr in self.items)
        return len(self.items)


def split_dataset(ds: Dataset, seed: int, fractions=(0.8, 0.1, 0.1)):
    """Deterministic stratified split; every subpopulation lands in each part."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError("split fractions must sum to 1")
    rng = np.random.default_rng(seed)
    parts: list[list] = [[], [], []]
    groups = ds.by_subpop()
    for sub in sorted(groups):
        items = groups[sub]
        order = rng.permutation(len(items))
        n = len(items)
        n_train = int(round(fractions[0] * n))
        n_valid = int(round(fractions[1] * n))
        cuts = [0, n_train, n_train + n_valid, n]
        for p in range(3):
            parts[p].extend(items[i] for i in order[cuts[p]:cuts[p + 1]])
    out = []
    for name, items in zip(("train", "valid", "test"), parts):
        prov = dict(ds.provenance)
        prov["split"] = name
        out.append(Dataset(ds.domain, items, ds.extras, prov))
    return tuple(out)


def make_family(ds: Dataset, kind: str = "libm", **kw):
    """Bind a dataset split to a model family."""
    n_subpops = kw.pop("n_subpops", ds.n_subpops)
    if ds.domain == "maze":
        grid = kw.pop("grid", maze_grid(20))
        if kind == "libm":
            return families.MazeLikelihood(ds.extras["mazes"], ds.maze_records(),
                                           grid, n_subpops=n_subpops)
        if kind == "boltzmann":
            return families.MazeBoltzmannLikelihood(
                ds.extras["mazes"], ds.maze_records(), kw.pop("temp_values"),
                n_subpops=n_subpops, committed=kw.pop("committed", False))
    elif ds.domain == "rsa":
        grid = kw.pop("grid", rsa_grid(3))
        if kind == "libm":
            return families.RsaLikelihood(ds.extras["games"], ds.items, grid,
                                          n_subpops=n_subpops,
                                          freeze_theta=kw.pop("freeze_theta", False))
        if kind == "boltzmann":
            return families.RsaBoltzmannLikelihood(
                ds.extras["games"], ds.items, kw.pop("temp_values"),
                n_subpops=n_subpops, freeze_theta=kw.pop("freeze_theta", False))
    elif ds.domain == "game":
        grid = kw.pop("grid", mcts_grid(256))
        if kind == "libm":
            return families.MctsLikelihood(ds.items, kw.pop("params"), grid,
                                           n_subpops=n_subpops,
                                           cache=kw.pop("cache", None))
        if kind == "puct":
            return families.MctsPuctLikelihood(
                ds.items, kw.pop("puct_values"), budget=kw.pop("budget", 256),
                value_fn=kw.pop("value_fn", mc.heuristic_value),
                n_subpops=n_subpops)
    raise ConfigError(f"no family {kind!r} for domain {ds.domain!r}")


@dataclass
class MetricsReport:
    accuracy: float
    mean_nll: float
    per_subpop: dict[int, dict] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise DataError("accuracy must be in [0, 1]")
        if self.mean_nll < 0:
            raise DataError("mean NLL of a discrete model cannot be negative")


def exact_match_accuracy(family, params: fitmod.ModelParams) -> float:
    """Fraction of records whose action is the marginal policy's argmax."""
    if family.n_records == 0:
        return 0.0
    mat = family.state_log_policies(params.theta_raw)
    logw = params.eta_logits - logsumexp(params.eta_logits, axis=1, keepdims=True)
    mix = logsumexp(logw[family.sa_subpop][:, :, None] + mat[family.sa_state],
                    axis=1)
    pred = np.argmax(mix, axis=1)  # ties break toward the lowest index
    hits = (pred == family.sa_action).astype(float)
    return float((family.counts * hits).sum() / family.counts.sum())


def mean_nll(family, params: fitmod.ModelParams) -> float:
    if family.n_records == 0:
        return 0.0
    return fitmod.marginal_nll(family, params) / family.n_records


def metrics_report(family, params: fitmod.ModelParams) -> MetricsReport:
    report = MetricsReport(exact_match_accuracy(family, params),
                           mean_nll(family, params))
    mat = family.state_log_policies(params.theta_raw)
    logw = params.eta_logits - logsumexp(params.eta_logits, axis=1, keepdims=True)
    mix = logsumexp(logw[family.sa_subpop][:, :, None] + mat[family.sa_state],
                    axis=1)
    pred = np.argmax(mix, axis=1)
    lse = logsumexp(logw[family.sa_subpop]
                    + family.sa_tables(params.theta_raw), axis=1)
    for sub in range(family.n_subpops):
        m = family.sa_subpop == sub
        total = family.counts[m].sum()
        if total == 0:
            continue
        acc = float((family.counts[m] * (pred[m] == family.sa_action[m])).sum()
                    / total)
        nll = float(-(family.counts[m] * lse[m]).sum() / total)
        report.per_subpop[sub] = {"accuracy": acc, "mean_nll": nll,
                                  "records": int(total)}
    return report


# ---------------------------------------------------------------- dataset io

def save_dataset(ds: Dataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "domain": ds.domain,
        "n_items": len(ds.items),
        "provenance": ds.provenance,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if ds.domain == "maze":
        (out / "mazes.json").write_text(json.dumps(
            [m.to_dict() for m in ds.extras["mazes"]]) + "\n")
    with (out / "records.jsonl").open("w") as fh:
        for it in ds.items:
            fh.write(json.dumps(_item_to_dict(ds, it)) + "\n")


def _item_to_dict(ds: Dataset, it) -> dict:
    if ds.domain == "maze":
        return {"subpop_id": it.subpop_id, "maze_id": it.maze_id,
                "start": list(it.positions[0]), "actions": it.actions}
    if ds.domain == "rsa":
        game = ds.extras["games"][it.game_id]
        return {"game_id": it.game_id, "subpop_id": it.subpop_id,
                "lexicon": game.lexicon.tolist(),
                "prior": game.target_prior.tolist(),
                "target_index": it.target_index,
                "utterance_index": it.utterance_index}
    return {"subpop_id": it.subpop_id, "state": it.board,
            "action_index": it.action}


def load_dataset(in_dir) -> Dataset:
    src = Path(in_dir)
    manifest = json.loads((src / "manifest.json").read_text())
    domain = manifest["domain"]
    lines = [json.loads(line) for line in
             (src / "records.jsonl").read_text().splitlines() if line]
    extras: dict = {}
    items: list = []
    if domain == "maze":
        mazes = [mz.Maze.from_dict(d) for d in
                 json.loads((src / "mazes.json").read_text())]
        extras["mazes"] = mazes
        for d in lines:
            pos = tuple(d["start"])
            positions = [pos]
            for a in d["actions"]:
                pos = mazes[d["maze_id"]].step(pos, a)
                positions.append(pos)
            items.append(mz.Trajectory(d["subpop_id"], d["maze_id"],
                                       positions, list(d["actions"])))
    elif domain == "rsa":
        game_dicts: dict[int, dict] = {}
        for d in lines:
            game_dicts.setdefault(d["game_id"], d)
            items.append(rs.RsaRound(d["game_id"], d["subpop_id"],
                                     d["target_index"], d["utterance_index"]))
        n_games = max(game_dicts) + 1 if game_dicts else 0
        games = [rs.ReferenceGame(np.array(game_dicts[g]["lexicon"]),
                                  np.array(game_dicts[g]["prior"]))
                 for g in range(n_games)]
        extras["games"] = games
    else:
        for d in lines:
            items.append(mc.GameMove(d["subpop_id"], d["state"],
                                     d["action_index"]))
    return Dataset(domain, items, extras, manifest.get("provenance", {}))


# ------------------------------------------------------------------ plotting

def svg_bar_chart(path, labels, values, title="", width=480, height=240) -> None:
    """Minimal self-contained SVG bar chart (values in [0, 1])."""
    values = [float(v) for v in values]
    n = max(len(values), 1)
    pad, base = 36, height - 28
    bar_w = (width - 2 * pad) / n
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<text x="{width / 2}" y="16" text-anchor="middle" '
             f'font-size="13" font-family="sans-serif">{title}</text>',
             f'<line x1="{pad}" y1="{base}" x2="{width - pad}" y2="{base}" '
             f'stroke="black"/>']
    vmax = max(max(values, default=1.0), 1e-9)
    for i, (lab, v) in enumerate(zip(labels, values)):
        h = (base - 30) * v / vmax
        x = pad + i * bar_w
        parts.append(f'<rect x="{x + 2:.2f}" y="{base - h:.2f}" '
                     f'width="{bar_w - 4:.2f}" height="{h:.2f}" fill="#4878a8"/>')
        parts.append(f'<text x="{x + bar_w / 2:.2f}" y="{base + 14}" '
                     f'text-anchor="middle" font-size="10" '
                     f'font-family="sans-serif">{lab}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def write_csv(path, rows, header) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def read_csv(path):
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [dict(zip(header, row)) for row in reader]


def write_budget_posterior_csv(path, params: fitmod.ModelParams,
                               budget_values) -> None:
    rows = []
    probs = params.prior_probs()
    for sub in range(probs.shape[0]):
        for k, b in enumerate(budget_values):
            rows.append([sub, b, f"{probs[sub, k]:.12g}"])
    write_csv(path, rows, ["subpop", "budget", "probability"])


# ------------------------------------------------------------- config schema

def _require(cfg: dict, key: str, types, path: str):
    if key not in cfg:
        raise ConfigError(f"{path}.{key}: missing required key")
    if not isinstance(cfg[key], types):
        tn = types.__name__ if isinstance(types, type) else \
            "/".join(t.__name__ for t in types)
        raise ConfigError(f"{path}.{key}: expected {tn}, "
                          f"got {type(cfg[key]).__name__}")
    return cfg[key]


def validate_config(cfg: dict) -> dict:
    """Checks the versioned experiment-config schema; errors carry paths."""
    if not isinstance(cfg, dict):
        raise ConfigError("$: config must be a JSON object")
    version = _require(cfg, "version", int, "$")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"$.version: unsupported version {version}")
    kind = _require(cfg, "kind", str, "$")
    _require(cfg, "seed", int, "$")
    if kind == "maze":
        for key in ("width", "height", "num_exits", "num_mazes",
                    "trajectories_per_subpop"):
            _require(cfg, key, int, "$")
        _require(cfg, "true_rewards", list, "$")
        _require(cfg, "subpop_budgets", list, "$")
        if len(cfg["true_rewards"]) != cfg["num_exits"]:
            raise ConfigError("$.true_rewards: length must equal num_exits")
    elif kind == "rsa":
        _require(cfg, "rounds_per_subpop", int, "$")
        if cfg.get("game_pool", "random") == "random":
            _require(cfg, "num_games", int, "$")
        elif cfg["game_pool"] != "designed":
            raise ConfigError("$.game_pool: must be 'random' or 'designed'")
        priors = _require(cfg, "subpop_priors", list, "$")
        for i, p in enumerate(priors):
            if not isinstance(p, list) or abs(sum(p) - 1.0) > 1e-9:
                raise ConfigError(f"$.subpop_priors[{i}]: must be a "
                                  "probability vector")
    elif kind == "game":
        _require(cfg, "games_per_subpop", int, "$")
        _require(cfg, "subpop_budgets", list, "$")
    else:
        raise ConfigError(f"$.kind: unknown kind {kind!r}")
    return cfg


def _fit_config(cfg: dict) -> fitmod.FitConfig:
    fc = cfg.get("fit", {})
    return fitmod.FitConfig(
        learning_rate=fc.get("learning_rate", 0.5),
        max_iters=fc.get("max_iters", 150),
        tol=fc.get("tol", 1e-6),
        seed=cfg.get("seed", 0),
        deterministic=cfg.get("deterministic", True),
        l2_eta=fc.get("l2_eta", 0.0),
        lr_sweep=cfg.get("lr_sweep"),
    )


# ------------------------------------------------------------ data generation

def generate_maze_dataset(cfg: dict) -> Dataset:
    seed = cfg["seed"]
    rng = np.random.default_rng(seed)
    grid = maze_grid(cfg.get("grid_max", 20))
    mazes = [mz.generate_maze(int(s), cfg["width"], cfg["height"],
                              cfg["num_exits"])
             for s in rng.integers(2 ** 31, size=cfg["num_mazes"])]
    theta = mz.MazeRewards.from_effective(cfg["true_rewards"])
    budgets = cfg["subpop_budgets"]
    max_steps = int(cfg.get("max_steps_factor", 4) * cfg["width"] * cfg["height"])
    caches = [dict() for _ in mazes]
    items = []
    for i, b in enumerate(budgets):
        prior = BudgetPrior.point_mass(grid, b, subpopulation_id=i)
        for t in range(cfg["trajectories_per_subpop"]):
            mid = t % len(mazes)
            maze = mazes[mid]
            while True:
                pos = (int(rng.integers(cfg["height"])),
                       int(rng.integers(cfg["width"])))
                if not maze.is_exit(pos):
                    break
            traj = mz.rollout(maze, theta, prior, pos,
                              seed=int(rng.integers(2 ** 31)),
                              max_steps=max_steps, grid=grid, maze_id=mid,
                              policy_cache=caches[mid])
            items.append(traj)
    return Dataset("maze", items, {"mazes": mazes},
                   {"seed": seed, "generator": {k: cfg[k] for k in
                    ("width", "height", "num_exits", "num_mazes",
                     "subpop_budgets", "trajectories_per_subpop",
                     "true_rewards")}})


def generate_rsa_dataset(cfg: dict) -> Dataset:
    seed = cfg["seed"]
    grid = rsa_grid(cfg.get("grid_max", 3))
    priors = []
    for i, p in enumerate(cfg["subpop_priors"]):
        logits = np.log(np.clip(np.asarray(p, dtype=float), 1e-30, None))
        priors.append(BudgetPrior(logits, subpopulation_id=i))
    pool = (rs.identifiable_game_pool()
            if cfg.get("game_pool") == "designed" else None)
    games, rounds = rs.generate_population(
        seed, cfg.get("num_games", 0), len(priors), priors,
        cfg["rounds_per_subpop"], grid,
        num_utterances=cfg.get("num_utterances", 3),
        num_targets=cfg.get("num_targets", 3),
        ambiguity=cfg.get("ambiguity", 0.35),
        games=pool)
    return Dataset("rsa", rounds, {"games": games},
                   {"seed": seed, "generator": {
                       "game_pool": cfg.get("game_pool", "random"),
                       "num_games": len(games),
                       "rounds_per_subpop": cfg["rounds_per_subpop"],
                       "subpop_priors": cfg["subpop_priors"]}})


def generate_game_dataset(cfg: dict, cache: dict | None = None) -> Dataset:
    seed = cfg["seed"]
    grid = mcts_grid(cfg.get("grid_max", 256))
    params = mc.MctsParams(beta_puct=cfg.get("beta_puct", 1.0))
    priors = [BudgetPrior.point_mass(grid, b, subpopulation_id=i)
              for i, b in enumerate(cfg["subpop_budgets"])]
    moves = mc.generate_games(seed, priors, cfg["games_per_subpop"], params,
                              grid, cache=cache)
    return Dataset("game", moves, {},
                   {"seed": seed, "generator": {k: cfg[k] for k in
                    ("games_per_subpop", "subpop_budgets")}})


def generate_dataset(cfg: dict) -> Dataset:
    validate_config(cfg)
    if cfg["kind"] == "maze":
        return generate_maze_dataset(cfg)
    if cfg["kind"] == "rsa":
        return generate_rsa_dataset(cfg)
    return generate_game_dataset(cfg)


# ------------------------------------------------------------- experiments

def _fit_with_optional_sweep(family, valid_family, config, rates,
                             fit_fn=fitmod.fit, **kw):
    if rates:
        return fitmod.sweep_learning_rates(family, config, rates,
                                           valid_family=valid_family,
                                           fit_fn=fit_fn, **kw)
    res = fit_fn(family, config, **kw)
    res.valid_nll = float(fitmod.marginal_nll(valid_family, res.params)) \
        if valid_family is not None else None
    return res


def run_experiment(cfg: dict, out_dir) -> dict:
    """generate -> split -> fit model variants -> evaluate -> artifacts."""
    validate_config(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True)
                                     + "\n")
    t0 = time.perf_counter()
    cache: dict = {}
    ds = generate_game_dataset(cfg, cache=cache) if cfg["kind"] == "game" \
        else generate_dataset(cfg)
    save_dataset(ds, out / "dataset")
    train, valid, test = split_dataset(ds, cfg["seed"],
                                       tuple(cfg.get("split", (0.8, 0.1, 0.1))))
    config = _fit_config(cfg)
    rates = cfg.get("lr_sweep")
    fits: dict[str, fitmod.FitResult] = {}
    eval_families: dict[str, object] = {}

    if cfg["kind"] == "maze":
        grid = maze_grid(cfg.get("grid_max", 20))
        fam_tr = make_family(train, "libm", grid=grid)
        fam_va = make_family(valid, "libm", grid=grid, n_subpops=ds.n_subpops)
        fam_te = make_family(test, "libm", grid=grid, n_subpops=ds.n_subpops)
        fits["libm"] = _fit_with_optional_sweep(fam_tr, fam_va, config, rates)
        eval_families["libm"] = fam_te
        temps = cfg.get("temp_grid", [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0])
        committed = cfg.get("boltzmann_committed", False)
        bz_tr = make_family(train, "boltzmann", temp_values=temps,
                            committed=committed)
        bz_va = make_family(valid, "boltzmann", temp_values=temps,
                            committed=committed, n_subpops=ds.n_subpops)
        bz_te = make_family(test, "boltzmann", temp_values=temps,
                            committed=committed, n_subpops=ds.n_subpops)
        fits["boltzmann"] = _fit_with_optional_sweep(
            bz_tr, bz_va, config, rates, fit_fn=fitmod.fit_boltzmann)
        eval_families["boltzmann"] = bz_te
        for b in cfg.get("fixed_budgets", [0, 20]):
            name = f"fixed_{b}"
            fits[name] = _fit_with_optional_sweep(
                fam_tr, fam_va, config, rates, fit_fn=fitmod.fixed_budget_baseline,
                budget=b)
            eval_families[name] = fam_te
    elif cfg["kind"] == "rsa":
        grid = rsa_grid(cfg.get("grid_max", 3))
        freeze = cfg.get("freeze_lexicon", False)
        fam_tr = make_family(train, "libm", grid=grid, freeze_theta=freeze)
        fam_va = make_family(valid, "libm", grid=grid, freeze_theta=freeze,
                             n_subpops=ds.n_subpops)
        fam_te = make_family(test, "libm", grid=grid, freeze_theta=freeze,
                             n_subpops=ds.n_subpops)
        fits["libm"] = _fit_with_optional_sweep(fam_tr, fam_va, config, rates)
        eval_families["libm"] = fam_te
        temps = cfg.get("temp_grid", [0.0, 0.5, 1.0, 2.0, 4.0])
        bz_tr = make_family(train, "boltzmann", temp_values=temps,
                            freeze_theta=freeze)
        bz_va = make_family(valid, "boltzmann", temp_values=temps,
                            freeze_theta=freeze, n_subpops=ds.n_subpops)
        bz_te = make_family(test, "boltzmann", temp_values=temps,
                            freeze_theta=freeze, n_subpops=ds.n_subpops)
        fits["boltzmann"] = _fit_with_optional_sweep(
            bz_tr, bz_va, config, rates, fit_fn=fitmod.fit_boltzmann)
        eval_families["boltzmann"] = bz_te
    else:
        grid = mcts_grid(cfg.get("grid_max", 256))
        params = mc.MctsParams(beta_puct=cfg.get("beta_puct", 1.0))
        fam_tr = make_family(train, "libm", grid=grid, params=params,
                             cache=cache)
        fam_va = make_family(valid, "libm", grid=grid, params=params,
                             cache=cache, n_subpops=ds.n_subpops)
        fam_te = make_family(test, "libm", grid=grid, params=params,
                             cache=cache, n_subpops=ds.n_subpops)
        fits["libm"] = _fit_with_optional_sweep(fam_tr, fam_va, config, rates)
        eval_families["libm"] = fam_te
        if cfg.get("run_puct_baseline", False):
            pv = cfg.get("puct_grid", [0.1, 0.3, 1.0, 3.0, 10.0])
            pz_tr = make_family(train, "puct", puct_values=pv)
            pz_va = make_family(valid, "puct", puct_values=pv,
                                n_subpops=ds.n_subpops)
            pz_te = make_family(test, "puct", puct_values=pv,
                                n_subpops=ds.n_subpops)
            fits["puct"] = _fit_with_optional_sweep(
                pz_tr, pz_va, config, rates, fit_fn=fitmod.fit_boltzmann,
                budget_kind="puct")
            eval_families["puct"] = pz_te

    plots = out / "plots"
    plots.mkdir(exist_ok=True)
    metric_rows = []
    reports = {}
    for name, res in fits.items():
        (out / f"fit_{name}.json").write_text(
            json.dumps(res.to_dict(), indent=2) + "\n")
        fam = eval_families[name]
        report = metrics_report(fam, res.params)
        reports[name] = report
        metric_rows.append([name, "test", f"{report.accuracy:.6f}",
                            f"{report.mean_nll:.6f}", fam.n_records])
        values = getattr(fam, "budget_values")
        write_budget_posterior_csv(out / f"budget_posterior_{name}.csv",
                                   res.params, values)
        probs = res.params.prior_probs()
        for sub in range(probs.shape[0]):
            svg_bar_chart(plots / f"{name}_subpop{sub}.svg",
                          [f"{v:g}" for v in values], probs[sub],
                          title=f"{name}: subpopulation {sub}")
    write_csv(out / "metrics.csv", metric_rows,
              ["model", "split", "accuracy", "mean_nll", "records"])
    summary = {
        "kind": cfg["kind"],
        "seed": cfg["seed"],
        "runtime_seconds": time.perf_counter() - t0,
        "models": {name: {"accuracy": reports[name].accuracy,
                          "mean_nll": reports[name].mean_nll,
                          "train_nll": fits[name].nll,
                          "per_subpop": reports[name].per_subpop}
                   for name in fits},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2,
                                                 sort_keys=True) + "\n")
    return {"dataset": ds, "splits": (train, valid, test), "fits": fits,
            "reports": reports, "eval_families": eval_families,
            "summary": summary}


# Learning-rate sweep defaults (maze) used by the `sweep` CLI subcommand.
MAZE_LR_SWEEP = [1.0, 0.5, 1e-1, 0.05, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 5e-5]
