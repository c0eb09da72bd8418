import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from inferbudget.core import BudgetPrior, ConfigError, DataError, maze_grid, mcts_grid
from inferbudget import maze as mz
from inferbudget import mcts as mc
from inferbudget import rsa as rs
from inferbudget.families import MazeLikelihood
from inferbudget.fitting import FitConfig, ModelParams, marginal_nll, fit
from inferbudget.harness import (
    Dataset,
    MetricsReport,
    exact_match_accuracy,
    generate_dataset,
    load_dataset,
    make_family,
    mean_nll,
    metrics_report,
    read_csv,
    run_experiment,
    save_dataset,
    split_dataset,
    svg_bar_chart,
    validate_config,
    write_budget_posterior_csv,
    write_csv,
)

MAZE_CFG = {
    "version": 1, "kind": "maze", "seed": 5,
    "width": 7, "height": 7, "num_exits": 3, "num_mazes": 2,
    "true_rewards": [2.0, 0.6, 1.2],
    "subpop_budgets": [1, 4],
    "trajectories_per_subpop": 12,
    "grid_max": 6,
    "max_steps_factor": 1,
}

RSA_CFG = {
    "version": 1, "kind": "rsa", "seed": 3,
    "num_games": 4, "rounds_per_subpop": 80,
    "subpop_priors": [[1.0, 0.0, 0.0, 0.0], [0.5, 0.0, 0.5, 0.0]],
}

GAME_CFG = {
    "version": 1, "kind": "game", "seed": 2,
    "games_per_subpop": 4,
    "subpop_budgets": [2, 8],
    "grid_max": 8,
}


class TestDataset:
    def test_dense_subpops_required(self):
        tr = mz.Trajectory(2, 0, [(0, 0)], [])
        maze = mz.generate_maze(0, 5, 5, 2)
        with pytest.raises(DataError):
            Dataset("maze", [tr], {"mazes": [maze]})

    def test_action_legality_checked(self):
        maze = mz.generate_maze(0, 5, 5, 2)
        pos = (2, 2)
        bad = [a for a in range(4) if a not in maze.legal_actions(pos)][0]
        tr = mz.Trajectory(0, 0, [pos, maze.step(pos, bad)], [bad])
        with pytest.raises(DataError):
            Dataset("maze", [tr], {"mazes": [maze]})

    def test_n_records_counts_steps(self):
        ds = generate_dataset(MAZE_CFG)
        assert ds.n_records == sum(len(t.actions) for t in ds.items)


class TestSplit:
    def test_partition_disjoint_and_stratified(self):
        ds = generate_dataset(MAZE_CFG)
        train, valid, test = split_dataset(ds, seed=0)
        ids = [id(t) for part in (train, valid, test) for t in part.items]
        assert len(ids) == len(set(ids)) == len(ds.items)
        for part in (train, valid, test):
            assert part.n_subpops == ds.n_subpops  # every subpop present

    def test_deterministic(self):
        ds = generate_dataset(MAZE_CFG)
        a = split_dataset(ds, seed=7)
        b = split_dataset(ds, seed=7)
        for pa, pb in zip(a, b):
            assert [id(x) for x in pa.items] == [id(x) for x in pb.items]

    def test_bad_fractions(self):
        ds = generate_dataset(MAZE_CFG)
        with pytest.raises(ConfigError):
            split_dataset(ds, 0, (0.5, 0.2, 0.2))


class TestMetrics:
    def test_self_consistent_deterministic_model(self):
        # a point-mass deterministic policy predicts its own argmax data
        maze = mz.generate_maze(1, 7, 7, 3)
        theta = mz.MazeRewards.from_effective([3.0, 0.3, 0.3])
        grid = maze_grid(4)
        records = []
        mats = {}
        for r in range(7):
            for c in range(7):
                if maze.is_exit((r, c)):
                    continue
                mat = mz.state_policy_matrix(maze, (r, c), grid, theta, mats)
                records.append((0, (r, c), int(np.argmax(mat[-1])), 0))
        fam = MazeLikelihood([maze], records, grid, n_subpops=1)
        logits = np.zeros((1, len(grid)))
        logits[0, -1] = 200.0
        params = ModelParams(theta.raw, logits)
        assert exact_match_accuracy(fam, params) == 1.0

    def test_uniform_model_analytic_accuracy(self):
        ds = generate_dataset(MAZE_CFG)
        fam = make_family(ds, "libm", grid=maze_grid(6))
        params = ModelParams(np.zeros(3), np.zeros((2, 7)))
        # uniform rows at budget 0 only; force full uniform via eta on row 0
        logits = np.full((2, 7), -40.0)
        logits[:, 0] = 40.0
        params = ModelParams(np.zeros(3), logits)
        acc = exact_match_accuracy(fam, params)
        # argmax of a uniform row is the lowest legal action
        mats = fam.state_log_policies(np.zeros(3))
        hits = total = 0
        for i in range(len(fam.counts)):
            row = mats[fam.sa_state[i], 0]
            pred = int(np.argmax(row))
            hits += fam.counts[i] * (pred == fam.sa_action[i])
            total += fam.counts[i]
        assert acc == pytest.approx(hits / total)

    def test_mean_nll_matches_marginal(self):
        ds = generate_dataset(MAZE_CFG)
        fam = make_family(ds, "libm", grid=maze_grid(6))
        params = ModelParams(np.array([0.5, -0.2, 0.1]),
                             np.zeros((2, 7)))
        assert mean_nll(fam, params) == pytest.approx(
            marginal_nll(fam, params) / fam.n_records, abs=1e-12)

    def test_deterministic_correct_model_zero_nll(self):
        games = [rs.ReferenceGame(np.eye(3))]
        rounds = [rs.RsaRound(0, 0, t, t) for t in range(3)] * 5
        fam = make_family(Dataset("rsa", rounds, {"games": games}),
                          "libm", grid=maze_grid(0), freeze_theta=True)
        params = ModelParams(None, np.zeros((1, 1)))
        assert mean_nll(fam, params) == pytest.approx(0.0, abs=1e-9)
        assert exact_match_accuracy(fam, params) == 1.0

    def test_report_invariants(self):
        with pytest.raises(DataError):
            MetricsReport(accuracy=1.2, mean_nll=0.5)
        with pytest.raises(DataError):
            MetricsReport(accuracy=0.5, mean_nll=-0.1)

    def test_metrics_invariant_to_record_order(self):
        ds = generate_dataset(MAZE_CFG)
        rng = np.random.default_rng(0)
        shuffled = Dataset(ds.domain,
                           [ds.items[i] for i in rng.permutation(len(ds.items))],
                           ds.extras, ds.provenance)
        fam1 = make_family(ds, "libm", grid=maze_grid(6))
        fam2 = make_family(shuffled, "libm", grid=maze_grid(6))
        params = ModelParams(np.zeros(3), np.zeros((2, 7)))
        assert exact_match_accuracy(fam1, params) == \
            exact_match_accuracy(fam2, params)
        assert mean_nll(fam1, params) == mean_nll(fam2, params)


class TestDatasetIO:
    @pytest.mark.parametrize("cfg", [MAZE_CFG, RSA_CFG, GAME_CFG])
    def test_round_trip(self, cfg, tmp_path):
        ds = generate_dataset(cfg)
        save_dataset(ds, tmp_path / "ds")
        again = load_dataset(tmp_path / "ds")
        assert again.domain == ds.domain
        assert len(again.items) == len(ds.items)
        if ds.domain == "maze":
            for a, b in zip(ds.items, again.items):
                assert a.actions == b.actions and a.positions == b.positions
        elif ds.domain == "rsa":
            assert [(r.game_id, r.subpop_id, r.target_index, r.utterance_index)
                    for r in ds.items] == \
                [(r.game_id, r.subpop_id, r.target_index, r.utterance_index)
                 for r in again.items]
            for g1, g2 in zip(ds.extras["games"], again.extras["games"]):
                assert np.array_equal(g1.lexicon, g2.lexicon)
        else:
            assert [(m.subpop_id, m.board, m.action) for m in ds.items] == \
                [(m.subpop_id, m.board, m.action) for m in again.items]

    def test_rsa_record_schema(self, tmp_path):
        ds = generate_dataset(RSA_CFG)
        save_dataset(ds, tmp_path / "ds")
        line = (tmp_path / "ds" / "records.jsonl").read_text().splitlines()[0]
        rec = json.loads(line)
        assert set(rec) == {"game_id", "subpop_id", "lexicon", "prior",
                            "target_index", "utterance_index"}

    def test_game_record_schema(self, tmp_path):
        ds = generate_dataset(GAME_CFG)
        save_dataset(ds, tmp_path / "ds")
        rec = json.loads((tmp_path / "ds" / "records.jsonl")
                         .read_text().splitlines()[0])
        assert set(rec) == {"subpop_id", "state", "action_index"}
        assert len(rec["state"]) == 9


class TestCsvAndSvg:
    def test_csv_round_trip(self, tmp_path):
        rows = [["libm", "test", "0.5", "1.25", 100],
                ["boltzmann", "test", "0.4", "1.5", 100]]
        write_csv(tmp_path / "m.csv", rows,
                  ["model", "split", "accuracy", "mean_nll", "records"])
        header, back = read_csv(tmp_path / "m.csv")
        assert header == ["model", "split", "accuracy", "mean_nll", "records"]
        assert back[0]["model"] == "libm"
        assert float(back[1]["accuracy"]) == 0.4

    def test_posterior_csv_schema(self, tmp_path):
        params = ModelParams(None, np.zeros((2, 3)))
        write_budget_posterior_csv(tmp_path / "p.csv", params, [0, 1, 2])
        header, rows = read_csv(tmp_path / "p.csv")
        assert header == ["subpop", "budget", "probability"]
        assert len(rows) == 6
        total = sum(float(r["probability"]) for r in rows
                    if r["subpop"] == "0")
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_svg_written(self, tmp_path):
        svg_bar_chart(tmp_path / "c.svg", ["0", "1"], [0.3, 0.7], title="t")
        text = (tmp_path / "c.svg").read_text()
        assert text.startswith("<svg") and "rect" in text


class TestConfigValidation:
    def test_missing_key_path(self):
        cfg = dict(MAZE_CFG)
        del cfg["num_mazes"]
        with pytest.raises(ConfigError, match=r"\$\.num_mazes"):
            validate_config(cfg)

    def test_wrong_type_path(self):
        cfg = dict(MAZE_CFG, width="wide")
        with pytest.raises(ConfigError, match=r"\$\.width"):
            validate_config(cfg)

    def test_rewards_length_checked(self):
        cfg = dict(MAZE_CFG, true_rewards=[1.0])
        with pytest.raises(ConfigError, match="true_rewards"):
            validate_config(cfg)

    def test_bad_prior_vector(self):
        cfg = dict(RSA_CFG, subpop_priors=[[0.5, 0.2, 0.0, 0.0]])
        with pytest.raises(ConfigError, match=r"subpop_priors\[0\]"):
            validate_config(cfg)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="kind"):
            validate_config({"version": 1, "kind": "chess", "seed": 0})

    def test_unsupported_version(self):
        with pytest.raises(ConfigError, match="version"):
            validate_config(dict(MAZE_CFG, version=99))


class TestRunExperiment:
    def test_maze_experiment_artifacts(self, tmp_path):
        cfg = dict(MAZE_CFG, fixed_budgets=[0, 6],
                   fit={"learning_rate": 0.5, "max_iters": 8})
        out = tmp_path / "exp"
        result = run_experiment(cfg, out)
        assert set(result["fits"]) == {"libm", "boltzmann", "fixed_0",
                                       "fixed_6"}
        for name in result["fits"]:
            assert (out / f"fit_{name}.json").exists()
            assert (out / f"budget_posterior_{name}.csv").exists()
        assert (out / "metrics.csv").exists()
        assert (out / "summary.json").exists()
        svgs = list((out / "plots").glob("*.svg"))
        assert len(svgs) == 4 * 2  # four models, two subpopulations

    def test_rerun_byte_identical(self, tmp_path):
        cfg = dict(RSA_CFG, fit={"learning_rate": 0.5, "max_iters": 6})
        run_experiment(cfg, tmp_path / "a")
        run_experiment(cfg, tmp_path / "b")
        for rel in ("metrics.csv", "budget_posterior_libm.csv",
                    "dataset/records.jsonl"):
            assert (tmp_path / "a" / rel).read_bytes() == \
                (tmp_path / "b" / rel).read_bytes()
        # fit artifacts identical up to wall-time fields
        for rel in ("fit_libm.json", "fit_boltzmann.json"):
            a = json.loads((tmp_path / "a" / rel).read_text())
            b = json.loads((tmp_path / "b" / rel).read_text())
            a.pop("wall_time"), b.pop("wall_time")
            assert a == b


class TestCli:
    def run_cli(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "inferbudget.cli", *args],
            capture_output=True, text=True)

    def test_gen_fit_eval_plot_pipeline(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg = dict(MAZE_CFG, fit={"learning_rate": 0.5, "max_iters": 5})
        cfg_path.write_text(json.dumps(cfg))
        r = self.run_cli("--config", str(cfg_path), "--out",
                         str(tmp_path / "data"), "gen", "maze")
        assert r.returncode == 0, r.stderr
        assert (tmp_path / "data" / "records.jsonl").exists()

        r = self.run_cli("--config", str(cfg_path), "--out",
                         str(tmp_path / "fit"), "fit",
                         "--dataset", str(tmp_path / "data"))
        assert r.returncode == 0, r.stderr
        assert (tmp_path / "fit" / "fitresult.json").exists()

        r = self.run_cli("--config", str(cfg_path), "--out",
                         str(tmp_path / "eval"), "eval",
                         "--dataset", str(tmp_path / "data"),
                         "--fitresult", str(tmp_path / "fit" / "fitresult.json"))
        assert r.returncode == 0, r.stderr
        header, rows = read_csv(tmp_path / "eval" / "metrics.csv")
        assert rows and 0.0 <= float(rows[0]["accuracy"]) <= 1.0

        r = self.run_cli("--out", str(tmp_path / "plots"), "plot",
                         "--posterior",
                         str(tmp_path / "fit" / "budget_posterior.csv"))
        assert r.returncode == 0, r.stderr
        assert list((tmp_path / "plots").glob("*.svg"))

    def test_config_error_json_on_stderr(self, tmp_path):
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text(json.dumps({"version": 1, "kind": "maze",
                                        "seed": 0}))
        r = self.run_cli("--config", str(cfg_path), "--out",
                         str(tmp_path / "x"), "gen", "maze")
        assert r.returncode == 2
        err = json.loads(r.stderr)
        assert err["error"] == "ConfigError"
        assert "$." in err["message"]

    def test_domain_mismatch_rejected(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(RSA_CFG))
        r = self.run_cli("--config", str(cfg_path), "--out",
                         str(tmp_path / "x"), "gen", "maze")
        assert r.returncode == 2
        assert json.loads(r.stderr)["error"] == "ConfigError"

    def test_seed_override(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(RSA_CFG))
        r1 = self.run_cli("--config", str(cfg_path), "--seed", "11", "--out",
                          str(tmp_path / "a"), "gen", "rsa")
        r2 = self.run_cli("--config", str(cfg_path), "--seed", "11", "--out",
                          str(tmp_path / "b"), "gen", "rsa")
        assert r1.returncode == r2.returncode == 0
        assert (tmp_path / "a" / "records.jsonl").read_bytes() == \
            (tmp_path / "b" / "records.jsonl").read_bytes()


class TestSweepFacility:
    def test_paper_rate_list_completes_within_budget(self):
        import time
        from inferbudget.fitting import sweep_learning_rates, FitConfig
        from inferbudget.harness import MAZE_LR_SWEEP

        cfg = json.loads(
            (Path(__file__).resolve().parent.parent / "configs"
             / "maze_lr_sweep.json").read_text())
        ds = generate_dataset(cfg)
        train, valid, _ = split_dataset(ds, cfg["seed"])
        fam_tr = make_family(train, "libm", grid=maze_grid(20))
        fam_va = make_family(valid, "libm", grid=maze_grid(20),
                             n_subpops=ds.n_subpops)
        t0 = time.perf_counter()
        res = sweep_learning_rates(
            fam_tr, FitConfig(learning_rate=0.3, max_iters=cfg["fit"]["max_iters"],
                              tol=cfg["fit"]["tol"]),
            cfg["lr_sweep"], valid_family=fam_va)
        wall = time.perf_counter() - t0
        assert wall < 600  # the acceptance runtime budget
        assert len(res.meta["sweep"]) == 10
        assert res.meta["learning_rate"] in cfg["lr_sweep"]

    def test_game_experiment_with_puct_baseline(self, tmp_path):
        cfg = dict(GAME_CFG, games_per_subpop=6, run_puct_baseline=True,
                   puct_grid=[0.3, 3.0], fit={"learning_rate": 0.2,
                                              "max_iters": 30})
        result = run_experiment(cfg, tmp_path / "exp")
        assert "puct" in result["fits"]
        assert result["fits"]["puct"].params.budget_kind == "puct"
        assert (tmp_path / "exp" / "budget_posterior_puct.csv").exists()
