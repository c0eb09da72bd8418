"""Per-domain likelihood backends behind one small interface.

A family binds a dataset split to one model class and exposes:

* ``budget_values``   the latent grid (budgets, temperatures, or
                      exploration coefficients),
* ``sa_tables(theta)``            [n_sa, K] log pi_k(a|s) per unique
                                  (state, action, subpopulation) row,
* ``state_log_policies(theta)``   [n_states, K, A] full matrices for
                                  evaluation,
* ``counts`` / ``sa_subpop``      multiplicities and group ids.

Everything is computed once per distinct state and reused across records;
row order is canonical (sorted keys) so reductions are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .core import LOG_FLOOR, BudgetGrid, DataError
from . import maze as mz
from . import mcts as mc
from . import rsa as rs


def _aggregate(keys, subpops):
    """Canonical unique rows + counts for (key, subpop) pairs."""
    combined = sorted(set(zip(keys, subpops)))
    index = {ks: i for i, ks in enumerate(combined)}
    counts = np.zeros(len(combined), dtype=np.int64)
    for ks in zip(keys, subpops):
        counts[index[ks]] += 1
    return combined, counts


class MazeLikelihood:
    """Truncated-BFS mixture model over maze step records.

    theta is the raw reward vector (softplus-deferred); the per-state
    frontier tables are precomputed once and reused for every theta.
    """

    def __init__(self, mazes, records, grid: BudgetGrid, n_subpops=None):
        self.mazes = list(mazes)
        self.grid = grid
        self.budget_values = np.array(grid.values, dtype=float)
        self.n_exits = self.mazes[0].num_exits
        if any(m.num_exits != self.n_exits for m in self.mazes):
            raise DataError("all mazes must share the reward slot count")
        self.theta_size = self.n_exits
        self.n_actions = mz.N_ACTIONS

        recs = list(records)
        for idx, (mid, pos, action, _sub) in enumerate(recs):
            if action not in self.mazes[mid].legal_actions(pos):
                raise DataError(f"record {idx}: action {action} illegal at "
                                f"maze {mid} cell {pos}")
        subpops = [r[3] for r in recs]
        self.n_subpops = (max(subpops) + 1 if recs else 0) if n_subpops is None else n_subpops

        self.states = sorted({(mid, pos[0], pos[1]) for mid, pos, _, _ in recs})
        state_index = {s: i for i, s in enumerate(self.states)}
        self.n_states = len(self.states)

        offs = np.concatenate([[0], np.cumsum([m.num_cells for m in self.mazes])])
        self._cell_offsets = offs

        pa_state, pa_action = [], []
        state_pa_start = []
        flat_gid, seg_start, seg_pa, seg_depth = [], [], [], []
        pa_of = {}
        pos_counter = 0
        for s_idx, (mid, r, c) in enumerate(self.states):
            state_pa_start.append(len(pa_state))
            maze = self.mazes[mid]
            legal, tables = mz.frontier_table(maze, (r, c), grid.max)
            for a, (cells, depths) in zip(legal, tables):
                pa_idx = len(pa_state)
                pa_of[(s_idx, a)] = pa_idx
                pa_state.append(s_idx)
                pa_action.append(a)
                starts = np.concatenate([[0], np.nonzero(np.diff(depths))[0] + 1])
                for st in starts:
                    seg_start.append(pos_counter + int(st))
                    seg_pa.append(pa_idx)
                    seg_depth.append(int(depths[st]))
                flat_gid.append(cells + offs[mid])
                pos_counter += cells.size
        self.pa_state = np.array(pa_state, dtype=np.int64)
        self.pa_action = np.array(pa_action, dtype=np.int64)
        self.state_pa_start = np.array(state_pa_start, dtype=np.int64)
        self.flat_gid = (np.concatenate(flat_gid) if flat_gid
                         else np.empty(0, dtype=np.int64))
        self.seg_start = np.array(seg_start, dtype=np.int64)
        self.seg_pa = np.array(seg_pa, dtype=np.int64)
        self.seg_depth = np.array(seg_depth, dtype=np.int64)
        seg_end = np.concatenate([self.seg_start[1:], [self.flat_gid.size]])
        self.seg_id_flat = np.repeat(np.arange(self.seg_start.size),
                                     seg_end - self.seg_start)
        self.n_pa = len(pa_state)
        self.n_legal = np.bincount(self.pa_state, minlength=self.n_states)

        keys = [(state_index[(mid, pos[0], pos[1])], action)
                for mid, pos, action, _ in recs]
        combined, counts = _aggregate(keys, subpops)
        self.counts = counts
        self.sa_state = np.array([k[0][0] for k in combined], dtype=np.int64)
        self.sa_action = np.array([k[0][1] for k in combined], dtype=np.int64)
        self.sa_subpop = np.array([k[1] for k in combined], dtype=np.int64)
        self.sa_pa = np.array([pa_of[k[0]] for k in combined], dtype=np.int64)
        self._depth_cols = np.array([v - 1 for v in grid.values if v > 0],
                                    dtype=np.int64)
        self._k_positive = np.array([k for k, v in enumerate(grid.values) if v > 0],
                                    dtype=np.int64)
        self._k_zero = [k for k, v in enumerate(grid.values) if v == 0]

    @property
    def n_records(self) -> int:
        return int(self.counts.sum())

    def _cell_values(self, theta_raw, with_grad):
        rewards = mz.MazeRewards(theta_raw)
        vs, gs = [], []
        for maze in self.mazes:
            out = mz.heuristic_values(maze, rewards, with_grad=with_grad)
            if with_grad:
                vs.append(out[0])
                gs.append(out[1])
            else:
                vs.append(out)
        V = np.concatenate(vs)
        return (V, np.vstack(gs)) if with_grad else (V, None)

    def _q_and_logpi(self, V):
        D = self.grid.max
        Vf = V[self.flat_gid]
        segmax = np.maximum.reduceat(Vf, self.seg_start) if self.seg_start.size \
            else np.empty(0)
        M = np.full((self.n_pa, D), -np.inf)
        M[self.seg_pa, self.seg_depth - 1] = segmax
        Q = np.maximum.accumulate(M, axis=1)
        logZ = np.logaddexp.reduceat(Q, self.state_pa_start, axis=0)
        logpi = Q - logZ[self.pa_state]
        return Vf, segmax, M, Q, logpi

    def sa_tables(self, theta_raw, with_grad=False):
        V, G = self._cell_values(theta_raw, with_grad)
        Vf, segmax, M, Q, logpi = self._q_and_logpi(V)
        T = np.empty((len(self.counts), len(self.grid)))
        if self._k_zero:
            T[:, self._k_zero[0]] = -np.log(self.n_legal[self.sa_state])
        T[:, self._k_positive] = logpi[self.sa_pa][:, self._depth_cols]
        if not with_grad:
            return T
        # first cell attaining each per-depth segment max (lowest id)
        n_flat = self.flat_gid.size
        eq = Vf == segmax[self.seg_id_flat]
        firstpos = np.minimum.reduceat(
            np.where(eq, np.arange(n_flat), n_flat), self.seg_start)
        seg_cell = self.flat_gid[firstpos]
        argcell = np.full((self.n_pa, self.grid.max), -1, dtype=np.int64)
        argcell[self.seg_pa, self.seg_depth - 1] = seg_cell
        prev = np.concatenate(
            [np.full((self.n_pa, 1), -np.inf), Q[:, :-1]], axis=1)
        is_new = M > prev
        dchoice = np.maximum.accumulate(
            np.where(is_new, np.arange(self.grid.max)[None, :], -1), axis=1)
        best_gid = np.take_along_axis(argcell, dchoice, axis=1)
        Gq = G[best_gid]                                  # [n_pa, D, E]
        pi = np.exp(logpi)
        sumG = np.add.reduceat(pi[:, :, None] * Gq, self.state_pa_start, axis=0)
        dlogpi = Gq - sumG[self.pa_state]
        GT = np.zeros((len(self.counts), len(self.grid), self.theta_size))
        GT[:, self._k_positive] = dlogpi[self.sa_pa][:, self._depth_cols]
        return T, GT

    def state_log_policies(self, theta_raw):
        V, _ = self._cell_values(theta_raw, False)
        _, _, _, _, logpi = self._q_and_logpi(V)
        mat = np.full((self.n_states, len(self.grid), self.n_actions), LOG_FLOOR)
        if self._k_zero:
            mat[self.pa_state, self._k_zero[0], self.pa_action] = \
                -np.log(self.n_legal[self.pa_state])
        mat[self.pa_state[:, None], self._k_positive[None, :],
            self.pa_action[:, None]] = logpi[:, self._depth_cols]
        return mat


class MazeBoltzmannLikelihood:
    """Temperature-mixture model: actions score by best completed-walk reward."""

    def __init__(self, mazes, records, temp_values, n_subpops=None,
                 committed=False):
        self.mazes = list(mazes)
        self.budget_values = np.asarray(temp_values, dtype=float)
        self.n_exits = self.mazes[0].num_exits
        self.theta_size = self.n_exits
        self.n_actions = mz.N_ACTIONS
        self.committed = committed

        recs = list(records)
        for idx, (mid, pos, action, _sub) in enumerate(recs):
            if action not in self.mazes[mid].legal_actions(pos):
                raise DataError(f"record {idx}: action {action} illegal")
        subpops = [r[3] for r in recs]
        self.n_subpops = (max(subpops) + 1 if recs else 0) if n_subpops is None else n_subpops
        self.states = sorted({(mid, pos[0], pos[1]) for mid, pos, _, _ in recs})
        state_index = {s: i for i, s in enumerate(self.states)}
        self.n_states = len(self.states)

        pa_state, pa_action, pa_mask = [], [], []
        state_pa_start = []
        pa_of = {}
        for s_idx, (mid, r, c) in enumerate(self.states):
            state_pa_start.append(len(pa_state))
            maze = self.mazes[mid]
            legal = maze.legal_actions((r, c))
            masks = mz.boltzmann_exit_masks((r, c), maze, committed=committed)
            for a, mask in zip(legal, masks):
                pa_of[(s_idx, a)] = len(pa_state)
                pa_state.append(s_idx)
                pa_action.append(a)
                pa_mask.append([bool((mask >> k) & 1) for k in range(self.n_exits)])
        self.pa_state = np.array(pa_state, dtype=np.int64)
        self.pa_action = np.array(pa_action, dtype=np.int64)
        self.pa_mask = np.array(pa_mask, dtype=bool)
        self.state_pa_start = np.array(state_pa_start, dtype=np.int64)
        self.n_pa = len(pa_state)
        self.n_legal = np.bincount(self.pa_state, minlength=self.n_states)

        keys = [(state_index[(mid, pos[0], pos[1])], action)
                for mid, pos, action, _ in recs]
        combined, counts = _aggregate(keys, subpops)
        self.counts = counts
        self.sa_state = np.array([k[0][0] for k in combined], dtype=np.int64)
        self.sa_action = np.array([k[0][1] for k in combined], dtype=np.int64)
        self.sa_subpop = np.array([k[1] for k in combined], dtype=np.int64)
        self.sa_pa = np.array([pa_of[k[0]] for k in combined], dtype=np.int64)

    @property
    def n_records(self) -> int:
        return int(self.counts.sum())

    def _logpi(self, theta_raw, with_grad):
        R = np.logaddexp(0.0, np.asarray(theta_raw, dtype=float))
        scored = np.where(self.pa_mask, R[None, :], -np.inf)
        best = scored.max(axis=1)                        # [n_pa]
        logits = self.budget_values[None, :] * best[:, None]   # [n_pa, K]
        logZ = np.logaddexp.reduceat(logits, self.state_pa_start, axis=0)
        logpi = logits - logZ[self.pa_state]
        if not with_grad:
            return logpi, None
        kstar = scored.argmax(axis=1)
        dbest = np.zeros((self.n_pa, self.theta_size))
        dbest[np.arange(self.n_pa), kstar] = expit(np.asarray(theta_raw)[kstar])
        dlogits = self.budget_values[None, :, None] * dbest[:, None, :]
        pi = np.exp(logpi)
        sumG = np.add.reduceat(pi[:, :, None] * dlogits, self.state_pa_start, axis=0)
        return logpi, dlogits - sumG[self.pa_state]

    def sa_tables(self, theta_raw, with_grad=False):
        logpi, dlogpi = self._logpi(theta_raw, with_grad)
        T = logpi[self.sa_pa]
        if not with_grad:
            return T
        return T, dlogpi[self.sa_pa]

    def state_log_policies(self, theta_raw):
        logpi, _ = self._logpi(theta_raw, False)
        mat = np.full((self.n_states, len(self.budget_values), self.n_actions),
                      LOG_FLOOR)
        mat[self.pa_state[:, None],
            np.arange(len(self.budget_values))[None, :],
            self.pa_action[:, None]] = logpi
        return mat


class RsaLikelihood:
    """Level-mixture speaker model over reference-game rounds.

    theta is one raw lexicon per game (flattened); ``freeze_theta`` pins
    the tables to the games' own lexicons and drops the parameter block.
    """

    def __init__(self, games, rounds, grid: BudgetGrid, n_subpops=None,
                 freeze_theta=False, side="speaker"):
        self.games = list(games)
        self.grid = grid
        self.budget_values = np.array(grid.values, dtype=float)
        self.freeze_theta = freeze_theta
        self.side = side
        self.U = self.games[0].n_utterances
        self.T = self.games[0].n_targets
        if any((g.n_utterances, g.n_targets) != (self.U, self.T)
               for g in self.games):
            raise DataError("all games must share the lexicon shape")
        self.n_games = len(self.games)
        self.block = self.U * self.T
        self.theta_size = 0 if freeze_theta else self.n_games * self.block
        self.n_actions = self.U if side == "speaker" else self.T
        n_cond = self.T if side == "speaker" else self.U

        recs = list(rounds)
        for idx, rr in enumerate(recs):
            if not (0 <= rr.target_index < self.T and 0 <= rr.utterance_index < self.U):
                raise DataError(f"record {idx}: target/utterance out of range")
        subpops = [rr.subpop_id for rr in recs]
        self.n_subpops = (max(subpops) + 1 if recs else 0) if n_subpops is None else n_subpops
        self.states = sorted({(rr.game_id,
                               rr.target_index if side == "speaker" else rr.utterance_index)
                              for rr in recs})
        state_index = {s: i for i, s in enumerate(self.states)}
        self.n_states = len(self.states)
        keys = []
        for rr in recs:
            if self.side == "speaker":
                keys.append((state_index[(rr.game_id, rr.target_index)],
                             rr.utterance_index))
            else:
                keys.append((state_index[(rr.game_id, rr.utterance_index)],
                             rr.target_index))
        combined, counts = _aggregate(keys, subpops)
        self.counts = counts
        self.sa_state = np.array([k[0][0] for k in combined], dtype=np.int64)
        self.sa_action = np.array([k[0][1] for k in combined], dtype=np.int64)
        self.sa_subpop = np.array([k[1] for k in combined], dtype=np.int64)
        self.sa_game = np.array([self.states[s][0] for s in self.sa_state],
                                dtype=np.int64)
        self.sa_cond = np.array([self.states[s][1] for s in self.sa_state],
                                dtype=np.int64)
        if freeze_theta:
            self._frozen = self._game_tables(None, with_grad=False)

    @property
    def n_records(self) -> int:
        return int(self.counts.sum())

    def default_theta(self, floor=1e-3) -> np.ndarray:
        """Raw lexicons initialized from the games' observed lexicons."""
        return np.concatenate([
            rs.LexiconParams.from_lexicon(g.lexicon, floor=floor).raw.reshape(-1)
            for g in self.games])

    def _log_lexicon(self, theta_raw, g):
        if theta_raw is None:
            with np.errstate(divide="ignore"):
                return np.log(self.games[g].lexicon)
        raw = np.asarray(theta_raw).reshape(self.n_games, self.U, self.T)[g]
        return np.log(np.logaddexp(0.0, raw))

    def _game_tables(self, theta_raw, with_grad):
        """Per game: [K, cond, action] log tables (+ Jacobians wrt raw)."""
        tabs, grads = [], []
        for g, game in enumerate(self.games):
            M = self._log_lexicon(theta_raw, g)
            with np.errstate(divide="ignore"):
                logp = np.log(game.target_prior)
            out = rs.recursion_log_tables(M, logp, self.grid.max,
                                          with_grad=with_grad)
            speak, listen = out[0], out[1]
            src = speak if self.side == "speaker" else listen
            tabs.append(np.stack([src[v] for v in self.grid.values]))
            if with_grad:
                jac = out[2] if self.side == "speaker" else out[3]
                raw = np.asarray(theta_raw).reshape(self.n_games, self.U, self.T)[g]
                chain = expit(raw) / np.logaddexp(0.0, raw)   # dM/draw
                J = np.stack([jac[v] for v in self.grid.values])
                grads.append(J * chain[None, None, None, :, :])
        return (tabs, grads) if with_grad else tabs

    def sa_tables(self, theta_raw, with_grad=False):
        if self.freeze_theta:
            tabs = self._frozen
            T = np.stack([np.maximum(tabs[g][:, c, a], LOG_FLOOR)
                          for g, c, a in zip(self.sa_game, self.sa_cond,
                                             self.sa_action)])
            if with_grad:
                return T, np.zeros((len(self.counts), len(self.grid), 0))
            return T
        out = self._game_tables(theta_raw, with_grad)
        tabs = out[0] if with_grad else out
        T = np.stack([tabs[g][:, c, a]
                      for g, c, a in zip(self.sa_game, self.sa_cond,
                                         self.sa_action)])
        if not with_grad:
            return T
        grads = out[1]
        GT = np.zeros((len(self.counts), len(self.grid), self.theta_size))
        for i, (g, c, a) in enumerate(zip(self.sa_game, self.sa_cond,
                                          self.sa_action)):
            GT[i, :, g * self.block:(g + 1) * self.block] = \
                grads[g][:, c, a].reshape(len(self.grid), self.block)
        return T, GT

    def state_log_policies(self, theta_raw):
        tabs = self._frozen if self.freeze_theta else self._game_tables(theta_raw, False)
        mat = np.empty((self.n_states, len(self.grid), self.n_actions))
        for s, (g, c) in enumerate(self.states):
            mat[s] = np.maximum(tabs[g][:, c, :], LOG_FLOOR)
        return mat


class RsaBoltzmannLikelihood(RsaLikelihood):
    """Temperature-speaker mixture: level-1 speaker with a latent temperature."""

    def __init__(self, games, rounds, temp_values, n_subpops=None,
                 freeze_theta=False):
        self.temp_values = np.asarray(temp_values, dtype=float)
        super().__init__(games, rounds, BudgetGrid((0,)), n_subpops=n_subpops,
                         freeze_theta=freeze_theta, side="speaker")
        self.budget_values = self.temp_values

    def _game_tables(self, theta_raw, with_grad):
        tabs, grads = [], []
        for g, game in enumerate(self.games):
            M = self._log_lexicon(theta_raw, g)
            with np.errstate(divide="ignore"):
                logp = np.log(game.target_prior)
            per_temp, per_grad = [], []
            for v in self.temp_values:
                out = rs.boltzmann_speaker_log_table(M, logp, float(v),
                                                     with_grad=with_grad)
                if with_grad:
                    per_temp.append(out[0])
                    per_grad.append(out[1])
                else:
                    per_temp.append(out)
            tabs.append(np.stack(per_temp))
            if with_grad:
                raw = np.asarray(theta_raw).reshape(self.n_games, self.U, self.T)[g]
                chain = expit(raw) / np.logaddexp(0.0, raw)
                J = np.stack(per_grad)
                grads.append(J * chain[None, None, None, :, :])
        return (tabs, grads) if with_grad else tabs

    def sa_tables(self, theta_raw, with_grad=False):
        if self.freeze_theta:
            tabs = self._frozen
            T = np.stack([np.maximum(tabs[g][:, c, a], LOG_FLOOR)
                          for g, c, a in zip(self.sa_game, self.sa_cond,
                                             self.sa_action)])
            if with_grad:
                return T, np.zeros((len(self.counts), len(self.temp_values), 0))
            return T
        out = self._game_tables(theta_raw, with_grad)
        tabs = out[0] if with_grad else out
        T = np.stack([tabs[g][:, c, a]
                      for g, c, a in zip(self.sa_game, self.sa_cond,
                                         self.sa_action)])
        if not with_grad:
            return T
        GT = np.zeros((len(self.counts), len(self.temp_values), self.theta_size))
        for i, (g, c, a) in enumerate(zip(self.sa_game, self.sa_cond,
                                          self.sa_action)):
            GT[i, :, g * self.block:(g + 1) * self.block] = \
                out[1][g][:, c, a].reshape(len(self.temp_values), self.block)
        return T, GT

    def state_log_policies(self, theta_raw):
        tabs = self._frozen if self.freeze_theta else self._game_tables(theta_raw, False)
        mat = np.empty((self.n_states, len(self.temp_values), self.n_actions))
        for s, (g, c) in enumerate(self.states):
            mat[s] = np.maximum(tabs[g][:, c, :], LOG_FLOOR)
        return mat


class MctsLikelihood:
    """Expansion-budget mixture over game moves; the value function is fixed,
    so there is no theta block and tables are computed once."""

    def __init__(self, moves, params: mc.MctsParams, grid: BudgetGrid,
                 n_subpops=None, cache: dict | None = None):
        self.params = params
        self.grid = grid
        self.budget_values = np.array(grid.values, dtype=float)
        self.theta_size = 0
        self.n_actions = 9
        recs = list(moves)
        for idx, mv in enumerate(recs):
            if mv.board[mv.action] != ".":
                raise DataError(f"record {idx}: cell {mv.action} occupied")
        subpops = [mv.subpop_id for mv in recs]
        self.n_subpops = (max(subpops) + 1 if recs else 0) if n_subpops is None else n_subpops
        self.states = sorted({mv.board for mv in recs})
        state_index = {b: i for i, b in enumerate(self.states)}
        self.n_states = len(self.states)
        keys = [(state_index[mv.board], mv.action) for mv in recs]
        combined, counts = _aggregate(keys, subpops)
        self.counts = counts
        self.sa_state = np.array([k[0][0] for k in combined], dtype=np.int64)
        self.sa_action = np.array([k[0][1] for k in combined], dtype=np.int64)
        self.sa_subpop = np.array([k[1] for k in combined], dtype=np.int64)
        cache = {} if cache is None else cache
        self._mat = np.stack([
            mc.sweep_cache_policy(b, params, grid, cache) for b in self.states
        ]) if self.states else np.zeros((0, len(grid), 9))

    @property
    def n_records(self) -> int:
        return int(self.counts.sum())

    def sa_tables(self, theta_raw, with_grad=False):
        T = self._mat[self.sa_state, :, self.sa_action]
        if with_grad:
            return T, np.zeros((len(self.counts), len(self.grid), 0))
        return T

    def state_log_policies(self, theta_raw):
        return self._mat


class MctsPuctLikelihood:
    """Exploration-coefficient mixture at a fixed expansion budget."""

    def __init__(self, moves, puct_values, budget: int = 256,
                 value_fn=mc.heuristic_value, prior_fn=mc.uniform_prior,
                 n_subpops=None):
        self.budget = budget
        self.budget_values = np.asarray(puct_values, dtype=float)
        self.theta_size = 0
        self.n_actions = 9
        recs = list(moves)
        subpops = [mv.subpop_id for mv in recs]
        self.n_subpops = (max(subpops) + 1 if recs else 0) if n_subpops is None else n_subpops
        self.states = sorted({mv.board for mv in recs})
        state_index = {b: i for i, b in enumerate(self.states)}
        self.n_states = len(self.states)
        keys = [(state_index[mv.board], mv.action) for mv in recs]
        combined, counts = _aggregate(keys, subpops)
        self.counts = counts
        self.sa_state = np.array([k[0][0] for k in combined], dtype=np.int64)
        self.sa_action = np.array([k[0][1] for k in combined], dtype=np.int64)
        self.sa_subpop = np.array([k[1] for k in combined], dtype=np.int64)
        rows = []
        for b in self.states:
            per_v = []
            for v in self.budget_values:
                params = mc.MctsParams(beta_puct=float(v), value_fn=value_fn,
                                       prior_fn=prior_fn)
                tree = mc.new_tree(b, params)
                for _ in range(budget):
                    mc.expand_once(tree)
                with np.errstate(divide="ignore"):
                    per_v.append(np.maximum(np.log(mc.final_policy(tree)),
                                            LOG_FLOOR))
            rows.append(np.stack(per_v))
        self._mat = np.stack(rows) if rows else np.zeros(
            (0, len(self.budget_values), 9))

    @property
    def n_records(self) -> int:
        return int(self.counts.sum())

    def sa_tables(self, theta_raw, with_grad=False):
        T = self._mat[self.sa_state, :, self.sa_action]
        if with_grad:
            return T, np.zeros((len(self.counts), len(self.budget_values), 0))
        return T

    def state_log_policies(self, theta_raw):
        return self._mat
