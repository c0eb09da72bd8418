import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inferbudget.core import (
    LOG_FLOOR,
    BudgetConditionedPolicy,
    BudgetGrid,
    BudgetPrior,
    ContractError,
    ParameterError,
    budget_prior_probs,
    maze_grid,
    mcts_grid,
    mixture_log_prob,
    rsa_grid,
    sweep_policies,
)
from inferbudget.maze import MazeRewards, TbfsAgent, generate_maze

from oracles import linear_mixture_log_prob


class TestBudgetGrid:
    def test_defaults(self):
        assert maze_grid(20).values == tuple(range(21))
        assert rsa_grid(3).values == (0, 1, 2, 3)
        assert mcts_grid(256).values == (0, 1, 2, 4, 8, 16, 32, 64, 128, 256)

    @pytest.mark.parametrize("bad", [(), (3, 2), (-1, 0), (1, 1)])
    def test_invalid(self, bad):
        with pytest.raises(ParameterError):
            BudgetGrid(bad)

    def test_index_of(self):
        g = mcts_grid(8)
        assert g.index_of(4) == 3
        with pytest.raises(ContractError):
            g.index_of(3)


class TestBudgetPriorProbs:
    def test_symmetric(self):
        p = budget_prior_probs(BudgetPrior(np.zeros(3)))
        assert np.allclose(p, [1 / 3] * 3, atol=1e-15)

    def test_analytic_softmax(self):
        p = budget_prior_probs(BudgetPrior([0.0, math.log(2.0)]))
        assert np.allclose(p, [1 / 3, 2 / 3], atol=1e-12)

    def test_scalar_evaluation(self):
        p = budget_prior_probs(BudgetPrior([10.0, 0.0, 0.0]))
        expected = math.exp(10.0) / (math.exp(10.0) + 2.0)
        assert p[0] == pytest.approx(expected, rel=1e-12)

    def test_nonfinite_rejected(self):
        with pytest.raises(ParameterError):
            BudgetPrior([np.inf, 0.0])

    @given(st.lists(st.floats(-30, 30), min_size=1, max_size=12))
    def test_sums_to_one_and_positive(self, logits):
        p = budget_prior_probs(BudgetPrior(np.array(logits)))
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.all(p > 0)


class TestMixtureLogProb:
    def make_policy(self, rows):
        return BudgetConditionedPolicy(np.log(np.asarray(rows, dtype=float)))

    def test_point_mass(self):
        pol = self.make_policy([[0.7, 0.3], [0.1, 0.9]])
        prior = BudgetPrior([40.0, 0.0])
        assert mixture_log_prob(pol, prior, 1) == pytest.approx(
            pol.log_probs[0, 1], abs=1e-12)

    def test_arithmetic_mean(self):
        pol = self.make_policy([[0.2, 0.8], [0.6, 0.4]])
        prior = BudgetPrior([0.0, 0.0])
        assert mixture_log_prob(pol, prior, 0) == pytest.approx(
            math.log(0.4), abs=1e-12)

    def test_linear_space_oracle(self):
        rows = np.array([[0.5, 0.5], [0.25, 0.75], [0.9, 0.1]])
        pol = self.make_policy(rows)
        prior = BudgetPrior([0.3, -0.2, 1.1])
        for a in (0, 1):
            expected = linear_mixture_log_prob(prior.probabilities(), rows[:, a])
            assert mixture_log_prob(pol, prior, a) == pytest.approx(
                expected, abs=1e-12)

    def test_dimension_mismatch(self):
        pol = self.make_policy([[0.5, 0.5], [0.25, 0.75]])
        with pytest.raises(ContractError):
            mixture_log_prob(pol, BudgetPrior([0.0, 0.0, 0.0]), 0)
        with pytest.raises(ContractError):
            mixture_log_prob(pol, BudgetPrior([0.0, 0.0]), 5)

    @given(st.integers(0, 4), st.integers(0, 4),
           st.floats(0.01, 0.49))
    @settings(max_examples=50)
    def test_monotone_under_mass_shift(self, i, j, shift):
        rng = np.random.default_rng(7)
        rows = rng.dirichlet(np.ones(3), size=5)
        pol = self.make_policy(rows)
        probs = np.full(5, 0.2)
        lo = mixture_log_prob(pol, BudgetPrior(np.log(probs)), 0)
        if rows[j, 0] >= rows[i, 0]:
            src, dst = i, j
        else:
            src, dst = j, i
        moved = probs.copy()
        moved[src] -= shift * probs[src]
        moved[dst] += shift * probs[src]
        hi = mixture_log_prob(pol, BudgetPrior(np.log(moved)), 0)
        assert hi >= lo - 1e-12


class TestBudgetConditionedPolicy:
    def test_rejects_unnormalized(self):
        with pytest.raises(ContractError):
            BudgetConditionedPolicy(np.log([[0.5, 0.4]]))

    def test_clamps_neg_inf(self):
        with np.errstate(divide="ignore"):
            pol = BudgetConditionedPolicy(np.log([[1.0, 0.0]]))
        assert pol.log_probs[0, 1] == LOG_FLOOR
        assert np.all(np.isfinite(pol.log_probs))

    def test_row_mass(self):
        rng = np.random.default_rng(3)
        rows = rng.dirichlet(np.ones(4), size=6)
        pol = BudgetConditionedPolicy(np.log(rows))
        mass = np.exp(pol.log_probs).sum(axis=1)
        assert np.max(np.abs(mass - 1.0)) < 1e-9


class TestSweepPolicies:
    def setup_method(self):
        self.maze = generate_maze(11, 7, 7, num_exits=3)
        self.theta = MazeRewards.from_effective([1.5, 0.8, 2.2])
        self.agent = TbfsAgent(self.maze)
        self.state = (3, 3)

    def test_degenerate_grid_zero(self):
        pol = sweep_policies(self.agent, self.state, BudgetGrid((0,)), self.theta)
        legal = self.maze.legal_actions(self.state)
        row = np.full(4, LOG_FLOOR)
        row[legal] = -np.log(len(legal))
        assert np.array_equal(pol.log_probs[0], row)

    def test_rows_match_independent_runs(self):
        grid = BudgetGrid((1, 2, 5, 10, 20))
        swept = sweep_policies(self.agent, self.state, grid, self.theta)
        for k, b in enumerate(grid.values):
            fresh = sweep_policies(TbfsAgent(self.maze), self.state,
                                   BudgetGrid((b,)), self.theta)
            assert np.array_equal(swept.log_probs[k], fresh.log_probs[0]), b

    def test_anytime_cost(self):
        grid = BudgetGrid((1, 2, 5, 10))
        istate = self.agent.start(self.state, self.theta)
        for _ in range(grid.max):
            self.agent.advance(istate, self.state, self.theta)
        single = istate.expansions

        agent2 = TbfsAgent(self.maze)
        istate2 = agent2.start(self.state, self.theta)
        want = set(grid.values)
        for b in range(grid.max + 1):
            if b > 0:
                agent2.advance(istate2, self.state, self.theta)
            if b in want:
                agent2.extract(istate2, self.state, self.theta)
        assert istate2.expansions == single

    def test_all_rows_normalized(self):
        grid = BudgetGrid((0, 1, 3, 7))
        pol = sweep_policies(self.agent, self.state, grid, self.theta)
        mass = np.exp(pol.log_probs).sum(axis=1)
        assert np.max(np.abs(mass - 1.0)) < 1e-9
