"""Shared anytime-inference contract and budget-mixture machinery.

An agent is "anytime" if its inference state after k steps yields a usable
action distribution and advancing to k+1 steps costs O(1).  Everything here
is agnostic to what a budget unit means (search depth, recursion level,
tree expansions); the domain modules supply agents that obey the contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Protocol

import numpy as np
from scipy.special import logsumexp, softmax

# Single numeric-safety rule for the whole package: log-probabilities are
# floored here before any log-sum-exp so -inf never propagates.
LOG_FLOOR = -1e9


class ParameterError(ValueError):
    """Non-finite or otherwise unusable model parameters."""


class ContractError(ValueError):
    """Mismatched shapes/grids between collaborating objects."""


class NoLegalActionError(ValueError):
    """Environment state admits no legal action."""


class DegenerateGameError(ValueError):
    """Reference game with an all-zero row/column where mass is required."""


class ConfigError(ValueError):
    """Infeasible or malformed configuration."""


class DataError(ValueError):
    """Dataset record violating an invariant (e.g. illegal action)."""


class OptimizationError(RuntimeError):
    """Optimizer diverged; carries the NLL trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


def clamp_log(log_probs: np.ndarray) -> np.ndarray:
    """Replace -inf/NaN-free underflow with the package-wide floor."""
    out = np.asarray(log_probs, dtype=float)
    if np.isnan(out).any():
        raise ParameterError("NaN in log-probabilities")
    return np.maximum(out, LOG_FLOOR)


@dataclass(frozen=True)
class BudgetGrid:
    """Strictly increasing grid of nonnegative integer budgets."""

    values: tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if len(vals) == 0:
            raise ParameterError("budget grid must be nonempty")
        if vals[0] < 0:
            raise ParameterError("budgets must be nonnegative")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ParameterError("budget grid must be strictly increasing")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    @property
    def max(self) -> int:
        return self.values[-1]

    def index_of(self, budget: int) -> int:
        try:
            return self.values.index(budget)
        except ValueError:
            raise ContractError(f"budget {budget} not on grid {self.values}") from None


def maze_grid(max_depth: int = 20) -> BudgetGrid:
    return BudgetGrid(tuple(range(max_depth + 1)))


def rsa_grid(max_level: int = 3) -> BudgetGrid:
    return BudgetGrid(tuple(range(max_level + 1)))


def mcts_grid(max_expansions: int = 256) -> BudgetGrid:
    vals = [0]
    b = 1
    while b <= max_expansions:
        vals.append(b)
        b *= 2
    return BudgetGrid(tuple(vals))


@dataclass
class BudgetPrior:
    """Per-subpopulation categorical over a budget grid, in logit form."""

    logits: np.ndarray
    subpopulation_id: int = 0

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=float).reshape(-1)
        if self.logits.size == 0:
            raise ParameterError("budget prior needs at least one logit")
        if not np.all(np.isfinite(self.logits)):
            raise ParameterError("budget prior logits must be finite")

    def probabilities(self) -> np.ndarray:
        return softmax(self.logits)

    def log_probabilities(self) -> np.ndarray:
        return self.logits - logsumexp(self.logits)

    @classmethod
    def uniform(cls, grid: BudgetGrid, subpopulation_id: int = 0) -> "BudgetPrior":
        return cls(np.zeros(len(grid)), subpopulation_id)

    @classmethod
    def point_mass(cls, grid: BudgetGrid, budget: int, subpopulation_id: int = 0,
                   sharpness: float = 40.0) -> "BudgetPrior":
        logits = np.zeros(len(grid))
        logits[grid.index_of(budget)] = sharpness
        return cls(logits, subpopulation_id)


def budget_prior_probs(prior: BudgetPrior) -> np.ndarray:
    """Softmax of the prior's logits; strictly positive, sums to one."""
    if not np.all(np.isfinite(prior.logits)):
        raise ParameterError("budget prior logits must be finite")
    return softmax(prior.logits)


@dataclass
class InferenceState:
    """Algorithm state after ``budget_index`` anytime steps.

    ``payload`` is owned by the agent that produced it; this module only
    tracks position on the grid and the work counter.
    """

    budget_index: int
    payload: Any
    expansions: int = 0


class AnytimeAgent(Protocol):
    """What a domain agent must provide for generic sweeps."""

    def start(self, state, theta, seed=None) -> InferenceState: ...

    def advance(self, istate: InferenceState, state, theta) -> None: ...

    def extract(self, istate: InferenceState, state, theta) -> np.ndarray: ...


@dataclass
class BudgetConditionedPolicy:
    """Matrix of log action probabilities, one row per grid budget."""

    log_probs: np.ndarray  # [len(grid), n_actions]
    state_id: Any = None

    def __post_init__(self):
        self.log_probs = np.asarray(self.log_probs, dtype=float)
        if self.log_probs.ndim != 2:
            raise ContractError("log_probs must be a [budgets x actions] matrix")
        self.log_probs = clamp_log(self.log_probs)
        row_mass = logsumexp(self.log_probs, axis=1)
        if np.max(np.abs(row_mass)) > 1e-9:
            raise ContractError("policy rows must be normalized log-distributions")

    @property
    def n_budgets(self) -> int:
        return self.log_probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.log_probs.shape[1]


def sweep_policies(agent: AnytimeAgent, state, grid: BudgetGrid, theta,
                   seed=None, state_id=None) -> BudgetConditionedPolicy:
    """Run one anytime inference pass and snapshot it at every grid budget.

    The agent is advanced exactly ``grid.max`` times; intermediate rows are
    extracted in passing, so total work equals a single max-budget run.
    """
    istate = agent.start(state, theta, seed=seed)
    rows = []
    want = set(grid.values)
    for b in range(grid.max + 1):
        if b > 0:
            agent.advance(istate, state, theta)
        if b in want:
            rows.append(np.array(agent.extract(istate, state, theta), dtype=float))
    return BudgetConditionedPolicy(np.vstack(rows), state_id=state_id)


def mixture_log_prob(policy: BudgetConditionedPolicy, prior: BudgetPrior,
                     action: int) -> float:
    """log sum_b p(b) * pi(action | state; b), via log-sum-exp."""
    if len(prior.logits) != policy.n_budgets:
        raise ContractError(
            f"prior has {len(prior.logits)} budgets, policy has {policy.n_budgets}")
    if not 0 <= action < policy.n_actions:
        raise ContractError(f"action {action} out of range")
    return float(logsumexp(prior.log_probabilities() + policy.log_probs[:, action]))
