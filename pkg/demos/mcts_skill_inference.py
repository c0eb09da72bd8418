"""Tree-search budgets as a skill dial, and their recovery from play.

First shows how the search policy on a tactical tic-tac-toe position
sharpens as the expansion budget grows, then recovers three populations'
expansion budgets (4, 32, 256) from nothing but their moves.

Run:  python3 demos/mcts_skill_inference.py   (~40 seconds)
"""

import numpy as np

from inferbudget import mcts
from inferbudget.core import BudgetPrior, mcts_grid
from inferbudget.families import MctsLikelihood
from inferbudget.fitting import FitConfig, fit

# X can win immediately at cell 2; shallow search may not notice
board = "XX.OO...."
params = mcts.MctsParams(beta_puct=1.0)
grid = mcts_grid(256)
policy = mcts.mcts_sweep(board, params, grid)
print(f"position {board!r}: P(winning move) by expansion budget")
for k, b in enumerate(grid.values):
    p = float(np.exp(policy.log_probs[k, 2]))
    print(f"  budget {b:>3}: {p:.3f} {'#' * int(round(40 * p))}")

# --- budget recovery from self-play moves -----------------------------------
budgets = [4, 32, 256]
priors = [BudgetPrior.point_mass(grid, b, subpopulation_id=i)
          for i, b in enumerate(budgets)]
print("\ngenerating self-play games for three skill groups ...")
cache = {}
moves = mcts.generate_games(17, priors, 120, params, grid, cache=cache)
print(f"  {len(moves)} moves, {len({m.board for m in moves})} distinct positions")

family = MctsLikelihood(moves, params, grid, cache=cache)
result = fit(family, FitConfig(learning_rate=0.2, max_iters=1500, tol=1e-9))
probs = result.params.prior_probs()
means = probs @ np.array(grid.values, dtype=float)
print("\nrecovered expansion-budget priors:")
for i, b in enumerate(budgets):
    k = grid.index_of(b)
    print(f"  group {i} (true {b:>3}): mean {means[i]:6.1f}, "
          f"mass at true budget {probs[i][k]:.2f}")
