"""Tic-tac-toe, PUCT tree search, and the visit-regularized final policy.

Boards are 9-char strings ("X", "O", ".") in row-major order; X moves
first, so the player to move is implied by the mark counts.  All values
live in [-1, 1] from the perspective of the player to move; backups negate
once per ply.  The search itself is deterministic (ties break toward the
lowest action index); randomness enters only when sampling actions from a
final policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import (
    LOG_FLOOR,
    BudgetConditionedPolicy,
    BudgetGrid,
    BudgetPrior,
    ContractError,
    InferenceState,
    NoLegalActionError,
    ParameterError,
    sweep_policies,
)

EMPTY_BOARD = "." * 9
WIN_LINES = ((0, 1, 2), (3, 4, 5), (6, 7, 8),
             (0, 3, 6), (1, 4, 7), (2, 5, 8),
             (0, 4, 8), (2, 4, 6))


def winner(board: str) -> str | None:
    for a, b, c in WIN_LINES:
        if board[a] == board[b] == board[c] != ".":
            return board[a]
    return None


def player_to_move(board: str) -> str:
    return "X" if board.count("X") == board.count("O") else "O"


def legal_actions(board: str) -> list[int]:
    return [i for i in range(9) if board[i] == "."]


def is_terminal(board: str) -> bool:
    return winner(board) is not None or "." not in board


def apply_action(board: str, action: int) -> str:
    if board[action] != ".":
        raise ContractError(f"cell {action} already occupied")
    mark = player_to_move(board)
    return board[:action] + mark + board[action + 1:]


def terminal_value(board: str) -> float:
    """Exact value of a terminal board for the player to move."""
    w = winner(board)
    if w is None:
        return 0.0
    return -1.0 if w != player_to_move(board) else 1.0


@dataclass(frozen=True)
class GameState:
    board: str

    def __post_init__(self):
        if len(self.board) != 9 or any(ch not in "XO." for ch in self.board):
            raise ContractError("board must be nine of X, O, .")
        cx, co = self.board.count("X"), self.board.count("O")
        if cx - co not in (0, 1):
            raise ContractError("mark counts inconsistent with alternating play")
        wx = any(all(self.board[i] == "X" for i in line) for line in WIN_LINES)
        wo = any(all(self.board[i] == "O" for i in line) for line in WIN_LINES)
        if wx and wo:
            raise ContractError("both players cannot have three in a row")
        if (wx and cx != co + 1) or (wo and cx != co):
            raise ContractError("winner inconsistent with move counts")

    @property
    def player_to_move(self) -> str:
        return player_to_move(self.board)


def heuristic_value(board: str) -> float:
    """Open-line balance in [-1, 1] for the player to move; exact at terminals.

    A line is open for a player when it holds at least one of their marks
    and none of the opponent's.
    """
    if is_terminal(board):
        return terminal_value(board)
    mover = player_to_move(board)
    other = "O" if mover == "X" else "X"
    mine = theirs = 0
    for line in WIN_LINES:
        marks = {board[i] for i in line}
        if mover in marks and other not in marks:
            mine += 1
        elif other in marks and mover not in marks:
            theirs += 1
    return (mine - theirs) / 8.0


def uniform_prior(board: str) -> np.ndarray:
    legal = legal_actions(board)
    p = np.zeros(9)
    p[legal] = 1.0 / len(legal)
    return p


@dataclass
class MctsParams:
    beta_puct: float = 1.0
    value_fn: object = heuristic_value     # board -> [-1, 1], mover perspective
    prior_fn: object = uniform_prior       # board -> length-9 distribution

    def __post_init__(self):
        if not (np.isfinite(self.beta_puct) and self.beta_puct > 0):
            raise ParameterError("beta_puct must be positive and finite")


class SearchNode:
    """Per-action visit counts, running-mean values, and prior mass."""

    __slots__ = ("board", "actions", "N", "Q", "P", "children",
                 "total_visits", "terminal")

    def __init__(self, board: str, params: MctsParams):
        self.board = board
        self.terminal = is_terminal(board)
        self.actions = [] if self.terminal else legal_actions(board)
        self.N = [0] * len(self.actions)
        self.Q = [0.0] * len(self.actions)  # unvisited actions start at the draw value
        self.children: dict[int, SearchNode] = {}
        self.total_visits = 0
        if self.terminal:
            self.P = []
        else:
            prior = np.asarray(params.prior_fn(board), dtype=float)[self.actions]
            total = prior.sum()
            if total <= 0:
                raise ParameterError("prior must put mass on some legal action")
            self.P = list(prior / total)


@dataclass
class SearchTree:
    root: SearchNode
    params: MctsParams
    expansions: int = 0
    rng: np.random.Generator | None = None
    trace: list | None = None  # optional (path, leaf value) log for audits


def new_tree(board: str, params: MctsParams, seed=None,
             record_trace: bool = False) -> SearchTree:
    if is_terminal(board):
        raise NoLegalActionError("cannot search a terminal position")
    return SearchTree(root=SearchNode(board, params), params=params,
                      rng=np.random.default_rng(seed),
                      trace=[] if record_trace else None)


def puct_select(node: SearchNode, beta_puct: float) -> int:
    """PUCT action choice; ties break toward the lowest action index."""
    if not node.actions:
        raise NoLegalActionError("terminal node has no actions")
    sq = math.sqrt(node.total_visits)
    best_i, best_score = 0, -math.inf
    for i in range(len(node.actions)):
        score = node.Q[i] + beta_puct * node.P[i] * sq / (node.N[i] + 1)
        if score > best_score:
            best_i, best_score = i, score
    return node.actions[best_i]


def expand_once(tree: SearchTree, params: MctsParams | None = None) -> SearchTree:
    """One PUCT descent, one value evaluation, one backup."""
    params = params or tree.params
    node = tree.root
    path = []  # (node, local action index)
    while True:
        if node.terminal:
            value = terminal_value(node.board)
            break
        action = puct_select(node, params.beta_puct)
        i = node.actions.index(action)
        path.append((node, i))
        child = node.children.get(i)
        if child is None:
            child = SearchNode(apply_action(node.board, action), params)
            node.children[i] = child
            if child.terminal:
                value = terminal_value(child.board)
            else:
                value = float(params.value_fn(child.board))
            break
        node = child
    tree.expansions += 1
    if tree.trace is not None:
        tree.trace.append(([n.board for n, _ in path], [i for _, i in path], value))
    v = value
    for parent, i in reversed(path):
        v = -v  # value for the player to move at the parent
        parent.N[i] += 1
        parent.Q[i] += (v - parent.Q[i]) / parent.N[i]
        parent.total_visits += 1
    return tree


def _policy_coefficients(root: SearchNode, beta_puct: float,
                         budget: int) -> np.ndarray:
    # Visit-count regularization scale: sqrt of total visits over
    # (total visits + action count).  With a single action this reduces to
    # sqrt(budget)/(N+1), since all visits sit on that action.
    scale = beta_puct * math.sqrt(budget) / (budget + len(root.actions))
    return scale * np.asarray(root.P, dtype=float)


def solve_gamma(root: SearchNode, beta_puct: float, budget: int,
                tol: float = 1e-10, max_iter: int = 200) -> float:
    """Normalizing constant of the visit-regularized policy, by bisection.

    Finds the unique gamma above max Q with
    sum_a coef(a) / (gamma - Q(a)) = 1, where coef carries the prior and
    the visit-count scale; the sum is strictly decreasing in gamma, so the
    root is unique and bracketable.
    """
    if not root.actions:
        raise NoLegalActionError("no legal actions")
    if np.any(np.asarray(root.P) <= 0):
        raise ParameterError("solve_gamma requires strictly positive priors")
    q = np.asarray(root.Q, dtype=float)
    coef = _policy_coefficients(root, beta_puct, budget)
    qmax = float(q.max())
    lo = qmax + 1e-12
    hi = qmax + float(coef.sum()) + 1.0

    def resid(g):
        return float(np.sum(coef / (g - q)) - 1.0)

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = resid(mid)
        if abs(r) < tol:
            return mid
        if r > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def final_policy(tree: SearchTree, params: MctsParams | None = None,
                 budget: int | None = None) -> np.ndarray:
    """Length-9 action distribution after exactly ``budget`` expansions.

    Budget 0 returns the prior restricted to legal actions; otherwise the
    visit-regularized distribution with its normalizing gamma.
    """
    params = params or tree.params
    if budget is None:
        budget = tree.expansions
    if budget != tree.expansions:
        raise ContractError(
            f"tree has {tree.expansions} expansions, policy asked at {budget}")
    root = tree.root
    out = np.zeros(9)
    if budget == 0:
        out[root.actions] = root.P
        return out
    gamma = solve_gamma(root, params.beta_puct, budget)
    q = np.asarray(root.Q, dtype=float)
    coef = _policy_coefficients(root, params.beta_puct, budget)
    out[root.actions] = coef / (gamma - q)
    return out


class MctsAgent:
    """Anytime-agent adapter: one advance = one tree expansion."""

    def __init__(self, params: MctsParams):
        self.params = params

    def start(self, state, theta, seed=None) -> InferenceState:
        tree = new_tree(state, self.params, seed=seed)
        return InferenceState(budget_index=0, payload=tree)

    def advance(self, istate: InferenceState, state, theta) -> None:
        expand_once(istate.payload)
        istate.budget_index += 1
        istate.expansions = istate.payload.expansions

    def extract(self, istate: InferenceState, state, theta) -> np.ndarray:
        probs = final_policy(istate.payload)
        with np.errstate(divide="ignore"):
            return np.log(probs)


def mcts_sweep(board: str, params: MctsParams, grid: BudgetGrid,
               seed=None) -> BudgetConditionedPolicy:
    """One tree grown to max(grid) expansions, snapshotted at each grid value."""
    return sweep_policies(MctsAgent(params), board, grid, None,
                          seed=seed, state_id=board)


@lru_cache(maxsize=None)
def _negamax(board: str) -> tuple[int, tuple[int, ...]]:
    w = winner(board)
    if w is not None:
        return (-1, ())  # the player to move has already lost
    if "." not in board:
        return (0, ())
    best, acts = -2, []
    for a in legal_actions(board):
        v = -_negamax(apply_action(board, a))[0]
        if v > best:
            best, acts = v, [a]
        elif v == best:
            acts.append(a)
    return (best, tuple(acts))


def minimax_oracle(board: str) -> tuple[int, tuple[int, ...]]:
    """Exact game value for the player to move, and all optimal actions."""
    return _negamax(board)


def minimax_value_fn(board: str) -> float:
    return float(_negamax(board)[0])


@lru_cache(maxsize=1)
def reachable_boards() -> tuple[str, ...]:
    """All 5478 positions reachable from the empty board."""
    seen = {EMPTY_BOARD}
    stack = [EMPTY_BOARD]
    while stack:
        b = stack.pop()
        if is_terminal(b):
            continue
        for a in legal_actions(b):
            nb = apply_action(b, a)
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return tuple(sorted(seen))


@dataclass
class GameMove:
    subpop_id: int
    board: str
    action: int


def sweep_cache_policy(board: str, params: MctsParams, grid: BudgetGrid,
                       cache: dict | None = None) -> np.ndarray:
    """[len(grid), 9] log-policy matrix for one board, optionally memoized."""
    if cache is not None and board in cache:
        return cache[board]
    mat = mcts_sweep(board, params, grid).log_probs
    if cache is not None:
        cache[board] = mat
    return mat


def generate_games(seed: int, true_priors: list[BudgetPrior],
                   games_per_subpop: int, params: MctsParams,
                   grid: BudgetGrid, cache: dict | None = None) -> list[GameMove]:
    """Self-play move records; both sides share the subpopulation's prior.

    Each move draws a fresh budget from the prior and samples from the
    corresponding final policy.
    """
    rng = np.random.default_rng(seed)
    if cache is None:
        cache = {}
    moves: list[GameMove] = []
    for prior in true_priors:
        if len(prior.logits) != len(grid):
            raise ParameterError("true prior length must match the grid")
        probs = prior.probabilities()
        for _ in range(games_per_subpop):
            board = EMPTY_BOARD
            while not is_terminal(board):
                k = int(rng.choice(len(grid), p=probs))
                row = np.exp(sweep_cache_policy(board, params, grid, cache)[k])
                row = row / row.sum()
                a = int(rng.choice(9, p=row))
                moves.append(GameMove(prior.subpopulation_id, board, a))
                board = apply_action(board, a)
    return moves
