"""Maze navigation: environment, heuristic values, truncated-BFS agent.

Cells are (row, col) with row 0 at the top.  Actions are indexed
0=N, 1=E, 2=S, 3=W; a cell's passability mask has bit i set when the edge
in direction i is open.  Exits are ordinary boundary cells that absorb
rollouts; reward slot i attaches to exit i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import expit, softmax

from .core import (
    LOG_FLOOR,
    BudgetGrid,
    BudgetPrior,
    ConfigError,
    InferenceState,
    NoLegalActionError,
    ParameterError,
    maze_grid,
    sweep_policies,
)

N_ACTIONS = 4
DR = (-1, 0, 1, 0)
DC = (0, 1, 0, -1)
OPPOSITE = (2, 3, 0, 1)


@dataclass(eq=False)
class Maze:
    width: int
    height: int
    passable: np.ndarray  # uint8 [height, width], bit i = open edge in direction i
    exits: tuple[tuple[int, int], ...]

    def __post_init__(self):
        self.passable = np.asarray(self.passable, dtype=np.uint8)
        self.exits = tuple((int(r), int(c)) for r, c in self.exits)
        self._validate()

    def _validate(self):
        h, w = self.height, self.width
        if self.passable.shape != (h, w):
            raise ConfigError("passability mask shape mismatch")
        for r in range(h):
            for c in range(w):
                for d in range(N_ACTIONS):
                    if not (self.passable[r, c] >> d) & 1:
                        continue
                    nr, nc = r + DR[d], c + DC[d]
                    if not (0 <= nr < h and 0 <= nc < w):
                        raise ConfigError("open edge leaves the grid")
                    if not (self.passable[nr, nc] >> OPPOSITE[d]) & 1:
                        raise ConfigError("wall bits not symmetric across an edge")
        if len(set(self.exits)) != len(self.exits):
            raise ConfigError("exits must be distinct")
        for r, c in self.exits:
            if not (r in (0, h - 1) or c in (0, w - 1)):
                raise ConfigError("exits must lie on the boundary")
        # Every cell must reach every exit, i.e. the maze is connected.
        seen = np.zeros(h * w, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            cell = stack.pop()
            r, c = divmod(cell, w)
            for d in range(N_ACTIONS):
                if (self.passable[r, c] >> d) & 1:
                    nxt = (r + DR[d]) * w + (c + DC[d])
                    if not seen[nxt]:
                        seen[nxt] = True
                        stack.append(nxt)
        if not seen.all():
            raise ConfigError("maze is not connected")

    @property
    def num_exits(self) -> int:
        return len(self.exits)

    @property
    def num_cells(self) -> int:
        return self.width * self.height

    def cell_id(self, pos) -> int:
        return pos[0] * self.width + pos[1]

    def cell_pos(self, cell: int) -> tuple[int, int]:
        return divmod(cell, self.width)

    def legal_actions(self, pos) -> list[int]:
        mask = int(self.passable[pos[0], pos[1]])
        return [d for d in range(N_ACTIONS) if (mask >> d) & 1]

    def step(self, pos, action: int) -> tuple[int, int]:
        return (pos[0] + DR[action], pos[1] + DC[action])

    def is_exit(self, pos) -> bool:
        return tuple(pos) in self._exit_set

    @cached_property
    def _exit_set(self) -> frozenset:
        return frozenset(self.exits)

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """[num_cells, 4] neighbor cell id per direction, -1 where walled."""
        table = np.full((self.num_cells, N_ACTIONS), -1, dtype=np.int64)
        for cell in range(self.num_cells):
            r, c = self.cell_pos(cell)
            mask = int(self.passable[r, c])
            for d in range(N_ACTIONS):
                if (mask >> d) & 1:
                    table[cell, d] = (r + DR[d]) * self.width + (c + DC[d])
        return table

    @cached_property
    def exit_distances(self) -> np.ndarray:
        """[num_cells, num_exits] Manhattan distance on coordinates (walls ignored)."""
        rows, cols = np.divmod(np.arange(self.num_cells), self.width)
        er = np.array([e[0] for e in self.exits])
        ec = np.array([e[1] for e in self.exits])
        return np.abs(rows[:, None] - er[None, :]) + np.abs(cols[:, None] - ec[None, :])

    @cached_property
    def exit_reach_masks(self) -> np.ndarray:
        """Per-cell bitmask of exits reachable by a completed walk from that cell.

        An exit cell absorbs: its own mask is just itself, and no walk may
        pass through one exit on the way to another.
        """
        masks = np.zeros(self.num_cells, dtype=np.int64)
        exit_ids = {self.cell_id(e): i for i, e in enumerate(self.exits)}
        nbr = self.neighbor_table
        for k, epos in enumerate(self.exits):
            blocked = set(exit_ids) - {self.cell_id(epos)}
            seen = np.zeros(self.num_cells, dtype=bool)
            start = self.cell_id(epos)
            seen[start] = True
            stack = [start]
            while stack:
                cell = stack.pop()
                for nxt in nbr[cell]:
                    if nxt >= 0 and not seen[nxt] and nxt not in blocked:
                        seen[nxt] = True
                        stack.append(nxt)
            masks[seen] |= 1 << k
        for cell, k in exit_ids.items():
            masks[cell] = 1 << k
        return masks

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "walls": [int(v) for v in self.passable.reshape(-1)],
            "exits": [[r, c] for r, c in self.exits],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Maze":
        passable = np.array(d["walls"], dtype=np.uint8).reshape(d["height"], d["width"])
        return cls(d["width"], d["height"], passable,
                   tuple((r, c) for r, c in d["exits"]))


@dataclass
class MazeRewards:
    """Unconstrained reward parameters; effective rewards are softplus(raw)."""

    raw: np.ndarray

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.raw)):
            raise ParameterError("reward parameters must be finite")

    def effective(self) -> np.ndarray:
        return np.logaddexp(0.0, self.raw)

    @classmethod
    def from_effective(cls, rewards) -> "MazeRewards":
        r = np.asarray(rewards, dtype=float)
        if np.any(r <= 0):
            raise ParameterError("effective rewards must be positive")
        # inverse softplus: raw = log(e^r - 1)
        return cls(r + np.log1p(-np.exp(-r)))


def heuristic_values(maze: Maze, theta: MazeRewards,
                     with_grad: bool = False):
    """Distance-attention value of every cell.

    V(c) = sum_i R_i w_i(c) with w(c) = softmax_i(-d_i(c) * R_i) over exits.
    With ``with_grad`` also returns dV/draw as a [num_cells, num_exits] array
    (softplus chain rule included).
    """
    D = maze.exit_distances.astype(float)
    R = theta.effective()
    W = softmax(-D * R[None, :], axis=1)
    V = W @ R
    if not with_grad:
        return V
    G = W * (1.0 - D * R[None, :] + D * V[:, None])
    G *= expit(theta.raw)[None, :]
    return V, G


def heuristic_value(pos, maze: Maze, theta: MazeRewards) -> float:
    """Heuristic value of a single cell (scalar form of heuristic_values)."""
    return float(heuristic_values(maze, theta)[maze.cell_id(pos)])


@dataclass
class FrontierState:
    """Truncated-BFS inference state: one search frontier per initial action.

    Each per-action search is a breadth-first expansion rooted at the
    current cell, so the root counts as explored from the start: lookahead
    walks branch out and never step back through the cell the agent is
    standing on.  Cells keep their first-visit depth; the per-action best
    value is a running max over everything seen so far.
    """

    start: tuple[int, int]
    legal: list[int]
    depth: int
    frontiers: list[np.ndarray | None]  # aligned with legal; None before depth 1
    visited: list[np.ndarray]           # bool [num_cells] per initial action
    best_value: np.ndarray              # running max of V over visited cells
    best_cell: np.ndarray               # cell achieving it (first by depth, then id)
    expansions: int = 0


def frontier_start(maze: Maze, pos, theta: MazeRewards) -> FrontierState:
    legal = maze.legal_actions(pos)
    if not legal:
        raise NoLegalActionError(f"no legal action at {pos}")
    n = len(legal)
    visited = []
    for _ in range(n):
        v = np.zeros(maze.num_cells, dtype=bool)
        v[maze.cell_id(pos)] = True  # the search root is already explored
        visited.append(v)
    return FrontierState(
        start=tuple(pos),
        legal=legal,
        depth=0,
        frontiers=[None] * n,
        visited=visited,
        best_value=np.full(n, -np.inf),
        best_cell=np.full(n, -1, dtype=np.int64),
    )


def tbfs_step(f: FrontierState, maze: Maze, theta: MazeRewards,
              values: np.ndarray | None = None) -> FrontierState:
    """Advance every per-action frontier one depth level, in place.

    ``values`` may carry precomputed heuristic values for all cells; the
    expansion counter grows by the number of newly visited cells.
    """
    if values is None:
        values = heuristic_values(maze, theta)
    nbr = maze.neighbor_table
    for i, a in enumerate(f.legal):
        if f.depth == 0:
            new = np.array([nbr[maze.cell_id(f.start), a]], dtype=np.int64)
        else:
            cur = f.frontiers[i]
            if cur is None or cur.size == 0:
                f.frontiers[i] = np.empty(0, dtype=np.int64)
                continue
            cand = nbr[cur].reshape(-1)
            cand = cand[cand >= 0]
            cand = np.unique(cand)
            new = cand[~f.visited[i][cand]]
        f.visited[i][new] = True
        f.frontiers[i] = new
        f.expansions += int(new.size)
        if new.size:
            vals = values[new]
            j = int(np.argmax(vals))  # first max: lowest cell id among ties
            if vals[j] > f.best_value[i]:
                f.best_value[i] = vals[j]
                f.best_cell[i] = new[j]
    f.depth += 1
    return f


def tbfs_q(pos, budget: int, maze: Maze, theta: MazeRewards) -> np.ndarray:
    """Q(a|s) at a given search depth: best heuristic value seen per action.

    Returns a length-4 vector with -inf on walled actions.
    """
    if budget < 1:
        raise ParameterError("tbfs_q requires budget >= 1")
    values = heuristic_values(maze, theta)
    f = frontier_start(maze, pos, theta)
    for _ in range(budget):
        tbfs_step(f, maze, theta, values=values)
    q = np.full(N_ACTIONS, -np.inf)
    q[f.legal] = f.best_value
    return q


def maze_policy(q: np.ndarray) -> np.ndarray:
    """Softmax over the finite entries of a Q vector; zeros elsewhere."""
    q = np.asarray(q, dtype=float)
    legal = np.isfinite(q)
    if not legal.any():
        raise NoLegalActionError("no finite Q entry")
    probs = np.zeros_like(q)
    probs[legal] = softmax(q[legal])
    return probs


def log_policy_row(f: FrontierState, maze: Maze) -> np.ndarray:
    """Log action distribution extracted from a frontier state (any depth)."""
    row = np.full(N_ACTIONS, LOG_FLOOR)
    if f.depth == 0:
        row[f.legal] = -np.log(len(f.legal))
        return row
    q = f.best_value - f.best_value.max()
    row[f.legal] = q - np.log(np.exp(q).sum())
    return row


class TbfsAgent:
    """Anytime-agent adapter around the frontier search (one step = one depth)."""

    def __init__(self, maze: Maze):
        self.maze = maze
        self._values = None
        self._values_key = None

    def _cell_values(self, theta):
        key = theta.raw.tobytes()
        if self._values_key != key:
            self._values = heuristic_values(self.maze, theta)
            self._values_key = key
        return self._values

    def start(self, state, theta, seed=None) -> InferenceState:
        f = frontier_start(self.maze, state, theta)
        return InferenceState(budget_index=0, payload=f)

    def advance(self, istate: InferenceState, state, theta) -> None:
        tbfs_step(istate.payload, self.maze, theta, values=self._cell_values(theta))
        istate.budget_index += 1
        istate.expansions = istate.payload.expansions

    def extract(self, istate: InferenceState, state, theta) -> np.ndarray:
        return log_policy_row(istate.payload, self.maze)


def budget_log_policy(pos, budget: int, maze: Maze, theta: MazeRewards) -> np.ndarray:
    """Log policy at one budget; budget 0 is uniform over legal actions."""
    legal = maze.legal_actions(pos)
    if not legal:
        raise NoLegalActionError(f"no legal action at {pos}")
    if budget == 0:
        row = np.full(N_ACTIONS, LOG_FLOOR)
        row[legal] = -np.log(len(legal))
        return row
    f = frontier_start(maze, pos, theta)
    values = heuristic_values(maze, theta)
    for _ in range(budget):
        tbfs_step(f, maze, theta, values=values)
    return log_policy_row(f, maze)


def boltzmann_exit_masks(pos, maze: Maze, committed: bool = False) -> list[int]:
    """Per-action bitmask of exits a completed walk can end at after that action.

    ``committed`` restricts walks to never step back through the current
    cell (on the tree mazes built here: commit to the chosen branch); a
    branch containing no exit falls back to the unrestricted mask.
    """
    masks = []
    exit_ids = {maze.cell_id(e): k for k, e in enumerate(maze.exits)}
    for a in maze.legal_actions(pos):
        nxt = maze.step(pos, a)
        nxt_id = maze.cell_id(nxt)
        if not committed or nxt_id in exit_ids:
            masks.append(int(maze.exit_reach_masks[nxt_id]))
            continue
        blocked = maze.cell_id(pos)
        seen = {nxt_id}
        stack = [nxt_id]
        mask = 0
        while stack:
            cell = stack.pop()
            if cell in exit_ids:
                mask |= 1 << exit_ids[cell]
                continue  # absorbing: do not expand past an exit
            for nb in maze.neighbor_table[cell]:
                if nb >= 0 and nb != blocked and nb not in seen:
                    seen.add(int(nb))
                    stack.append(int(nb))
        masks.append(mask if mask else int(maze.exit_reach_masks[nxt_id]))
    return masks


def boltzmann_q(pos, temp: float, maze: Maze, theta: MazeRewards,
                committed: bool = False) -> np.ndarray:
    """Temperature-scaled best completed-trajectory reward per action."""
    if not np.isfinite(temp):
        raise ParameterError("temperature must be finite")
    R = theta.effective()
    q = np.full(N_ACTIONS, -np.inf)
    legal = maze.legal_actions(pos)
    if not legal:
        raise NoLegalActionError(f"no legal action at {pos}")
    for a, mask in zip(legal, boltzmann_exit_masks(pos, maze, committed=committed)):
        best = max(R[k] for k in range(maze.num_exits) if (mask >> k) & 1)
        q[a] = temp * best
    return q


def generate_maze(seed: int, width: int, height: int, num_exits: int = 5) -> Maze:
    """Perfect maze via seeded recursive backtracker, exits on the boundary."""
    if width < 5 or height < 5:
        raise ConfigError("maze must be at least 5x5")
    boundary = [(r, c) for r in range(height) for c in range(width)
                if r in (0, height - 1) or c in (0, width - 1)]
    if num_exits > len(boundary) or num_exits < 1:
        raise ConfigError("num_exits must be between 1 and the boundary size")
    rng = np.random.default_rng(seed)
    passable = np.zeros((height, width), dtype=np.uint8)
    visited = np.zeros((height, width), dtype=bool)
    start = (int(rng.integers(height)), int(rng.integers(width)))
    visited[start] = True
    stack = [start]
    while stack:
        r, c = stack[-1]
        options = []
        for d in range(N_ACTIONS):
            nr, nc = r + DR[d], c + DC[d]
            if 0 <= nr < height and 0 <= nc < width and not visited[nr, nc]:
                options.append((d, nr, nc))
        if not options:
            stack.pop()
            continue
        d, nr, nc = options[int(rng.integers(len(options)))]
        passable[r, c] |= 1 << d
        passable[nr, nc] |= 1 << OPPOSITE[d]
        visited[nr, nc] = True
        stack.append((nr, nc))
    idx = rng.choice(len(boundary), size=num_exits, replace=False)
    exits = tuple(boundary[i] for i in sorted(int(i) for i in idx))
    return Maze(width, height, passable, exits)


@dataclass
class Trajectory:
    """One rollout: positions has one more entry than actions."""

    subpop_id: int
    maze_id: int
    positions: list[tuple[int, int]]
    actions: list[int]

    def pairs(self):
        return list(zip(self.positions[:-1], self.actions))


def state_policy_matrix(maze: Maze, pos, grid: BudgetGrid, theta: MazeRewards,
                        cache: dict | None = None) -> np.ndarray:
    """[len(grid), 4] log-policy matrix for one state, optionally memoized."""
    key = tuple(pos)
    if cache is not None and key in cache:
        return cache[key]
    mat = sweep_policies(TbfsAgent(maze), key, grid, theta, state_id=key).log_probs
    if cache is not None:
        cache[key] = mat
    return mat


def rollout(maze: Maze, theta_true: MazeRewards, prior: BudgetPrior,
            start, seed: int, max_steps: int,
            grid: BudgetGrid | None = None, maze_id: int = 0,
            policy_cache: dict | None = None) -> Trajectory:
    """Sample one trajectory: per timestep draw a budget, then an action.

    Ends on reaching any exit or after ``max_steps`` actions.
    """
    if grid is None:
        grid = maze_grid(20)
    if len(prior.logits) != len(grid):
        raise ParameterError("prior length must match the budget grid")
    rng = np.random.default_rng(seed)
    pos = tuple(start)
    positions = [pos]
    actions: list[int] = []
    probs = prior.probabilities()
    for _ in range(max_steps):
        if maze.is_exit(pos):
            break
        mat = state_policy_matrix(maze, pos, grid, theta_true, cache=policy_cache)
        k = int(rng.choice(len(grid), p=probs))
        row = np.exp(mat[k])
        row /= row.sum()
        a = int(rng.choice(N_ACTIONS, p=row))
        actions.append(a)
        pos = maze.step(pos, a)
        positions.append(pos)
    return Trajectory(subpop_id=prior.subpopulation_id, maze_id=maze_id,
                      positions=positions, actions=actions)


def frontier_table(maze: Maze, pos, max_depth: int):
    """Per legal action: (cells, first-visit depth), sorted by (depth, cell).

    The fitting backend reuses these tables across reward parameter values;
    they match the frontier search exactly (same visit semantics).
    """
    legal = maze.legal_actions(pos)
    nbr = maze.neighbor_table
    out = []
    for a in legal:
        root = nbr[maze.cell_id(pos), a]
        depth = np.full(maze.num_cells, -1, dtype=np.int64)
        depth[maze.cell_id(pos)] = 0  # search root: walks never return here
        depth[root] = 1
        frontier = [int(root)]
        d = 1
        while frontier and d < max_depth:
            nxt = []
            for cell in frontier:
                for nb in nbr[cell]:
                    if nb >= 0 and depth[nb] < 0:
                        depth[nb] = d + 1
                        nxt.append(int(nb))
            frontier = nxt
            d += 1
        cells = np.nonzero(depth >= 1)[0]
        order = np.lexsort((cells, depth[cells]))
        out.append((cells[order], depth[cells][order]))
    return legal, out
