"""Independent brute-force oracles used by the tests.

These deliberately avoid the package's optimized search paths: trajectory
enumeration is a plain recursive walk over action sequences, and value
formulas are scalar re-derivations.
"""

import math

import numpy as np


def manh_value(pos, maze, rewards_eff):
    """Scalar re-derivation of the distance-attention state value."""
    num = den = 0.0
    for (er, ec), r in zip(maze.exits, rewards_eff):
        d = abs(pos[0] - er) + abs(pos[1] - ec)
        w = math.exp(-d * r)
        num += r * w
        den += w
    return num / den


def brute_force_tbfs_q(maze, pos, budget, theta):
    """Enumerate every legal action sequence of length 1..budget that never
    steps back onto the start cell; running max of the heuristic value over
    end cells, per initial action."""
    from inferbudget.maze import heuristic_values

    values = heuristic_values(maze, theta)
    start_cell = maze.cell_id(pos)
    best = {}

    def rec(cell, depth, first):
        if values[cell] > best.get(first, -np.inf):
            best[first] = values[cell]
        if depth == budget:
            return
        r, c = maze.cell_pos(cell)
        for a in maze.legal_actions((r, c)):
            nxt = maze.cell_id(maze.step((r, c), a))
            if nxt != start_cell:
                rec(nxt, depth + 1, first)

    for a in maze.legal_actions(pos):
        rec(maze.cell_id(maze.step(pos, a)), 1, a)
    q = np.full(4, -np.inf)
    for a, v in best.items():
        q[a] = v
    return q


def flood_fill_connected(maze):
    """Independent connectivity check over the passability mask."""
    h, w = maze.height, maze.width
    seen = {(0, 0)}
    stack = [(0, 0)]
    moves = ((-1, 0, 0), (0, 1, 1), (1, 0, 2), (0, -1, 3))
    while stack:
        r, c = stack.pop()
        bits = int(maze.passable[r, c])
        for dr, dc, d in moves:
            if (bits >> d) & 1:
                nxt = (r + dr, c + dc)
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
    return len(seen) == h * w


def central_difference(f, x0, step=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x0 = np.asarray(x0, dtype=float)
    g = np.zeros_like(x0)
    for i in range(x0.size):
        e = np.zeros_like(x0)
        e[i] = step
        g[i] = (f(x0 + e) - f(x0 - e)) / (2 * step)
    return g


def linear_mixture_log_prob(prior_probs, policy_probs_column):
    """Linear-space mixture probability, for checking log-space paths."""
    return math.log(float(np.dot(prior_probs, policy_probs_column)))
