"""Single-threaded reference search.

Classic selection/expansion/simulation/backpropagation rounds with plain
UCB1 and none of the distributed machinery -- no messages, no virtual loss,
no stores.  Same expansion threshold, pruning, and accounting as the
distributed engine, so a single-worker distributed run with one in-flight
unit must reproduce its (leaf, reward) trace exactly; that equivalence is
the main correctness oracle for the message plumbing.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from mpmcts import kernels
from mpmcts.config import RunConfig
from mpmcts.problems import prune_by_cumulative_prior
from mpmcts.tree import NodePath, derive_seed


@dataclass
class _Node:
    state: object
    wins: float = 0.0
    visits: int = 0
    terminal: bool = False
    expanded: bool = False
    actions: list[int] = field(default_factory=list)
    child_wins: list[float] = field(default_factory=list)
    child_visits: list[int] = field(default_factory=list)


@dataclass
class SequentialResult:
    trace: list[tuple[NodePath, float]]
    best_reward: float | None
    best_solution: str
    tree_size: int


def run_sequential_uct(cfg: RunConfig, problem) -> SequentialResult:
    if cfg.budget_sims is None:
        raise ValueError("the sequential oracle is budgeted by budget_sims")
    rng = random.Random(derive_seed(cfg.seed, "rollout", 0))
    c = cfg.exploration_c
    max_depth = cfg.derived_dimensions()[0]
    tree: dict[NodePath, _Node] = {}
    trace: list[tuple[NodePath, float]] = []
    best_reward: float | None = None
    best_solution = ""
    zeros: list[int] = []

    for _ in range(cfg.budget_sims):
        path: NodePath = ()
        while True:
            node = tree.get(path)
            if node is None:
                state = _state_of(problem, path)
                node = _Node(state=state, terminal=problem.is_terminal(state))
                tree[path] = node
                break  # fresh leaf: simulate here
            if (
                not node.expanded
                and not node.terminal
                and node.visits >= cfg.expansion_threshold - 1
                and len(path) < max_depth
            ):
                _expand(problem, node, cfg.prune_cumulative)
            if not node.actions:
                break  # terminal or unexpandable: simulate here again
            if len(zeros) < len(node.actions):
                zeros.extend([0] * (len(node.actions) - len(zeros)))
            idx = kernels.best_index(
                kernels.UCB1,
                c,
                node.child_wins,
                node.child_visits,
                zeros,
                node.visits,
                0,
            )
            path = path + (node.actions[idx],)

        leaf = tree[path]
        dead_end = leaf.terminal or len(path) >= max_depth
        if leaf.visits > 0 and dead_end:
            # re-measuring a dead end records the penalizing -1, same as the
            # distributed workers
            reward, solution = -1.0, ""
        else:
            _, solution = problem.rollout(leaf.state, rng)
            reward = problem.score(solution)
        trace.append((path, reward))
        if best_reward is None or reward > best_reward:
            best_reward, best_solution = reward, solution

        # walk the reward back up, mirroring the distributed accounting:
        # every ancestor gains a visit, the leaf's own node too
        leaf.wins += reward
        leaf.visits += 1
        for depth in range(len(path) - 1, -1, -1):
            parent = tree[path[:depth]]
            slot = parent.actions.index(path[depth])
            parent.child_wins[slot] += reward
            parent.child_visits[slot] += 1
            parent.wins += reward
            parent.visits += 1

    return SequentialResult(
        trace=trace,
        best_reward=best_reward,
        best_solution=best_solution,
        tree_size=len(tree),
    )


def _state_of(problem, path: NodePath):
    state = problem.root_state()
    for action in path:
        state = problem.apply(state, action)
    return state


def _expand(problem, node: _Node, prune_cumulative: float) -> None:
    candidates = problem.expand_candidates(node.state)
    if not candidates:
        node.terminal = True
        return
    kept = prune_by_cumulative_prior(candidates, prune_cumulative)
    node.actions = [action for action, _ in kept]
    node.child_wins = [0.0] * len(kept)
    node.child_visits = [0] * len(kept)
    node.expanded = True
