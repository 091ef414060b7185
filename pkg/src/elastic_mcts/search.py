"""MCTS, unit-ordered MCTS_u and Elastic MCTS_u over the Kill The King forward model.

One search decides the action of a single unit. With ``unit_ordering``
each tree layer belongs to one unit of the searching player, in a fixed
order; otherwise a node branches over every unacted unit's actions.
Opponent turns are not tree layers: once the searching player's turn is
over, the transition plays a full opponent turn with uniformly random
legal actions.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .abstraction import Abstraction, BatchReport, compression_rate, timed_construct
from .engine import ForwardModel, GameState, UnitAction, enumerate_actions, outcome, random_action
from .engine.state import OutcomeKind

ALPHA_MODES = ("iterations", "proportion")


@dataclass
class SearchParams:
    """Search hyper-parameters.

    ``alpha_abs`` is an iteration count in ``iterations`` mode and a
    fraction of ``fm_budget`` in ``proportion`` mode.
    """

    C: float = 1.0
    rollout_length: int = 20
    fm_budget: int = 30_000
    batch_size: int = 20
    alpha_abs: float = 240
    alpha_mode: str = "iterations"
    eta_r: float = 0.1
    eta_t: float = 0.3
    abstraction: bool = False
    unit_ordering: bool = True
    transition_error_mode: str = "normalized"

    def __post_init__(self) -> None:
        if self.C < 0:
            raise ValueError("C must be non-negative")
        if self.rollout_length < 0:
            raise ValueError("rollout_length must be non-negative")
        if self.fm_budget < 1:
            raise ValueError("fm_budget must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.alpha_mode not in ALPHA_MODES:
            raise ValueError(f"alpha_mode must be one of {ALPHA_MODES}")
        if self.alpha_abs < 0:
            raise ValueError("alpha_abs must be non-negative")
        if self.alpha_mode == "proportion" and self.alpha_abs > 1:
            raise ValueError("alpha_abs in proportion mode must lie in [0, 1]")
        if self.abstraction and not self.unit_ordering:
            raise ValueError("state abstraction requires unit ordering")


def evaluate_state(state: GameState, perspective: int) -> float:
    """Terminal: 1 / -1 / 0 for win / loss / draw. Otherwise
    ``1 - d*h / (D*H)`` with d the closest own unit's Manhattan distance to
    the enemy King, h its health, D = width + height and H its max health."""
    res = outcome(state)
    if res.kind is OutcomeKind.WIN:
        return 1.0 if res.winner == perspective else -1.0
    if res.kind is OutcomeKind.DRAW:
        return 0.0
    king = state.king_of(1 - perspective)
    kx, ky = king.pos
    d = min(abs(u.pos[0] - kx) + abs(u.pos[1] - ky) for u in state.units if u.owner == perspective)
    big_d = state.grid.width + state.grid.height
    return 1.0 - (d * king.health) / (big_d * king.spec.max_health)


def ucb1(x: float, n: float, parent_n: float, c: float) -> float:
    if n <= 0:
        return math.inf
    return x / n + c * math.sqrt(math.log(parent_n) / n)


def transition_signature(after: GameState, action: UnitAction) -> tuple:
    """Acting unit's post-action position and health, plus the target's id and post-action health."""
    actor = after.by_id.get(action.unit_id)
    sig = (actor.pos, actor.health) if actor is not None else (None, 0)
    if action.target_id is None:
        return sig
    target = after.by_id.get(action.target_id)
    return sig + (action.target_id, target.health if target is not None else 0)


class SearchNode:
    """Tree node for one unit's decision point.

    ``X`` and ``N`` are the statistics of the edge leading into the node
    (for the root: all iterations). ``index`` is the incoming action's
    position in the parent's enumeration order.
    """

    __slots__ = (
        "node_id", "depth", "slot", "parent", "action", "index", "signature", "state",
        "X", "N", "children", "untried", "terminal", "group",
    )

    def __init__(self, node_id, depth, slot, state=None, parent=None, action=None, index=0, signature=None):
        self.node_id = node_id
        self.depth = depth
        self.slot = slot
        self.state = state
        self.parent = parent
        self.action = action
        self.index = index
        self.signature = signature
        self.X = 0.0
        self.N = 0
        self.children: list[SearchNode] = []
        self.untried: Optional[list[tuple[int, UnitAction]]] = None
        self.terminal = False
        self.group = None

    @property
    def edges(self) -> list[tuple[UnitAction, SearchNode, float, float]]:
        return [(c.action, c, c.X, c.N) for c in self.children]

    def stats(self, use_groups: bool = True) -> tuple[float, float]:
        g = self.group
        if use_groups and g is not None:
            return g.stats()
        return self.X, self.N

    def __repr__(self) -> str:
        return f"SearchNode(id={self.node_id}, depth={self.depth}, slot={self.slot}, X={self.X:.3f}, N={self.N})"


@dataclass
class SearchStats:
    iterations: int = 0
    fm_calls: int = 0
    fm_budget: int = 0
    wall_ms: float = 0.0
    tree_nodes: int = 0
    groups: int = 0
    split_iteration: Optional[int] = None
    batches: list[BatchReport] = field(default_factory=list)

    @property
    def overshoot(self) -> int:
        return max(0, self.fm_calls - self.fm_budget)


@dataclass
class SearchResult:
    action: UnitAction
    stats: SearchStats
    root: SearchNode


class Search:
    """One decision's search tree plus its forward-model context and abstraction."""

    def __init__(
        self,
        root_state: GameState,
        params: SearchParams,
        unit_order: Sequence[int],
        rng: random.Random,
        on_batch: Optional[Callable[[BatchReport], None]] = None,
    ) -> None:
        self.params = params
        self.player = root_state.active_player
        self.unit_order = list(unit_order)
        self.rng = rng
        self.fm = ForwardModel()
        self.on_batch = on_batch
        self.nodes: list[SearchNode] = []
        self.abstraction: Optional[Abstraction] = None
        if params.abstraction:
            self.abstraction = Abstraction(params.eta_r, params.eta_t, params.transition_error_mode)
        self.iterations = 0
        self.stats = SearchStats(fm_budget=params.fm_budget)
        self.root = self._new_node(root_state, depth=0, parent=None, action=None, index=0, signature=None)
        self.root.N = 1
        if not self.root.terminal and not self._actions(self.root):
            raise ValueError("no legal action for the searching player")

    @property
    def grouping(self) -> bool:
        return self.abstraction is not None and self.abstraction.active

    def _acting_slot(self, state: GameState):
        """Slot of the unit deciding in ``state`` (index in unit order), or None for plain MCTS."""
        if not self.params.unit_ordering:
            return None
        acted = state.acted
        by_id = state.by_id
        for slot, uid in enumerate(self.unit_order):
            if uid in by_id and uid not in acted:
                return slot
        raise ValueError("unit order does not cover the searching player's living units")

    def _new_node(self, state, depth, parent, action, index, signature) -> SearchNode:
        terminal = outcome(state).is_terminal
        slot = None if terminal else self._acting_slot(state)
        node = SearchNode(len(self.nodes), depth, slot, state, parent, action, index, signature)
        node.terminal = terminal
        self.nodes.append(node)
        return node

    def _actions(self, node: SearchNode) -> list[tuple[int, UnitAction]]:
        if node.untried is None:
            state = node.state
            if self.params.unit_ordering:
                unit = state.by_id[self.unit_order[node.slot]]
                actions = enumerate_actions(state, unit)
            else:
                actions = [a for u in state.unacted_units() for a in enumerate_actions(state, u)]
            node.untried = list(enumerate(actions))
        return node.untried

    def _opponent_turn(self, state: GameState) -> GameState:
        fm, rng, player = self.fm, self.rng, self.player
        while state.active_player != player and not outcome(state).is_terminal:
            unit = state.unacted_units()[0]
            state = fm.apply(state, random_action(state, unit, rng), validate=False)
        return state

    def _expand(self, node: SearchNode) -> SearchNode:
        untried = node.untried
        k = self.rng.randrange(len(untried))
        untried[k], untried[-1] = untried[-1], untried[k]
        index, action = untried.pop()
        after = self.fm.apply(node.state, action, validate=False)
        signature = transition_signature(after, action)
        if after.active_player != self.player:
            after = self._opponent_turn(after)
        child = self._new_node(after, node.depth + 1, node, action, index, signature)
        node.children.append(child)
        return child

    def _select(self, node: SearchNode) -> SearchNode:
        c = self.params.C
        parent_n = node.N
        best = None
        best_key = None
        for child in node.children:
            g = child.group
            if g is not None:
                m = len(g.members)
                v = ucb1(g.sum_x / m, g.sum_n / m, parent_n, c)
            else:
                v = ucb1(child.X, child.N, parent_n, c)
            if best is None or v > best_key or (v == best_key and child.index < best.index):
                best, best_key = child, v
        return best

    def _rollout(self, state: GameState) -> float:
        fm, rng = self.fm, self.rng
        budget = self.params.fm_budget
        for _ in range(self.params.rollout_length):
            if fm.calls >= budget or outcome(state).is_terminal:
                break
            unit = state.unacted_units()[0]
            state = fm.apply(state, random_action(state, unit, rng), validate=False)
        return evaluate_state(state, self.player)

    def iterate(self) -> None:
        """One selection, expansion, rollout and backpropagation pass."""
        node = self.root
        path = [node]
        while True:
            if node.terminal:
                reward = evaluate_state(node.state, self.player)
                break
            if self._actions(node):
                node = self._expand(node)
                path.append(node)
                reward = self._rollout(node.state)
                break
            node = self._select(node)
            path.append(node)
        for n in path:
            n.X += reward
            n.N += 1
            g = n.group
            if g is not None:
                g.sum_x += reward
                g.sum_n += 1
        self.iterations += 1

    def _abstraction_over(self) -> bool:
        p = self.params
        if p.alpha_mode == "iterations":
            return self.iterations >= p.alpha_abs
        return p.alpha_abs < 1 and self.fm.calls >= p.alpha_abs * p.fm_budget

    def _after_iteration(self) -> None:
        if not self.grouping:
            return
        if self.iterations % self.params.batch_size == 0:
            report = timed_construct(self.abstraction, self.nodes, self.iterations)
            self.stats.batches.append(report)
            if self.on_batch is not None:
                self.on_batch(report)
        if self._abstraction_over():
            self.abstraction.split()
            self.stats.split_iteration = self.iterations

    def compression_rate(self) -> float:
        return compression_rate(len(self.nodes), self.abstraction)

    def recommend(self) -> SearchNode:
        """Root child with most visits, then higher mean value, then lowest action index.

        Reads group statistics while the abstraction is still active.
        """
        use_groups = self.grouping
        best = None
        best_key = None
        for child in self.root.children:
            x, n = child.stats(use_groups)
            key = (n, x / n if n else -math.inf, -child.index)
            if best is None or key > best_key:
                best, best_key = child, key
        return best

    def run(self) -> SearchResult:
        t0 = time.perf_counter()
        budget = self.params.fm_budget
        if self.root.terminal:
            raise ValueError("cannot search from a terminal state")
        # iterations ending in terminal nodes spend no forward-model calls
        while self.fm.calls < budget and self.iterations < budget:
            self.iterate()
            self._after_iteration()
        best = self.recommend()
        stats = self.stats
        stats.iterations = self.iterations
        stats.fm_calls = self.fm.calls
        stats.tree_nodes = len(self.nodes)
        stats.groups = self.abstraction.n_groups(len(self.nodes)) if self.grouping else len(self.nodes)
        stats.wall_ms = (time.perf_counter() - t0) * 1000.0
        return SearchResult(best.action, stats, self.root)


def run_search(
    root_state: GameState,
    params: SearchParams,
    unit_order: Sequence[int],
    rng: random.Random,
    on_batch: Optional[Callable[[BatchReport], None]] = None,
) -> SearchResult:
    """Search from ``root_state`` until the forward-model budget is spent."""
    return Search(root_state, params, unit_order, rng, on_batch).run()


def draw_unit_order(state: GameState, player: int, rng: random.Random) -> list[int]:
    order = [u.id for u in state.units if u.owner == player]
    rng.shuffle(order)
    return order


def build_turn(
    state: GameState,
    params: SearchParams,
    unit_order: Sequence[int],
    rng: random.Random,
) -> tuple[list[UnitAction], GameState]:
    """Search and apply one action per living unit until the searching player's turn ends."""
    player = state.active_player
    actions = []
    fm = ForwardModel()
    while state.active_player == player and not outcome(state).is_terminal:
        result = run_search(state, params, unit_order, rng)
        actions.append(result.action)
        state = fm.apply(state, result.action)
    return actions, state
