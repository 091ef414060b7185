"""N-Tuple Bandit Evolutionary Algorithm over discrete parameter grids."""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

Candidate = tuple[int, ...]  # one value index per dimension


@dataclass(frozen=True)
class ParamSpace:
    """Ordered dimensions, each a finite list of values.

    ``decode`` maps a candidate (tuple of value indices) to a parameter
    dict; a ``derive`` hook may rewrite the dict, e.g. to express one
    parameter as a multiple of another.
    """

    names: tuple[str, ...]
    values: tuple[tuple[Any, ...], ...]
    derive: Optional[Callable[[dict], dict]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.names or len(self.names) != len(self.values):
            raise ValueError("parameter space needs one value list per dimension")
        if any(len(v) == 0 for v in self.values):
            raise ValueError("every dimension needs at least one value")

    @property
    def dims(self) -> int:
        return len(self.names)

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.values)

    def candidates(self) -> list[Candidate]:
        return list(itertools.product(*(range(len(v)) for v in self.values)))

    def random_candidate(self, rng: random.Random) -> Candidate:
        return tuple(rng.randrange(len(v)) for v in self.values)

    def decode(self, cand: Candidate) -> dict:
        params = {name: vals[i] for name, vals, i in zip(self.names, self.values, cand)}
        return self.derive(params) if self.derive else params


def _elastic_derive(params: dict) -> dict:
    out = dict(params)
    out["alpha_abs"] = out.pop("alpha_batches") * out["batch_size"]
    return out


MCTS_SPACE = ParamSpace(("C", "rollout_length"), ((0.1, 1.0, 10.0, 100.0), (20, 40, 60, 80, 100)))
ELASTIC_SPACE = ParamSpace(
    ("C", "rollout_length", "batch_size", "alpha_batches"),
    ((0.1, 1.0, 10.0, 100.0), (20, 40, 60, 80, 100), (20, 40, 60), (4, 8, 12, 16)),
    derive=_elastic_derive,
)
SPACES = {"mcts": MCTS_SPACE, "mcts_u": MCTS_SPACE, "elastic_mcts_u": ELASTIC_SPACE}


class NTupleModel:
    """Fitness statistics for all 1-tuples, all 2-tuples and the full tuple."""

    def __init__(self, dims: int, eps: float = 0.5) -> None:
        tuples: list[tuple[int, ...]] = [(d,) for d in range(dims)]
        tuples += list(itertools.combinations(range(dims), 2))
        full = tuple(range(dims))
        if full not in tuples:
            tuples.append(full)
        self.tuples = tuples
        self.full_index = tuples.index(full)
        self.tables: list[dict[tuple, list[float]]] = [{} for _ in tuples]
        self.evaluations = 0
        self.eps = eps

    def add(self, cand: Candidate, fitness: float) -> None:
        for tup, table in zip(self.tuples, self.tables):
            entry = table.setdefault(tuple(cand[d] for d in tup), [0.0, 0])
            entry[0] += fitness
            entry[1] += 1
        self.evaluations += 1

    def count(self, cand: Candidate) -> int:
        entry = self.tables[self.full_index].get(tuple(cand))
        return entry[1] if entry else 0

    def mean(self, cand: Candidate) -> Optional[float]:
        """Average of the seen tuple means; None when no tuple has data."""
        means = []
        for tup, table in zip(self.tuples, self.tables):
            entry = table.get(tuple(cand[d] for d in tup))
            if entry:
                means.append(entry[0] / entry[1])
        return sum(means) / len(means) if means else None

    def ucb(self, cand: Candidate, k: float) -> float:
        log_total = math.log(max(self.evaluations, 1))
        total = 0.0
        for tup, table in zip(self.tuples, self.tables):
            entry = table.get(tuple(cand[d] for d in tup))
            s, n = entry if entry else (0.0, 0)
            mean = s / n if n else 0.0
            total += mean + k * math.sqrt(log_total / (n + self.eps))
        return total / len(self.tuples)


def mutate(space: ParamSpace, cand: Candidate, rng: random.Random) -> Candidate:
    """Resample each dimension with probability 1/dims, forcing at least one change."""
    mutable = [d for d in range(space.dims) if len(space.values[d]) > 1]
    if not mutable:
        return cand
    out = list(cand)
    changed = False
    for d in mutable:
        if rng.random() < 1.0 / space.dims:
            out[d] = _other_value(len(space.values[d]), out[d], rng)
            changed = True
    if not changed:
        d = mutable[rng.randrange(len(mutable))]
        out[d] = _other_value(len(space.values[d]), out[d], rng)
    return tuple(out)


def _other_value(n: int, current: int, rng: random.Random) -> int:
    v = rng.randrange(n - 1)
    return v if v < current else v + 1


@dataclass
class IterationLog:
    iteration: int
    candidate: Candidate
    params: dict
    fitness: float
    modeled_mean: float


@dataclass
class NTBEAResult:
    best: Candidate
    params: dict
    modeled_mean: float
    history: list[IterationLog]
    model: NTupleModel


def ntbea_run(
    space: ParamSpace,
    fitness: Callable[[dict], float],
    rng: random.Random,
    iterations: int = 50,
    neighbors: int = 50,
    k: float = 2.0,
    eps: float = 0.5,
    start: Optional[Candidate] = None,
    on_iteration: Optional[Callable[[IterationLog], None]] = None,
) -> NTBEAResult:
    """Tune ``space`` against a noisy ``fitness(params) -> float``.

    Each iteration evaluates the current point once, then moves to the
    mutated neighbour with the best bandit score. The answer is the
    evaluated point with the highest modeled mean (ties: most evaluated,
    then first evaluated).
    """
    if space.size == 0:
        raise ValueError("empty parameter space")
    model = NTupleModel(space.dims, eps)
    current = tuple(start) if start is not None else space.random_candidate(rng)
    seen: list[Candidate] = []
    history = []
    for it in range(iterations):
        value = float(fitness(space.decode(current)))
        model.add(current, value)
        if current not in seen:
            seen.append(current)
        log = IterationLog(it, current, space.decode(current), value, model.mean(current))
        history.append(log)
        if on_iteration is not None:
            on_iteration(log)
        best_n, best_score = None, -math.inf
        for _ in range(neighbors):
            cand = mutate(space, current, rng)
            score = model.ucb(cand, k)
            if score > best_score:
                best_n, best_score = cand, score
        current = best_n
    best = max(seen, key=lambda c: (model.mean(c), model.count(c), -seen.index(c)))
    return NTBEAResult(best, space.decode(best), model.mean(best), history, model)


def fitness_vs_combat(
    agent: str,
    params: dict,
    levels: Sequence[Any],
    games: int,
    rng: random.Random,
    fm_budget: Optional[int] = None,
    opponent: str = "combat",
) -> float:
    """Score of ``agent`` with ``params`` against the Combat Agent.

    Wins count 1 and draws 0.5. Game g is played on a level drawn from
    ``rng`` with the tuned agent on side g % 2.
    """
    from .harness import AgentSpec, run_match

    if games < 1:
        raise ValueError("games must be >= 1")
    me, other = AgentSpec(agent, dict(params)), AgentSpec(opponent)
    score = 0.0
    for g in range(games):
        level = levels[rng.randrange(len(levels))]
        side = g % 2
        pair = (me, other) if side == 0 else (other, me)
        rec = run_match(level.state, pair, rng.getrandbits(63), fm_budget, level.level_id, side)
        winner = rec.winner_side()
        if winner == 0:
            score += 1.0
        elif winner is None and rec.outcome == "draw":
            score += 0.5
    return score / games
