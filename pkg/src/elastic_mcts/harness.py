"""Matches, tournaments, threshold sweeps and compression measurement.

Every match seed is derived from (master seed, level id, seed index,
side), so results do not depend on scheduling or on ``jobs``.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import yaml

from .agents import AGENT_NAMES, Agent, make_agent
from .engine import (
    ForwardModel,
    GameState,
    IllegalActionError,
    build_state,
    distinct_placements,
    outcome,
    parse_composition,
    read_game_config,
    read_level,
    read_map,
)
from .engine.state import OutcomeKind
from .engine.units import UnitTypeSpec

log = logging.getLogger(__name__)

DESK_LEVELS = 10
DESK_SEEDS = (0, 1, 2)


class ConfigError(ValueError):
    pass


def derive_seed(*parts: Any) -> int:
    """Stable 63-bit seed from arbitrary printable parts."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


@dataclass(frozen=True)
class AgentSpec:
    name: str
    params: dict = field(default_factory=dict)
    label: Optional[str] = None

    def __post_init__(self) -> None:
        if self.name not in AGENT_NAMES and self.name not in EXTRA_AGENTS:
            raise ConfigError(f"unknown agent {self.name!r}; expected one of {AGENT_NAMES}")

    @property
    def display(self) -> str:
        return self.label or self.name

    def build(self, fm_budget: Optional[int]) -> Agent:
        if self.name in EXTRA_AGENTS:
            return EXTRA_AGENTS[self.name](**self.params)
        return make_agent(self.name, self.params, fm_budget)


# test doubles and other out-of-tree agents register here by name
EXTRA_AGENTS: dict[str, Callable[..., Agent]] = {}


@dataclass(frozen=True)
class Level:
    level_id: str
    state: GameState


@dataclass
class DecisionRecord:
    player: int
    agent: str
    turn: int
    unit_id: int
    action: str
    iterations: int = 0
    fm_calls: int = 0
    overshoot: int = 0
    wall_ms: float = field(default=0.0, compare=False)  # the only non-reproducible field
    tree_nodes: int = 0
    groups: int = 0
    compression: list[tuple[int, float]] = field(default_factory=list)


@dataclass
class MatchRecord:
    level: str
    seed: int
    side: int
    players: tuple[str, str]
    outcome: str
    turns: int
    error: Optional[str] = None
    decisions: list[DecisionRecord] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.outcome == "failure"

    def winner_side(self) -> Optional[int]:
        """Index into the experiment's agent pair of the winner (None for draw/failure)."""
        if self.outcome not in ("win0", "win1"):
            return None
        player = int(self.outcome[-1])
        return player if self.side == 0 else 1 - player


MATCH_FIELDS = ["level", "seed", "side", "player0", "player1", "outcome", "winner", "turns", "error",
                "decisions", "fm_calls", "mean_tree_nodes", "mean_groups"]
DECISION_FIELDS = ["level", "seed", "side", "player", "agent", "turn", "unit_id", "action", "iterations",
                   "fm_calls", "overshoot", "wall_ms", "tree_nodes", "groups"]


def run_match(
    state: GameState,
    agents: Sequence[AgentSpec],
    seed: int,
    fm_budget: Optional[int] = None,
    level_id: str = "",
    side: int = 0,
    seed_index: Optional[int] = None,
    max_decisions: Optional[int] = None,
) -> MatchRecord:
    """Play one full game; ``agents[p]`` controls player p.

    An agent returning an illegal action or raising aborts the match with
    a ``failure`` record instead of propagating.
    """
    players = [spec.build(fm_budget) for spec in agents]
    rngs = [random.Random(derive_seed(seed, "agent", p)) for p in range(2)]
    names = (agents[0].display, agents[1].display)
    record = MatchRecord(level_id, seed if seed_index is None else seed_index, side, names, "ongoing", state.turn)
    fm = ForwardModel()
    try:
        while True:
            res = outcome(state)
            if res.is_terminal:
                break
            p = state.active_player
            t0 = time.perf_counter()
            action = players[p].act(state, rngs[p])
            wall = (time.perf_counter() - t0) * 1000.0
            st = players[p].last_stats
            if max_decisions is None or len(record.decisions) < max_decisions:
                dec = DecisionRecord(p, names[p], state.turn, action.unit_id, str(action), wall_ms=wall)
                if st is not None:
                    dec.iterations, dec.fm_calls, dec.overshoot = st.iterations, st.fm_calls, st.overshoot
                    dec.tree_nodes, dec.groups = st.tree_nodes, st.groups
                    dec.compression = [(b.iteration, b.compression) for b in st.batches]
                record.decisions.append(dec)
            state = fm.apply(state, action)
    except IllegalActionError as exc:
        record.outcome, record.error = "failure", f"illegal action: {exc}"
        record.turns = state.turn
        return record
    except Exception as exc:  # agent bug: keep the tournament going, report separately
        log.exception("match %s seed %s aborted", level_id, seed)
        record.outcome, record.error = "failure", f"{type(exc).__name__}: {exc}"
        record.turns = state.turn
        return record
    record.outcome = str(res) if res.kind is not OutcomeKind.DRAW else "draw"
    record.turns = state.turn
    return record


@dataclass
class ExperimentConfig:
    """Declarative tournament description (usually loaded from YAML)."""

    agents: tuple[AgentSpec, AgentSpec]
    levels: list[Level]
    seeds: list[int]
    fm_budget: int = 30_000
    master_seed: int = 0
    output: Optional[Path] = None
    jobs: int = 1
    name: str = "experiment"
    sweep_proportions: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    max_decisions_per_game: Optional[int] = None
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if not self.levels:
            raise ConfigError("at least one level is required")
        if self.fm_budget < 1:
            raise ConfigError("fm_budget must be positive")

    def with_agents(self, a: AgentSpec, b: AgentSpec) -> ExperimentConfig:
        return replace(self, agents=(a, b))


def _agent_spec(entry: Any) -> AgentSpec:
    if isinstance(entry, str):
        return AgentSpec(entry)
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"agent entry must be a name or a mapping with 'name', got {entry!r}")
    return AgentSpec(entry["name"], dict(entry.get("params") or {}), entry.get("label"))


def generated_levels(
    map_path: str | Path,
    composition: str,
    count: int,
    seed: int,
    unit_types: Optional[dict[str, UnitTypeSpec]] = None,
) -> list[Level]:
    """In-memory equivalent of ``gen-levels``: distinct seeded placements."""
    map_path = Path(map_path)
    grid = read_map(map_path)
    names = parse_composition(composition)
    kwargs = {"unit_types": unit_types} if unit_types else {}
    levels = []
    for i, placements in enumerate(distinct_placements(grid, names, count, random.Random(seed))):
        level_id = f"{map_path.stem}_{composition.upper()}_{i:03d}"
        levels.append(Level(level_id, build_state(grid, placements, **kwargs)))
    return levels


def resolve_path(base: Path, p: str | Path) -> Path:
    """``base / p`` if it exists, else the packaged data file of that name, else ``base / p``."""
    p = Path(p)
    if p.is_absolute():
        return p
    if not (base / p).exists():
        from importlib import resources

        packaged = Path(str(resources.files("elastic_mcts.data").joinpath(str(p))))
        if packaged.exists():
            return packaged
    return base / p


def load_levels(spec: dict, base: Path, unit_types: Optional[dict[str, UnitTypeSpec]] = None) -> list[Level]:
    """Load every level up front so that a bad path fails before any game is played."""
    if "files" in spec:
        files = spec["files"]
        if isinstance(files, str):
            files = sorted(str(p) for p in base.glob(files)) or [files]
        kwargs = {"unit_types": unit_types} if unit_types else {}
        return [Level(Path(f).stem, read_level(resolve_path(base, f), **kwargs)) for f in files]
    if "generate" in spec:
        g = spec["generate"]
        try:
            return generated_levels(
                resolve_path(base, g["map"]), g["composition"], int(g["count"]), int(g.get("seed", 0)), unit_types
            )
        except KeyError as exc:
            raise ConfigError(f"levels.generate is missing {exc}") from None
    raise ConfigError("levels must contain 'files' or 'generate'")


def load_config(path: str | Path, overrides: Optional[dict[str, Any]] = None) -> ExperimentConfig:
    path = Path(path)
    data = yaml.safe_load(path.read_text()) or {}
    return config_from_dict(data, path.parent, overrides)


def config_from_dict(data: dict, base: Path = Path("."), overrides: Optional[dict[str, Any]] = None) -> ExperimentConfig:
    data = dict(data)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    agents = data.get("agents")
    if not agents or len(agents) != 2:
        raise ConfigError("config needs exactly two agents")
    unit_types = None
    if data.get("game_config"):
        unit_types = read_game_config(resolve_path(base, data["game_config"]))
    levels = load_levels(data.get("levels") or {}, base, unit_types)
    seeds = data.get("seeds", list(DESK_SEEDS))
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    output = data.get("output")
    return ExperimentConfig(
        agents=(_agent_spec(agents[0]), _agent_spec(agents[1])),
        levels=levels,
        seeds=[int(s) for s in seeds],
        fm_budget=int(data.get("fm_budget", 30_000)),
        master_seed=int(data.get("master_seed", data.get("seed", 0))),
        output=Path(output) if output else None,
        jobs=int(data.get("jobs", 1)),
        name=str(data.get("name", "experiment")),
        sweep_proportions=tuple(float(p) for p in data.get("sweep_proportions", (0.0, 0.25, 0.5, 0.75, 1.0))),
        max_decisions_per_game=data.get("max_decisions_per_game"),
        raw=data,
    )


@dataclass(frozen=True)
class MatchTask:
    level: Level
    seed_index: int
    seed_value: int
    side: int
    agents: tuple[AgentSpec, AgentSpec]
    fm_budget: int
    match_seed: int
    max_decisions: Optional[int]


def schedule(config: ExperimentConfig) -> list[MatchTask]:
    tasks = []
    a, b = config.agents
    for level in config.levels:
        for seed_index, seed in enumerate(config.seeds):
            for side in (0, 1):
                pair = (a, b) if side == 0 else (b, a)
                match_seed = derive_seed(config.master_seed, level.level_id, seed, side)
                tasks.append(MatchTask(level, seed_index, seed, side, pair, config.fm_budget, match_seed,
                                       config.max_decisions_per_game))
    return tasks


def _play(task: MatchTask) -> MatchRecord:
    rec = run_match(task.level.state, task.agents, task.match_seed, task.fm_budget, task.level.level_id,
                    task.side, task.seed_value, task.max_decisions)
    return rec


def run_tasks(tasks: list[MatchTask], jobs: int = 1, progress: Optional[Callable[[int, int], None]] = None) -> list[MatchRecord]:
    records: list[MatchRecord] = []
    if jobs <= 1:
        for i, task in enumerate(tasks):
            records.append(_play(task))
            if progress:
                progress(i + 1, len(tasks))
        return records
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for i, rec in enumerate(pool.map(_play, tasks)):
            records.append(rec)
            if progress:
                progress(i + 1, len(tasks))
    return records


@dataclass
class WinRateSummary:
    """Win rates of the experiment's agent pair; std is across per-seed win rates."""

    agents: tuple[str, str]
    win_rate: tuple[float, float]
    win_std: tuple[float, float]
    draw_rate: float
    matches: int
    failures: int
    per_seed: list[tuple[int, float, float, float]]

    def row(self) -> list[str]:
        return [
            self.agents[0],
            self.agents[1],
            f"{100 * self.win_rate[0]:.1f}±{100 * self.win_std[0]:.1f}%",
            f"{100 * self.win_rate[1]:.1f}±{100 * self.win_std[1]:.1f}%",
        ]


def _std(values: list[float]) -> float:
    return statistics.stdev(values) if len(values) > 1 else 0.0


def summarize(records: list[MatchRecord], agents: tuple[str, str], seeds: Sequence[int]) -> WinRateSummary:
    per_seed = []
    for seed in seeds:
        recs = [r for r in records if r.seed == seed and not r.failed]
        n = len(recs)
        if n == 0:
            continue
        w0 = sum(1 for r in recs if r.winner_side() == 0) / n
        w1 = sum(1 for r in recs if r.winner_side() == 1) / n
        draws = sum(1 for r in recs if r.outcome == "draw") / n
        per_seed.append((seed, w0, w1, draws))
    ok = [r for r in records if not r.failed]
    if per_seed:
        rates = (statistics.fmean(s[1] for s in per_seed), statistics.fmean(s[2] for s in per_seed))
        stds = (_std([s[1] for s in per_seed]), _std([s[2] for s in per_seed]))
        draws = statistics.fmean(s[3] for s in per_seed)
    else:
        rates, stds, draws = (math.nan, math.nan), (math.nan, math.nan), math.nan
    return WinRateSummary(agents, rates, stds, draws, len(records), len(records) - len(ok), per_seed)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[MatchRecord]
    summary: WinRateSummary


def run_experiment(config: ExperimentConfig, progress: Optional[Callable[[int, int], None]] = None) -> ExperimentResult:
    tasks = schedule(config)
    records = run_tasks(tasks, config.jobs, progress)
    labels = (config.agents[0].display, config.agents[1].display)
    summary = summarize(records, labels, config.seeds)
    result = ExperimentResult(config, records, summary)
    if config.output:
        write_matches_csv(records, config.output)
        write_decisions_csv(records, config.output.with_name(config.output.stem + "_decisions.csv"))
        write_summary_csv([summary], config.output.with_name(config.output.stem + "_summary.csv"))
    return result


def write_matches_csv(records: Iterable[MatchRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MATCH_FIELDS)
        for r in records:
            decs = r.decisions
            search = [d for d in decs if d.fm_calls]
            winner = r.winner_side()
            w.writerow([
                r.level, r.seed, r.side, r.players[0], r.players[1], r.outcome,
                "" if winner is None else winner, r.turns, r.error or "", len(decs),
                sum(d.fm_calls for d in decs),
                f"{statistics.fmean(d.tree_nodes for d in search):.1f}" if search else "",
                f"{statistics.fmean(d.groups for d in search):.1f}" if search else "",
            ])


def write_decisions_csv(records: Iterable[MatchRecord], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DECISION_FIELDS)
        for r in records:
            for d in r.decisions:
                w.writerow([r.level, r.seed, r.side, d.player, d.agent, d.turn, d.unit_id, d.action, d.iterations,
                            d.fm_calls, d.overshoot, f"{d.wall_ms:.3f}", d.tree_nodes, d.groups])


SUMMARY_FIELDS = ["agent1", "agent2", "agent1_win", "agent1_std", "agent2_win", "agent2_std", "draw", "matches", "failures"]


def write_summary_csv(summaries: Iterable[WinRateSummary], path: str | Path, extra: Optional[list[dict]] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summaries = list(summaries)
    extra_keys = list(extra[0]) if extra else []
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(extra_keys + SUMMARY_FIELDS)
        for i, s in enumerate(summaries):
            prefix = [extra[i][k] for k in extra_keys] if extra else []
            w.writerow(prefix + [
                s.agents[0], s.agents[1], f"{s.win_rate[0]:.4f}", f"{s.win_std[0]:.4f}",
                f"{s.win_rate[1]:.4f}", f"{s.win_std[1]:.4f}", f"{s.draw_rate:.4f}", s.matches, s.failures,
            ])


def format_table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """Aligned plain-text table."""
    cells = [list(map(str, header))] + [list(map(str, r)) for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def elastic_index(config: ExperimentConfig) -> int:
    for i, spec in enumerate(config.agents):
        if spec.name == "elastic_mcts_u":
            return i
    raise ConfigError("this command needs an elastic_mcts_u agent in the config")


@dataclass
class SweepRow:
    proportion: float
    summary: WinRateSummary
    records: list[MatchRecord]


def sweep_threshold(
    config: ExperimentConfig,
    proportions: Optional[Sequence[float]] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> list[SweepRow]:
    """One experiment per abstraction-abandon proportion, on shared levels and seeds."""
    idx = elastic_index(config)
    rows = []
    for prop in proportions if proportions is not None else config.sweep_proportions:
        spec = config.agents[idx]
        params = dict(spec.params, alpha_mode="proportion", alpha_abs=float(prop))
        label = f"{spec.display}@{round(100 * prop)}%"
        agents = list(config.agents)
        agents[idx] = AgentSpec(spec.name, params, label)
        sub = replace(config, agents=tuple(agents), output=None)
        result = run_experiment(sub, progress)
        rows.append(SweepRow(prop, result.summary, result.records))
    if config.output:
        write_sweep_csv(rows, idx, config.output)
    return rows


SWEEP_FIELDS = ["proportion", "elastic_win", "elastic_std", "opponent_win", "opponent_std", "draw", "matches", "failures"]


def write_sweep_csv(rows: list[SweepRow], elastic_idx: int, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    o = 1 - elastic_idx
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_FIELDS)
        for r in rows:
            s = r.summary
            w.writerow([f"{r.proportion:g}", f"{s.win_rate[elastic_idx]:.4f}", f"{s.win_std[elastic_idx]:.4f}",
                        f"{s.win_rate[o]:.4f}", f"{s.win_std[o]:.4f}", f"{s.draw_rate:.4f}", s.matches, s.failures])


def sweep_table(rows: list[SweepRow], elastic_idx: int) -> str:
    o = 1 - elastic_idx
    body = []
    for r in rows:
        s = r.summary
        body.append([f"{100 * r.proportion:.0f}%",
                     f"{100 * s.win_rate[elastic_idx]:.1f}±{100 * s.win_std[elastic_idx]:.1f}%",
                     f"{100 * s.win_rate[o]:.1f}±{100 * s.win_std[o]:.1f}%"])
    names = rows[0].summary.agents if rows else ("elastic", "opponent")
    return format_table(["Proportion", names[elastic_idx].split("@")[0], names[o]], body)


@dataclass
class CompressionReport:
    curve: list[tuple[int, float, float, int]]  # iteration, mean, std, decisions
    decisions: int
    decision_ms: dict[str, float]
    per_decision: list[list[tuple[int, float]]]

    def rate_at(self, iteration: int) -> Optional[float]:
        for it, mean, _, _ in self.curve:
            if it == iteration:
                return mean
        return None


def compression_curve(per_decision: list[list[tuple[int, float]]]) -> list[tuple[int, float, float, int]]:
    by_iter: dict[int, list[float]] = {}
    for series in per_decision:
        for it, rate in series:
            by_iter.setdefault(it, []).append(rate)
    return [(it, statistics.fmean(v), _std(v), len(v)) for it, v in sorted(by_iter.items())]


def measure_compression(
    config: ExperimentConfig,
    progress: Optional[Callable[[int, int], None]] = None,
) -> CompressionReport:
    """Play the configured games and collect the elastic agent's per-batch compression rates."""
    idx = elastic_index(config)
    result = run_experiment(replace(config, output=None), progress)
    elastic_label = config.agents[idx].display
    per_decision = []
    times: dict[str, list[float]] = {}
    for rec in result.records:
        for d in rec.decisions:
            if d.fm_calls:
                times.setdefault(d.agent, []).append(d.wall_ms)
            if d.agent == elastic_label and d.compression:
                per_decision.append(d.compression)
    report = CompressionReport(
        compression_curve(per_decision),
        len(per_decision),
        {k: statistics.fmean(v) for k, v in times.items()},
        per_decision,
    )
    if config.output:
        write_compression_csv(report, config.output)
    return report


def write_compression_csv(report: CompressionReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "mean_compression", "std_compression", "decisions"])
        for it, mean, std, n in report.curve:
            w.writerow([it, f"{mean:.4f}", f"{std:.4f}", n])
    with path.with_name(path.stem + "_timing.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["agent", "mean_decision_ms"])
        for agent, ms in sorted(report.decision_ms.items()):
            w.writerow([agent, f"{ms:.3f}"])


def decision_states(config: ExperimentConfig, per_level: int, opponent: str = "random") -> list[GameState]:
    """Sample mid-game decision points by letting two cheap agents play each level."""
    states = []
    for level in config.levels:
        rng = random.Random(derive_seed(config.master_seed, level.level_id, "states"))
        bots = [make_agent(opponent), make_agent(opponent)]
        state = level.state
        fm = ForwardModel()
        taken = 0
        while taken < per_level and not outcome(state).is_terminal:
            if state.active_player == 0 and not state.acted and rng.random() < 0.5:
                states.append(state)
                taken += 1
            state = fm.apply(state, bots[state.active_player].act(state, rng))
    return states


def time_decisions(
    states: Sequence[GameState],
    agents: Sequence[AgentSpec],
    fm_budget: int,
    seed: int = 0,
) -> dict[str, float]:
    """Mean wall-clock milliseconds per decision of each agent on the same states."""
    out = {}
    for spec in agents:
        total = 0.0
        for i, state in enumerate(states):
            agent = spec.build(fm_budget)
            rng = random.Random(derive_seed(seed, i))
            t0 = time.perf_counter()
            agent.act(state, rng)
            total += time.perf_counter() - t0
        out[spec.display] = 1000.0 * total / len(states)
    return out
