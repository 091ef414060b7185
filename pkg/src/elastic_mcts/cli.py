"""Command-line entry point: ``elastic-mcts <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import random
import sys
from pathlib import Path
from typing import Optional, Sequence

import yaml

from . import __version__
from .agents import AGENT_NAMES
from .engine import generate_levels, read_level
from .harness import (
    AgentSpec,
    ConfigError,
    decision_states,
    elastic_index,
    format_table,
    load_config,
    resolve_path,
    measure_compression,
    run_experiment,
    run_match,
    sweep_table,
    sweep_threshold,
    time_decisions,
    write_matches_csv,
)
from .tuner import SPACES, fitness_vs_combat, ntbea_run

log = logging.getLogger("elastic_mcts")


def _progress(enabled: bool):
    if not enabled:
        return None

    def report(done: int, total: int) -> None:
        print(f"\r{done}/{total} matches", end="\n" if done == total else "", file=sys.stderr, flush=True)

    return report


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "fm_budget": args.fm_budget,
        "master_seed": args.seed,
        "output": str(args.out) if args.out else None,
        "jobs": args.jobs,
    }


def _json_params(text: Optional[str]) -> dict:
    if not text:
        return {}
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SystemExit(f"--params must be a JSON object: {exc}") from None
    if not isinstance(value, dict):
        raise SystemExit("--params must be a JSON object")
    return value


def cmd_play(args: argparse.Namespace) -> int:
    state = read_level(args.level)
    agents = (AgentSpec(args.agent1, _json_params(args.params1)), AgentSpec(args.agent2, _json_params(args.params2)))
    record = run_match(state, agents, args.seed, args.fm_budget, Path(args.level).stem)
    if args.out:
        write_matches_csv([record], args.out)
    rows = [[record.level, record.players[0], record.players[1], record.outcome, record.turns, len(record.decisions)]]
    print(format_table(["level", "player0", "player1", "outcome", "turns", "decisions"], rows))
    if record.error:
        print(f"match failed: {record.error}", file=sys.stderr)
        return 1
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    config = load_config(args.config, _overrides(args))
    result = run_experiment(config, _progress(not args.quiet))
    s = result.summary
    print(format_table(["Agent 1", "Agent 2", "Agent 1 win", "Agent 2 win"], [s.row()]))
    print(f"draws {100 * s.draw_rate:.1f}%  matches {s.matches}  failures {s.failures}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(args.config, _overrides(args))
    props = [p / 100.0 for p in args.proportions] if args.proportions else None
    rows = sweep_threshold(config, props, _progress(not args.quiet))
    print(sweep_table(rows, elastic_index(config)))
    return 0


def cmd_compress(args: argparse.Namespace) -> int:
    config = load_config(args.config, _overrides(args))
    report = measure_compression(config, _progress(not args.quiet))
    body = [[it, f"{mean:.2f}", f"{std:.2f}", n] for it, mean, std, n in report.curve]
    print(format_table(["iteration", "compression", "std", "decisions"], body))
    timing = config.raw.get("timing")
    if timing:
        states = decision_states(config, int(timing.get("states_per_level", 2)))
        agents = [AgentSpec(a["name"], dict(a.get("params") or {}), a.get("label")) for a in timing["agents"]]
        ms = time_decisions(states, agents, config.fm_budget, config.master_seed)
        print(format_table(["agent", "mean decision ms"], [[k, f"{v:.1f}"] for k, v in ms.items()]))
    else:
        print(format_table(["agent", "mean decision ms"], [[k, f"{v:.1f}"] for k, v in report.decision_ms.items()]))
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    config = load_config(args.config, _overrides(args)) if args.config else None
    if config is None:
        raise SystemExit("tune needs --config naming the levels to play on")
    space = SPACES[args.agent]
    rng = random.Random(config.master_seed)
    out_csv = Path(args.out) if args.out else None
    writer = None
    fh = None
    if out_csv:
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        fh = out_csv.open("w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "candidate", "fitness", "modeled_mean"])

    def fitness(params: dict) -> float:
        return fitness_vs_combat(args.agent, params, config.levels, args.games, rng, config.fm_budget)

    def on_iteration(entry) -> None:
        if writer:
            writer.writerow([entry.iteration, json.dumps(entry.params, sort_keys=True), f"{entry.fitness:.4f}",
                             f"{entry.modeled_mean:.4f}"])
            fh.flush()
        if not args.quiet:
            print(f"iter {entry.iteration:3d} fitness {entry.fitness:.3f} {entry.params}", file=sys.stderr)

    try:
        result = ntbea_run(space, fitness, rng, iterations=args.iterations, neighbors=args.neighbors, k=args.k,
                           on_iteration=on_iteration)
    finally:
        if fh:
            fh.close()
    preset = {"name": args.agent, "params": result.params}
    text = yaml.safe_dump(preset, sort_keys=True)
    if out_csv:
        out_csv.with_suffix(".preset.yaml").write_text(text)
    print(format_table(["parameter", "value"], sorted(result.params.items())))
    print(f"modeled mean {result.modeled_mean:.3f}")
    return 0


def cmd_gen_levels(args: argparse.Namespace) -> int:
    map_path = resolve_path(Path.cwd(), args.map)
    paths = generate_levels(map_path, args.composition, args.count, args.seed, args.out, args.prefix)
    print(f"wrote {len(paths)} level files to {args.out}")
    return 0


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", type=Path, required=config_required, help="experiment YAML file")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    p.add_argument("--fm-budget", type=int, default=None, help="forward-model calls per decision")
    p.add_argument("--out", type=Path, default=None, help="CSV output path")
    p.add_argument("--jobs", type=int, default=None, help="matches run in parallel")
    p.add_argument("-q", "--quiet", action="store_true", help="no progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elastic-mcts", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("play", help="play one match and print its outcome")
    p.add_argument("level", type=Path)
    p.add_argument("agent1", choices=AGENT_NAMES)
    p.add_argument("agent2", choices=AGENT_NAMES)
    p.add_argument("--params1", help="JSON parameter overrides for agent1")
    p.add_argument("--params2", help="JSON parameter overrides for agent2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fm-budget", type=int, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("experiment", help="levels x seeds x sides tournament")
    _common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("sweep", help="win rate against the abstraction-abandon proportion")
    _common(p)
    p.add_argument("--proportions", type=float, nargs="+", help="percentages, default 0 25 50 75 100")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compress", help="compression rate per batch and decision times")
    _common(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("tune", help="NTBEA parameter tuning against the combat agent")
    _common(p)
    p.add_argument("--agent", choices=sorted(SPACES), required=True)
    p.add_argument("--games", type=int, default=4, help="fitness games per evaluation")
    p.add_argument("--iterations", type=int, default=50)
    p.add_argument("--neighbors", type=int, default=50)
    p.add_argument("--k", type=float, default=2.0)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("gen-levels", help="write seeded random level files")
    p.add_argument("--map", type=Path, required=True)
    p.add_argument("--composition", default="K1W1A1H")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--prefix", default=None)
    p.set_defaults(func=cmd_gen_levels)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
