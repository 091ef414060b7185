"""Named parameter sets found by NTBEA tuning at 30,000 forward-model calls."""

from __future__ import annotations

from .search import SearchParams

DEFAULT_FM_BUDGET = 30_000
ETA_R = 0.1
ETA_T = 0.3

PRESETS: dict[str, SearchParams] = {
    "mcts": SearchParams(C=0.1, rollout_length=20, fm_budget=DEFAULT_FM_BUDGET, unit_ordering=False),
    "mcts_u": SearchParams(C=10.0, rollout_length=100, fm_budget=DEFAULT_FM_BUDGET),
    "elastic_mcts_u": SearchParams(
        C=0.1,
        rollout_length=40,
        fm_budget=DEFAULT_FM_BUDGET,
        batch_size=20,
        alpha_abs=12 * 20,
        eta_r=ETA_R,
        eta_t=ETA_T,
        abstraction=True,
    ),
}
