"""Distributed-memory parallel Monte-Carlo tree search.

Work units follow the data: every tree node lives on the worker its hash
assigns, selection and backpropagation travel as messages, and virtual loss
keeps concurrent descents apart.  Three algorithm variants, a deterministic
simulated transport, a real socket transport, and pluggable search problems.
"""

from mpmcts.bandit import (
    ChildStat,
    Formula,
    ParentAggregate,
    VlFormula,
    select_best_child,
    ucb1,
    ucb_vl,
    ucb_vl_lcb,
    ucb_wu,
)
from mpmcts.config import Algorithm, ConfigError, RunConfig
from mpmcts.engine import run_distributed_sim, write_run_outputs
from mpmcts.sequential import run_sequential_uct

__all__ = [
    "Algorithm",
    "ChildStat",
    "ConfigError",
    "Formula",
    "ParentAggregate",
    "RunConfig",
    "VlFormula",
    "run_distributed_sim",
    "run_sequential_uct",
    "select_best_child",
    "ucb1",
    "ucb_vl",
    "ucb_vl_lcb",
    "ucb_wu",
    "write_run_outputs",
]
