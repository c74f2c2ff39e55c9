"""Run configuration: parsing, validation, canonical serialization.

Configs written to disk use the same canonical text encoding as the wire
format; parse -> serialize -> parse is the identity.  Unknown keys are
rejected with the list of valid keys so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from mpmcts.bandit import FORMULA_CLI_NAME, Formula, VlFormula
from mpmcts.wire import canonical_dumps


class ConfigError(ValueError):
    pass


class Algorithm(Enum):
    TDS_UCT = "tds-uct"
    TDS_DF_UCT = "tds-df-uct"
    MP_MCTS = "mp-mcts"
    SEQUENTIAL = "sequential"

    @classmethod
    def from_name(cls, name: str) -> "Algorithm":
        normalized = name.strip().lower().replace("_", "-")
        for member in cls:
            if member.value == normalized:
                return member
        raise ConfigError(
            f"unknown algorithm {name!r}; expected one of "
            f"{[m.value for m in cls]}"
        )


VALID_KEYS = {
    "algorithm",
    "formula",
    "exploration_c",
    "workers",
    "overload",
    "budget_sims",
    "budget_ticks",
    "budget_secs",
    "seed",
    "expansion_threshold",
    "prune_cumulative",
    "max_depth",
    "max_branching",
    "problem",
    "transport",
    "latency",
    "jitter",
    "manifest",
    "dump_tree",
}

_PROBLEM_KEYS = {
    "synthetic": {"kind", "depth", "branching", "reward_seed"},
    "grammar": {"kind", "fixture"},
    "external": {"kind", "oracle_cmd", "max_len", "timeout"},
}


@dataclass
class RunConfig:
    algorithm: Algorithm = Algorithm.TDS_UCT
    formula: Formula = Formula.VANILLA_VL
    exploration_c: float = 1.0
    workers: int = 1
    overload: int = 3
    budget_sims: int | None = None
    budget_ticks: int | None = None
    budget_secs: float | None = None
    seed: int = 0
    expansion_threshold: int = 2
    prune_cumulative: float = 0.95
    max_depth: int = 0  # 0 = derive from the problem
    max_branching: int = 0
    problem: dict = field(default_factory=lambda: {"kind": "synthetic", "depth": 4, "branching": 3})
    transport: str = "sim"
    latency: int = 1
    jitter: int = 0
    manifest: str | None = None
    dump_tree: bool = False

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.overload < 1:
            raise ConfigError(f"overload must be >= 1, got {self.overload}")
        if not self.exploration_c > 0:
            raise ConfigError(f"exploration_c must be > 0, got {self.exploration_c}")
        if self.expansion_threshold < 2:
            raise ConfigError("expansion_threshold must be >= 2")
        if not 0.0 < self.prune_cumulative <= 1.0:
            raise ConfigError("prune_cumulative must be in (0, 1]")
        budgets = {
            "budget_sims": self.budget_sims,
            "budget_ticks": self.budget_ticks,
            "budget_secs": self.budget_secs,
        }
        set_budgets = [k for k, v in budgets.items() if v is not None]
        if len(set_budgets) != 1:
            raise ConfigError(
                f"exactly one budget must be set, got {set_budgets or 'none'}"
            )
        if self.transport not in ("sim", "net"):
            raise ConfigError(f"transport must be sim or net, got {self.transport!r}")
        if self.transport == "sim" and self.budget_secs is not None:
            raise ConfigError(
                "wall-second budgets need the net transport; "
                "use budget_sims or budget_ticks under sim"
            )
        if self.transport == "net" and self.budget_secs is None:
            raise ConfigError("the net transport is budgeted by budget_secs")
        if self.transport == "net" and not self.manifest:
            raise ConfigError("the net transport requires a manifest file")
        if self.latency < 1:
            raise ConfigError("latency must be >= 1 tick")
        kind = self.problem.get("kind")
        if kind not in _PROBLEM_KEYS:
            raise ConfigError(
                f"unknown problem kind {kind!r}; expected one of "
                f"{sorted(_PROBLEM_KEYS)}"
            )
        unknown = set(self.problem) - _PROBLEM_KEYS[kind]
        if unknown:
            raise ConfigError(
                f"unknown problem keys {sorted(unknown)}; valid for {kind}: "
                f"{sorted(_PROBLEM_KEYS[kind])}"
            )

    @property
    def vl_formula(self) -> VlFormula:
        return VlFormula(self.formula, self.exploration_c)

    def derived_dimensions(self) -> tuple[int, int]:
        """(max_depth, max_branching) for the Zobrist table, derived from the
        problem when not given explicitly."""
        depth, branching = self.max_depth, self.max_branching
        kind = self.problem.get("kind")
        if kind == "synthetic":
            depth = depth or self.problem["depth"]
            branching = branching or self.problem["branching"]
        elif kind == "grammar":
            from mpmcts.problems import GrammarSpec, load_default_grammar
            import json

            if self.problem.get("fixture"):
                with open(self.problem["fixture"]) as fh:
                    spec = GrammarSpec(json.load(fh))
            else:
                spec = load_default_grammar()
            depth = depth or spec.max_len + 1
            branching = branching or spec.branching
        elif kind == "external":
            depth = depth or self.problem.get("max_len", 40) + 1
            branching = branching or 128
        if depth < 1 or branching < 1:
            raise ConfigError("max_depth and max_branching must resolve to >= 1")
        return depth, branching

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm.value,
            "formula": FORMULA_CLI_NAME[self.formula],
            "exploration_c": self.exploration_c,
            "workers": self.workers,
            "overload": self.overload,
            "budget_sims": self.budget_sims,
            "budget_ticks": self.budget_ticks,
            "budget_secs": self.budget_secs,
            "seed": self.seed,
            "expansion_threshold": self.expansion_threshold,
            "prune_cumulative": self.prune_cumulative,
            "max_depth": self.max_depth,
            "max_branching": self.max_branching,
            "problem": dict(self.problem),
            "transport": self.transport,
            "latency": self.latency,
            "jitter": self.jitter,
            "manifest": self.manifest,
            "dump_tree": self.dump_tree,
        }

    def canonical(self) -> str:
        return canonical_dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        unknown = set(data) - VALID_KEYS
        if unknown:
            raise ConfigError(
                f"unknown config keys {sorted(unknown)}; "
                f"valid keys: {sorted(VALID_KEYS)}"
            )
        kwargs: dict[str, Any] = dict(data)
        if "algorithm" in kwargs:
            kwargs["algorithm"] = Algorithm.from_name(kwargs["algorithm"])
        if "formula" in kwargs:
            kwargs["formula"] = Formula.from_name(kwargs["formula"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
