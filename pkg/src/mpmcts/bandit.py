"""Bandit statistics and the four child-selection formulas.

A child carries (w, v, t): cumulative reward, completed visits, and the
virtual-loss count of workers currently searching its subtree.  The parent
aggregate carries V (its own visit count) and T (the sum of children t).
Rewards are normalized to [-1, 1], so |w| <= v always.

The four formulas and their degenerate-case behavior are documented in
:mod:`mpmcts._pykernels`; this module is the typed front door, the kernels
do the arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from mpmcts import kernels


class Formula(Enum):
    UCB1 = kernels.UCB1
    VANILLA_VL = kernels.VANILLA_VL
    WU = kernels.WU
    LCB_VL = kernels.LCB_VL

    @classmethod
    def from_name(cls, name: str) -> "Formula":
        try:
            return _FORMULA_NAMES[name.lower()]
        except KeyError:
            raise ValueError(
                f"unknown formula {name!r}; expected one of {sorted(_FORMULA_NAMES)}"
            ) from None


_FORMULA_NAMES = {
    "ucb1": Formula.UCB1,
    "vl": Formula.VANILLA_VL,
    "wu": Formula.WU,
    "lcb": Formula.LCB_VL,
}

FORMULA_CLI_NAME = {v: k for k, v in _FORMULA_NAMES.items()}


@dataclass(frozen=True)
class VlFormula:
    """Formula choice plus exploration constant (C > 0)."""

    tag: Formula = Formula.VANILLA_VL
    c: float = 1.0

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError(f"exploration constant must be > 0, got {self.c}")


@dataclass(frozen=True)
class ChildStat:
    """Per-child bandit statistics.  ``prior`` is used only for expansion
    pruning, never inside the selection value."""

    w: float = 0.0
    v: int = 0
    t: int = 0
    prior: float = 1.0


@dataclass(frozen=True)
class ParentAggregate:
    V: int = 0
    T: int = 0


def ucb1(child: ChildStat, parent: ParentAggregate, c: float) -> float:
    return kernels.ucb1(child.w, child.v, parent.V, c)


def ucb_vl(child: ChildStat, parent: ParentAggregate, c: float) -> float:
    return kernels.ucb_vl(child.w, child.v, child.t, parent.V, parent.T, c)


def ucb_wu(child: ChildStat, parent: ParentAggregate, c: float) -> float:
    return kernels.ucb_wu(child.w, child.v, child.t, parent.V, parent.T, c)


def ucb_vl_lcb(child: ChildStat, parent: ParentAggregate, c: float) -> float:
    return kernels.ucb_vl_lcb(child.w, child.v, child.t, parent.V, parent.T, c)


def formula_value(
    formula: VlFormula, child: ChildStat, parent: ParentAggregate
) -> float:
    return kernels.value(
        formula.tag.value, child.w, child.v, child.t, parent.V, parent.T, formula.c
    )


def select_best_child(
    children: list[ChildStat], parent: ParentAggregate, formula: VlFormula
) -> int:
    """Index of the argmax child under the formula; ties break to the lowest
    index, which makes selection deterministic and replayable."""
    if not children:
        raise ValueError("select_best_child on empty children list")
    return kernels.best_index(
        formula.tag.value,
        formula.c,
        [ch.w for ch in children],
        [ch.v for ch in children],
        [ch.t for ch in children],
        parent.V,
        parent.T,
    )
