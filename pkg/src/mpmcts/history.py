"""Depth-indexed sibling-snapshot tables.

A history table accompanies a job as it walks the tree: row d is a snapshot
of ALL children of the on-path node at depth d, taken when the job's
selection passed through that node.  Each row also records which child the
path followed (action and key), so the table alone can answer "is the
current path still the best one?" without consulting any store.

Depth-first continuation rule: scanning rows from the deepest upward, the
current best is the on-path child of the deepest row where that child is
still the argmax of its row; if no row qualifies, it is the root.  Row
values are recomputed from the snapshot stats at evaluation time, with
V = 1 + sum(v) and T = sum(t) derived from the row (the same accounting the
live records maintain).

Tables are immutable; append/remove/merge return new tables that share row
objects structurally, so shipping them in messages needs no deep copies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from mpmcts import kernels
from mpmcts.bandit import VlFormula
from mpmcts.tree import NodeKey


class SiblingStat(NamedTuple):
    action: int
    w: float
    v: int
    t: int


@dataclass(frozen=True)
class HistoryRow:
    parent_key: NodeKey
    chosen_action: int
    chosen_key: NodeKey
    entries: tuple[SiblingStat, ...]


@dataclass(frozen=True)
class HistoryTable:
    rows: tuple[HistoryRow, ...] = ()

    def __len__(self) -> int:
        return len(self.rows)


EMPTY_HISTORY = HistoryTable()


def history_append(table: HistoryTable, row: HistoryRow) -> HistoryTable:
    return HistoryTable(table.rows + (row,))


def history_remove_bottom(table: HistoryTable) -> HistoryTable:
    if not table.rows:
        raise ValueError("remove_bottom on an empty history table")
    return HistoryTable(table.rows[:-1])


def history_truncate(table: HistoryTable, depth: int) -> HistoryTable:
    """Drop rows below the receiving node's own level (rows deeper than its
    path cannot describe its ancestors)."""
    if len(table.rows) <= depth:
        return table
    return HistoryTable(table.rows[:depth])


def _row_best_position(row: HistoryRow, formula: VlFormula) -> int:
    V = 1 + sum(e.v for e in row.entries)
    T = sum(e.t for e in row.entries)
    return kernels.best_index(
        formula.tag.value,
        formula.c,
        [e.w for e in row.entries],
        [e.v for e in row.entries],
        [e.t for e in row.entries],
        V,
        T,
    )


def _chosen_position(row: HistoryRow) -> int:
    for i, entry in enumerate(row.entries):
        if entry.action == row.chosen_action:
            return i
    raise ValueError(
        f"chosen action {row.chosen_action} missing from its snapshot row"
    )


def history_current_best(table: HistoryTable, formula: VlFormula) -> NodeKey:
    """Key of the node where a depth-first job should continue.

    Deepest row whose on-path child is still its argmax wins; ties break to
    the lowest row position, same as live selection.  If every row's on-path
    child has been overtaken by a sibling, the answer is the root (row 0's
    parent).
    """
    if not table.rows:
        raise ValueError("current_best on an empty history table")
    for row in reversed(table.rows):
        if _row_best_position(row, formula) == _chosen_position(row):
            return row.chosen_key
    return table.rows[0].parent_key


def history_refresh_bottom(table: HistoryTable, reward: float) -> HistoryTable:
    """Fold a just-finished simulation into the deepest row's on-path entry
    (w += reward, v += 1, t -= 1), mirroring the update the pending
    backpropagation will apply to the live record.  The same row can be
    refreshed again after a depth-first resume, so t floors at zero rather
    than double-counting the released loss."""
    if not table.rows:
        raise ValueError("refresh_bottom on an empty history table")
    row = table.rows[-1]
    pos = _chosen_position(row)
    old = row.entries[pos]
    updated = SiblingStat(old.action, old.w + reward, old.v + 1, max(old.t - 1, 0))
    entries = row.entries[:pos] + (updated,) + row.entries[pos + 1 :]
    new_row = HistoryRow(row.parent_key, row.chosen_action, row.chosen_key, entries)
    return HistoryTable(table.rows[:-1] + (new_row,))


def _merge_entries(
    resident: tuple[SiblingStat, ...], incoming: tuple[SiblingStat, ...]
) -> tuple[SiblingStat, ...]:
    incoming_by_action = {e.action: e for e in incoming}
    merged: list[SiblingStat] = []
    for entry in resident:
        other = incoming_by_action.pop(entry.action, None)
        merged.append(entry if other is None else _fresher(entry, other))
    # entries only the incoming row knows about, in its order
    for entry in incoming:
        if entry.action in incoming_by_action:
            merged.append(entry)
    return tuple(merged)


def _fresher(resident: SiblingStat, incoming: SiblingStat) -> SiblingStat:
    """Freshness rule: larger v wins; on equal v larger v+t wins; on a full
    tie the resident entry stays."""
    if incoming.v != resident.v:
        return incoming if incoming.v > resident.v else resident
    if incoming.v + incoming.t != resident.v + resident.t:
        return incoming if incoming.v + incoming.t > resident.v + resident.t else resident
    return resident


def history_merge(resident: HistoryTable, incoming: HistoryTable) -> HistoryTable:
    """Row-wise merge of two tables describing paths through the same root.

    Rows present in only one table are copied; shared rows merge entry by
    entry under the freshness rule.  Shared rows must snapshot the same
    parent -- anything else is a protocol bug.
    """
    rows: list[HistoryRow] = []
    for i in range(max(len(resident.rows), len(incoming.rows))):
        if i >= len(resident.rows):
            rows.append(incoming.rows[i])
            continue
        if i >= len(incoming.rows):
            rows.append(resident.rows[i])
            continue
        ours, theirs = resident.rows[i], incoming.rows[i]
        if ours.parent_key != theirs.parent_key:
            raise ValueError(
                f"history merge row {i}: parent keys differ "
                f"({ours.parent_key:#x} vs {theirs.parent_key:#x})"
            )
        rows.append(
            HistoryRow(
                ours.parent_key,
                ours.chosen_action,
                ours.chosen_key,
                _merge_entries(ours.entries, theirs.entries),
            )
        )
    return HistoryTable(tuple(rows))
