from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpmcts.bandit import Formula, VlFormula
from mpmcts.history import (
    EMPTY_HISTORY,
    HistoryRow,
    HistoryTable,
    SiblingStat,
    history_append,
    history_current_best,
    history_merge,
    history_refresh_bottom,
    history_remove_bottom,
    history_truncate,
)

VL = VlFormula(Formula.VANILLA_VL, 1.0)


def row(parent_key, chosen_action, chosen_key, entries):
    return HistoryRow(
        parent_key, chosen_action, chosen_key, tuple(SiblingStat(*e) for e in entries)
    )


class TestStackDiscipline:
    def test_append_to_empty(self):
        table = history_append(EMPTY_HISTORY, row(1, 0, 2, [(0, 0.0, 0, 1)]))
        assert len(table) == 1

    def test_append_then_remove_is_identity(self):
        table = history_append(EMPTY_HISTORY, row(1, 0, 2, [(0, 0.0, 1, 0)]))
        grown = history_append(table, row(2, 1, 3, [(1, 0.5, 2, 0)]))
        assert history_remove_bottom(grown) == table

    def test_remove_on_empty_rejected(self):
        with pytest.raises(ValueError):
            history_remove_bottom(EMPTY_HISTORY)

    def test_two_level_rows_carry_parent_keys(self):
        # toy 2-level tree: root key 100, depth-1 node key 200
        root_row = row(100, 0, 200, [(0, 0.0, 1, 1), (1, 0.0, 1, 0)])
        deep_row = row(200, 1, 300, [(0, 0.2, 1, 0), (1, 0.8, 1, 1)])
        table = history_append(history_append(EMPTY_HISTORY, root_row), deep_row)
        assert table.rows[0].parent_key == 100
        assert table.rows[1].parent_key == 200

    @given(
        st.lists(
            st.tuples(st.integers(0, 7), st.floats(-3, 3), st.integers(0, 9)),
            min_size=0,
            max_size=20,
        )
    )
    def test_lifo_property(self, specs):
        table = EMPTY_HISTORY
        stack = []
        for i, (action, w, v) in enumerate(specs):
            new_row = row(i, action, i + 1000, [(action, w, v, 0)])
            table = history_append(table, new_row)
            stack.append(new_row)
        while stack:
            assert table.rows[-1] == stack.pop()
            table = history_remove_bottom(table)
        assert table == EMPTY_HISTORY


class TestCurrentBest:
    def test_on_path_child_still_best(self):
        # on-path child (action 1) has the unique max value
        table = history_append(
            EMPTY_HISTORY,
            row(100, 1, 200, [(0, -0.5, 5, 0), (1, 4.0, 5, 0), (2, -1.0, 5, 0)]),
        )
        assert history_current_best(table, VL) == 200

    def test_dominating_sibling_dethrones(self):
        # sibling w=5,v=5 dominates on-path w=0,v=5; search resumes at the
        # siblings' parent (the root here)
        table = history_append(
            EMPTY_HISTORY, row(100, 1, 200, [(0, 5.0, 5, 0), (1, 0.0, 5, 0)])
        )
        assert history_current_best(table, VL) == 100
        assert history_current_best(table, VL) != 200

    def test_deepest_dominated_upper_dominant(self):
        upper = row(100, 0, 200, [(0, 9.0, 10, 0), (1, 0.0, 10, 0)])
        deepest = row(200, 1, 300, [(0, 5.0, 5, 0), (1, 0.0, 5, 0)])
        table = history_append(history_append(EMPTY_HISTORY, upper), deepest)
        assert history_current_best(table, VL) == 200

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            history_current_best(EMPTY_HISTORY, VL)

    def test_tie_breaks_like_selection(self):
        # identical stats: position 0 wins the argmax, so an on-path child at
        # position 1 is not current-best
        table = history_append(
            EMPTY_HISTORY, row(100, 1, 200, [(0, 1.0, 2, 0), (1, 1.0, 2, 0)])
        )
        assert history_current_best(table, VL) == 100


class TestRefreshBottom:
    def test_folds_one_simulation(self):
        table = history_append(
            EMPTY_HISTORY, row(100, 1, 200, [(0, 0.0, 1, 0), (1, 0.5, 2, 3)])
        )
        refreshed = history_refresh_bottom(table, 0.25)
        entry = refreshed.rows[-1].entries[1]
        assert entry == SiblingStat(1, 0.75, 3, 2)
        # untouched sibling
        assert refreshed.rows[-1].entries[0] == SiblingStat(0, 0.0, 1, 0)

    def test_inflight_floors_at_zero(self):
        table = history_append(EMPTY_HISTORY, row(100, 0, 200, [(0, 0.0, 1, 0)]))
        refreshed = history_refresh_bottom(table, -1.0)
        assert refreshed.rows[-1].entries[0].t == 0


entries_strategy = st.lists(
    st.tuples(
        st.integers(0, 5),
        st.floats(-4, 4, allow_nan=False),
        st.integers(0, 9),
        st.integers(0, 4),
    ),
    min_size=1,
    max_size=6,
    unique_by=lambda e: e[0],
)


def tables(max_rows=4):
    def build(rows_entries):
        table = EMPTY_HISTORY
        for depth, entries in enumerate(rows_entries):
            chosen = entries[0][0]
            table = history_append(
                table, row(depth * 17, chosen, depth * 17 + 1, entries)
            )
        return table

    return st.lists(entries_strategy, min_size=0, max_size=max_rows).map(build)


class TestMerge:
    def test_merge_with_empty_is_identity(self):
        table = history_append(EMPTY_HISTORY, row(0, 0, 1, [(0, 1.0, 3, 0)]))
        assert history_merge(table, EMPTY_HISTORY) == table

    def test_larger_visits_survive(self):
        ours = history_append(EMPTY_HISTORY, row(0, 0, 1, [(0, 1.0, 3, 0)]))
        theirs = history_append(EMPTY_HISTORY, row(0, 0, 1, [(0, 2.0, 5, 0)]))
        merged = history_merge(ours, theirs)
        assert merged.rows[0].entries[0] == SiblingStat(0, 2.0, 5, 0)

    def test_equal_visits_larger_load_survives(self):
        ours = history_append(EMPTY_HISTORY, row(0, 0, 1, [(0, 1.0, 3, 0)]))
        theirs = history_append(EMPTY_HISTORY, row(0, 0, 1, [(0, 2.0, 3, 2)]))
        merged = history_merge(ours, theirs)
        assert merged.rows[0].entries[0] == SiblingStat(0, 2.0, 3, 2)

    def test_full_tie_keeps_resident(self):
        ours = history_append(EMPTY_HISTORY, row(0, 0, 1, [(0, 1.0, 3, 1)]))
        theirs = history_append(EMPTY_HISTORY, row(0, 0, 1, [(0, 9.0, 3, 1)]))
        merged = history_merge(ours, theirs)
        assert merged.rows[0].entries[0] == SiblingStat(0, 1.0, 3, 1)

    def test_disjoint_rows_copied(self):
        shared = row(0, 0, 1, [(0, 1.0, 3, 0)])
        deeper = row(17, 1, 18, [(1, -0.5, 2, 1)])
        ours = history_append(EMPTY_HISTORY, shared)
        theirs = history_append(history_append(EMPTY_HISTORY, shared), deeper)
        merged = history_merge(ours, theirs)
        assert len(merged) == 2
        assert merged.rows[1] == deeper

    def test_mismatched_parents_rejected(self):
        ours = history_append(EMPTY_HISTORY, row(0, 0, 1, [(0, 1.0, 3, 0)]))
        theirs = history_append(EMPTY_HISTORY, row(99, 0, 1, [(0, 1.0, 3, 0)]))
        with pytest.raises(ValueError):
            history_merge(ours, theirs)

    @given(tables())
    def test_idempotent(self, table):
        assert history_merge(table, table) == table

    @given(tables(), tables())
    def test_commutative_up_to_tie_break(self, a, b):
        try:
            ab = history_merge(a, b)
            ba = history_merge(b, a)
        except ValueError:
            return  # random tables with mismatched parents
        assert len(ab) == len(ba)
        for row_ab, row_ba in zip(ab.rows, ba.rows):
            by_action = {e.action: e for e in row_ba.entries}
            for entry in row_ab.entries:
                other = by_action[entry.action]
                # stats agree except where the documented resident-wins
                # tie-break applies
                if (entry.v, entry.v + entry.t) == (other.v, other.v + other.t):
                    continue
                assert entry == other


class TestTruncate:
    def test_truncates_deeper_rows(self):
        table = history_append(
            history_append(EMPTY_HISTORY, row(0, 0, 1, [(0, 0.0, 1, 0)])),
            row(17, 0, 18, [(0, 0.0, 1, 0)]),
        )
        assert len(history_truncate(table, 1)) == 1
        assert history_truncate(table, 5) == table
