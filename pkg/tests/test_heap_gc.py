import io

import pytest

from flexgc.flexarray import NO_SCRUB, FastArray, RingArray
from flexgc.heap_gc import (
    GcStats,
    Heap,
    MarkPlan,
    PlanFault,
    UnknownType,
    array_type,
    derive_mark_plan,
    write_stats_csv,
)

from oracles import full_scan_live, random_workload, supply_of, used_area_reachable

LAYOUTS = {"TRUCK": ["load", "driver"], "CAR": ["driver"], "X": [], "Y": [], "PAIR": ["other"]}


@pytest.fixture
def heap():
    return Heap(LAYOUTS)


def test_alloc_object_fields_null(heap):
    t = heap.alloc_object("TRUCK")
    assert t.type_id == "TRUCK" and t.fields == {"load": None, "driver": None}
    assert heap.alloc_object("TRUCK") is not t


def test_alloc_unknown_type(heap):
    with pytest.raises(UnknownType):
        heap.alloc_object("BIKE")


class TestDeriveMarkPlan:
    def test_monomorphic(self):
        p = derive_mark_plan({"TRUCK"})
        assert p == MarkPlan(False, frozenset({"TRUCK"}))
        assert p.direct == "TRUCK"

    def test_polymorphic_with_null(self):
        p = derive_mark_plan({"NULL", "TRUCK", "CAR"})
        assert p.null_possible and p.target_types == {"TRUCK", "CAR"}
        assert p.direct is None

    def test_empty(self):
        p = derive_mark_plan(set())
        assert p.marks_nothing and p.direct is None


class TestMarkOneItem:
    def test_null_allowed(self, heap):
        heap.mark_one_item(None, derive_mark_plan({"NULL", "TRUCK"}))

    def test_direct(self, heap):
        t = heap.alloc_object("TRUCK")
        heap.mark_one_item(t, derive_mark_plan({"TRUCK"}))
        assert t.mark_bit

    def test_null_faults_when_not_predicted(self, heap):
        with pytest.raises(PlanFault):
            heap.mark_one_item(None, derive_mark_plan({"TRUCK"}))

    def test_wrong_type_faults(self, heap):
        with pytest.raises(PlanFault):
            heap.mark_one_item(heap.alloc_object("CAR"), derive_mark_plan({"TRUCK", "X"}))

    def test_transitive(self, heap):
        t = heap.alloc_object("TRUCK")
        c = heap.alloc_object("CAR")
        t.fields["driver"] = c
        heap.mark_one_item(t, None)
        assert c.mark_bit


class TestMarkArray:
    def test_fast_skips_supply(self, heap):
        a = heap.new_array("fast", 4, site="s")
        a.extend(heap.alloc_object("X"))
        stats = GcStats()
        heap.mark_array(a, None, stats)
        assert (stats.cells_scanned, stats.cells_skipped, stats.capacity_total) == (1, 3, 4)

    def test_empty_fast(self, heap):
        stats = GcStats()
        heap.mark_array(heap.new_array("fast", 8, site="s"), None, stats)
        assert (stats.cells_scanned, stats.cells_skipped) == (0, 8)

    def test_index_zero_visited(self, heap):
        # the literal `while (idx > 0)` loop would never visit index 0
        a = heap.new_array("fast", 2, site="s")
        x = heap.alloc_object("X")
        a.extend(x)
        heap.mark_array(a, None, GcStats())
        assert x.mark_bit

    def test_ring_wrapped_visits_count_cells(self, heap):
        r = heap.new_array("ring", 4, 0, site="r")
        sentinels = [heap.alloc_object("X") for _ in range(4)]
        r.storage[:] = sentinels  # plant distinct values in every slot
        r.storage_lower, r.lower, r.upper = 2, 0, 2  # physical 2, 3, 0
        visited = []
        heap._mark_item = lambda item, plan, where: visited.append(item)
        stats = GcStats()
        heap.mark_array(r, None, stats)
        assert visited == [sentinels[2], sentinels[3], sentinels[0]]
        assert len(set(map(id, visited))) == 3
        assert (stats.cells_scanned, stats.cells_skipped) == (3, 1)

    def test_zeroed_scans_to_watermark(self, heap):
        z = heap.new_array("zeroed", 8, site="z")
        z.write(3, heap.alloc_object("X"))
        stats = GcStats()
        heap.mark_array(z, None, stats)
        assert (stats.cells_scanned, stats.cells_skipped) == (4, 4)

    def test_plan_fault_names_site(self, heap):
        a = heap.new_array("fast", 2, site="trucks")
        a.extend(None)
        heap.array_plans["trucks"] = derive_mark_plan({"TRUCK"})
        with pytest.raises(PlanFault, match="trucks"):
            heap.collect([a])


def _literal_fast_loop(size):
    idx, seen = size - 1, []
    while idx > 0:
        seen.append(idx)
        idx -= 1
    return seen


def _literal_ring_loop(lower, upper, storage_lower, capacity):
    cnt, idx, seen = upper - lower + 1, storage_lower - 1, []
    while cnt >= 0:
        idx += 1
        if idx >= capacity:
            idx -= capacity
        seen.append(idx)
        cnt -= 1
    return seen


def test_literal_loop_bounds_documented():
    # the printed loops miss index 0 and visit one cell too many
    assert _literal_fast_loop(3) == [2, 1]
    assert _literal_ring_loop(0, 2, 2, 4) == [2, 3, 0, 1]
    # the collector's loops cover the used area exactly once
    r = RingArray(4, 0)
    r.storage_lower, r.upper = 2, 2
    assert r.used_indexes() == [2, 3, 0]


class TestCollect:
    def test_stale_supply_does_not_retain(self, heap):
        a = heap.new_array("fast", 4, site="s")
        x, y = heap.alloc_object("X"), heap.alloc_object("Y")
        a.extend(x)
        a.extend(y)
        a.remove_last()  # y now sits in the supply area
        stats = heap.collect([a])
        live = heap.live()
        assert x in live and y not in live
        assert stats.cells_skipped == 3 and stats.objects_swept == 1

    def test_no_roots(self, heap):
        for t in ("X", "Y", "TRUCK"):
            heap.alloc_object(t)
        heap.new_array("ring", 2, 0, site="r")
        stats = heap.collect([])
        assert stats.objects_swept == 4 and heap.live() == []

    def test_cycle(self, heap):
        a, b = heap.alloc_object("PAIR"), heap.alloc_object("PAIR")
        a.fields["other"], b.fields["other"] = b, a
        heap.alloc_object("X")
        heap.collect([a])
        assert set(heap.live()) == {a, b}

    def test_idempotent(self):
        heap, roots = random_workload(3, NO_SCRUB)
        heap.collect(roots)
        assert heap.collect(roots).objects_swept == 0

    def test_slots_reused(self, heap):
        heap.alloc_object("X")
        heap.collect([])
        y = heap.alloc_object("Y")
        assert y.slot == 0 and len(heap.slots) == 1

    def test_budget_trigger(self):
        h = Heap(LAYOUTS, budget=2)
        keep = h.alloc_object("X")
        h.alloc_object("X")
        assert not h.should_collect()
        h.alloc_object("X")
        assert h.should_collect()
        h.collect([keep])
        assert h.live_count() == 1 and not h.should_collect()

    def test_array_of_arrays_plan(self, heap):
        outer = heap.new_array("fast", 1, site="outer")
        inner = heap.new_array("fast", 1, site="inner")
        inner.extend(heap.alloc_object("X"))
        outer.extend(inner)
        heap.array_plans["outer"] = derive_mark_plan({array_type("inner")})
        heap.array_plans["inner"] = derive_mark_plan({"X"})
        stats = heap.collect([outer])
        assert stats.objects_swept == 0 and stats.arrays_marked == 2


@pytest.mark.parametrize("seed", range(40))
def test_matches_full_scan_oracle(seed):
    heap, roots = random_workload(seed, NO_SCRUB)
    oracle_heap, oracle_roots = random_workload(seed, None)
    expected = full_scan_live(oracle_roots)
    reachable = used_area_reachable(roots)
    stats = heap.collect(roots)
    assert {e.oid for e in heap.live()} == expected
    arrays = [e for e in reachable if not hasattr(e, "fields")]
    assert stats.arrays_marked == len(arrays)
    assert stats.cells_skipped == sum(supply_of(a) for a in arrays)
    assert stats.cells_scanned + stats.cells_skipped == stats.capacity_total


def test_stale_cells_matter_for_full_scan():
    # the oracle only agrees because its supply cells were scrubbed
    heap = Heap(LAYOUTS)
    a = heap.new_array("fast", 2, site="s")
    a.extend(heap.alloc_object("X"))
    a.remove_last()
    assert len(full_scan_live([a])) == 2
    assert len(used_area_reachable([a])) == 1


def test_stats_csv():
    buf = io.StringIO()
    write_stats_csv([GcStats(1, 2, 3, 4, 7, 5)], buf)
    assert buf.getvalue() == ("cycle,arrays_marked,cells_scanned,cells_skipped,"
                              "capacity_total,objects_swept\n1,2,3,4,7,5\n")
