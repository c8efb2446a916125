"""CSV tables: supply-ratio histograms and type-set size histograms."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional, TextIO

from .heap_gc import NULL_T, ArrayRecord, GcStats, is_array_type, site_of
from .typeflow import FlowResult

BUCKETS = ("full",) + tuple(f"{k * 10}-{(k + 1) * 10}" for k in range(10)) + ("empty",)
SUPPLY_COLUMNS = ("bucket", "count", "min_capacity", "max_capacity", "avg_capacity", "supply_cells")
TYPESET_COLUMNS = ("set_size", "array_locations", "null_free_ratio")


def bucket_of(size: int, capacity: int) -> str:
    """Supply ratio ``(capacity - size) / capacity`` in half-open deciles.

    Zero-capacity arrays count as full (they have no supply at all).
    """
    if capacity == 0 or size == capacity:
        return "full"
    if size == 0:
        return "empty"
    k = -(-10 * (capacity - size) // capacity) - 1
    return BUCKETS[1 + k]


@dataclass
class BucketRow:
    bucket: str
    count: int = 0
    min_capacity: Optional[int] = None
    max_capacity: Optional[int] = None
    capacity_sum: int = 0
    supply_cells: int = 0

    def add(self, rec: ArrayRecord) -> None:
        self.count += 1
        self.capacity_sum += rec.capacity
        self.supply_cells += rec.capacity - rec.size
        self.min_capacity = rec.capacity if self.min_capacity is None else min(self.min_capacity, rec.capacity)
        self.max_capacity = rec.capacity if self.max_capacity is None else max(self.max_capacity, rec.capacity)

    def cells(self) -> list[str]:
        if self.count == 0:
            return [self.bucket, "0", "", "", "", "0"]
        return [self.bucket, str(self.count), str(self.min_capacity), str(self.max_capacity),
                f"{self.capacity_sum / self.count:.6f}", str(self.supply_cells)]


def supply_histogram(records: Iterable[ArrayRecord]) -> list[BucketRow]:
    rows = {b: BucketRow(b) for b in BUCKETS}
    for rec in records:
        rows[bucket_of(rec.size, rec.capacity)].add(rec)
    return [rows[b] for b in BUCKETS]


def write_supply_csv(stats: list[GcStats], fp: TextIO, cycle: Optional[str] = None) -> None:
    """One histogram for the last cycle, a given cycle number, or ``"all"``."""
    if not stats:
        raise ValueError("no collection cycle was recorded")
    w = csv.writer(fp, lineterminator="\n")
    if cycle == "all":
        w.writerow(("cycle",) + SUPPLY_COLUMNS)
        for st in stats:
            for row in supply_histogram(st.records):
                w.writerow([st.cycle] + row.cells())
        return
    if cycle is None:
        chosen = stats[-1]
    else:
        matches = [st for st in stats if str(st.cycle) == str(cycle)]
        if not matches:
            raise ValueError(f"no cycle {cycle}; recorded cycles are 1..{len(stats)}")
        chosen = matches[0]
    w.writerow(SUPPLY_COLUMNS)
    for row in supply_histogram(chosen.records):
        w.writerow(row.cells())


def typeset_histogram(r: FlowResult) -> list[tuple[int, int, float]]:
    """``(k, locations, null-free ratio)`` over locations that may hold arrays.

    ``k`` is the size of the union of the content sets of the sites a
    location may hold, with NULL counted as a member.
    """
    buckets: dict[int, list[int]] = {}
    for loc, ts in r.sets.items():
        if loc.kind == "array":
            continue
        sites = [site_of(t) for t in ts if is_array_type(t)]
        if not sites:
            continue
        content: set[str] = set()
        for s in sites:
            content |= r.content(s)
        b = buckets.setdefault(len(content), [0, 0])
        b[0] += 1
        b[1] += NULL_T not in content
    return [(k, n, free / n) for k, (n, free) in sorted(buckets.items())]


def write_typeset_csv(r: FlowResult, fp: TextIO) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(TYPESET_COLUMNS)
    for k, n, ratio in typeset_histogram(r):
        w.writerow((k, n, f"{ratio:.6f}"))
