"""Precise stop-the-world mark-sweep over a modeled heap.

Array marking only walks used areas: ``[0, size)`` for fast/indexed arrays,
the ``count`` visible cells of a ring starting at ``storage_lower``, and
``[0, gc_boundary]`` for zeroed arrays.  Each marked cell goes through
:meth:`Heap.mark_one_item` under a :class:`MarkPlan` derived from the
content type set of the array's allocation site; a cell that contradicts its
plan is a :class:`PlanFault`, never silently tolerated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Mapping, Optional, Sequence

from .flexarray import (
    NO_SCRUB,
    FastArray,
    IndexedArray,
    RingArray,
    Tracer,
    ZeroedArray,
    _Storage,
)

#: Type-set member standing for the NULL reference.
NULL_T = "NULL"
ARRAY_PREFIX = "array@"


def array_type(site: Optional[str]) -> str:
    """Type-set member for arrays allocated at ``site``."""
    return ARRAY_PREFIX + (site if site is not None else "?")


def is_array_type(member: str) -> bool:
    return member.startswith(ARRAY_PREFIX)


def site_of(member: str) -> str:
    return member[len(ARRAY_PREFIX):]


@dataclass(eq=False)
class HeapObject:
    type_id: str
    fields: dict[str, Any]
    oid: int = -1
    mark_bit: bool = False
    slot: int = -1

    def __repr__(self) -> str:
        return f"<{self.type_id}#{self.oid}>"


def type_of(value: Any) -> Optional[str]:
    """Dynamic type of a cell value; ``None`` for scalars."""
    if value is None:
        return NULL_T
    if isinstance(value, HeapObject):
        return value.type_id
    if isinstance(value, _Storage):
        return array_type(value.content_site)
    return None


@dataclass(frozen=True)
class MarkPlan:
    null_possible: bool
    target_types: frozenset[str]

    @property
    def direct(self) -> Optional[str]:
        """The single routine to call without a type switch, if any."""
        if len(self.target_types) == 1:
            return next(iter(self.target_types))
        return None

    @property
    def marks_nothing(self) -> bool:
        return not self.target_types and not self.null_possible


def derive_mark_plan(ts: Iterable[str]) -> MarkPlan:
    ts = frozenset(ts)
    return MarkPlan(NULL_T in ts, ts - {NULL_T})


class PlanFault(Exception):
    def __init__(self, where: str, item_type: Optional[str], plan: MarkPlan) -> None:
        self.where = where
        self.item_type = item_type
        self.plan = plan
        allowed = sorted(plan.target_types) + ([NULL_T] if plan.null_possible else [])
        super().__init__(f"mark plan violated at {where}: found {item_type}, plan allows {allowed}")


class UnknownType(Exception):
    pass


@dataclass(frozen=True)
class ArrayRecord:
    kind: str
    site: Optional[str]
    size: int
    capacity: int


@dataclass
class GcStats:
    cycle: int = 0
    arrays_marked: int = 0
    cells_scanned: int = 0
    cells_skipped: int = 0
    capacity_total: int = 0
    objects_swept: int = 0
    records: list[ArrayRecord] = field(default_factory=list)

    def add_array(self, kind: str, site: Optional[str], used: int, capacity: int) -> None:
        self.arrays_marked += 1
        self.cells_scanned += used
        self.cells_skipped += capacity - used
        self.capacity_total += capacity
        self.records.append(ArrayRecord(kind, site, used, capacity))


STATS_COLUMNS = ("cycle", "arrays_marked", "cells_scanned", "cells_skipped",
                 "capacity_total", "objects_swept")


def write_stats_csv(stats: Sequence[GcStats], fp: IO[str]) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(STATS_COLUMNS)
    for s in stats:
        w.writerow([getattr(s, c) for c in STATS_COLUMNS])


_ARRAY_KINDS = {
    "fast": FastArray,
    "indexed": IndexedArray,
    "ring": RingArray,
    "zeroed": ZeroedArray,
}


class Heap:
    """Slab of object slots with a free list.

    ``layouts`` maps each class to its flattened field names.  ``field_plans``
    is keyed by ``(class, field)`` and ``array_plans`` by allocation site;
    anything missing is marked with the generic (null-checking, dispatching)
    routine.
    """

    def __init__(self, layouts: Mapping[str, Sequence[str]] = (), *,
                 budget: int = 4096, tracer: Optional[Tracer] = None,
                 scrub: Any = NO_SCRUB) -> None:
        self.layouts = {k: tuple(v) for k, v in dict(layouts).items()}
        self.budget = budget
        self.tracer = tracer
        self.scrub = scrub
        self.slots: list[Any] = []
        self.free: list[int] = []
        self.next_oid = 0
        self.cycles = 0
        self.field_plans: dict[tuple[str, str], MarkPlan] = {}
        self.array_plans: dict[str, MarkPlan] = {}
        self._gray: list[Any] = []

    # allocation -----------------------------------------------------------

    def _register(self, entity: Any) -> Any:
        entity.oid = self.next_oid
        self.next_oid += 1
        if self.free:
            entity.slot = self.free.pop()
            self.slots[entity.slot] = entity
        else:
            entity.slot = len(self.slots)
            self.slots.append(entity)
        return entity

    def declare(self, type_id: str, fields: Sequence[str]) -> None:
        self.layouts[type_id] = tuple(fields)

    def alloc_object(self, type_id: str) -> HeapObject:
        try:
            layout = self.layouts[type_id]
        except KeyError:
            raise UnknownType(type_id) from None
        return self._register(HeapObject(type_id, dict.fromkeys(layout)))

    def new_array(self, kind: str, *args: int, site: Optional[str] = None) -> _Storage:
        """Allocate ``fast``/``indexed``/``ring``/``zeroed``/``calloc`` storage."""
        opts = dict(tracer=self.tracer, scrub=self.scrub)
        if kind == "calloc":
            a = FastArray.calloc(*args, site=site, **opts)
        else:
            a = _ARRAY_KINDS[kind](*args, site=site, **opts)
        return self._register(a)

    def live(self) -> list[Any]:
        return [e for e in self.slots if e is not None]

    def live_count(self) -> int:
        return len(self.slots) - len(self.free)

    def should_collect(self) -> bool:
        return self.live_count() > self.budget

    # marking --------------------------------------------------------------

    def _plan_for_field(self, type_id: str, name: str) -> Optional[MarkPlan]:
        return self.field_plans.get((type_id, name))

    def _push(self, entity: Any) -> None:
        if not entity.mark_bit:
            entity.mark_bit = True
            self._gray.append(entity)

    def _mark_item(self, item: Any, plan: Optional[MarkPlan], where: str) -> None:
        if item is None:
            if plan is not None and not plan.null_possible:
                raise PlanFault(where, NULL_T, plan)
            return
        if plan is None:
            if isinstance(item, (HeapObject, _Storage)):
                self._push(item)
            return
        t = type_of(item)
        direct = plan.direct
        if direct is not None:
            if t != direct:
                raise PlanFault(where, t, plan)
        elif t not in plan.target_types:
            raise PlanFault(where, t, plan)
        self._push(item)

    def mark_one_item(self, item: Any, plan: Optional[MarkPlan], where: str = "?") -> None:
        """Mark ``item`` and everything reachable from it."""
        self._mark_item(item, plan, where)
        self._drain(None)

    def mark_array(self, a: _Storage, plan: Optional[MarkPlan], stats: GcStats) -> None:
        """Visit exactly the used cells of ``a`` (no recursion into them)."""
        where = f"array site {a.content_site}"
        storage = a.storage
        if isinstance(a, RingArray):
            cnt = a.count
            idx = a.storage_lower - 1
            while cnt > 0:
                idx += 1
                if idx >= a.capacity:
                    idx -= a.capacity
                self._mark_item(storage[idx], plan, where)
                cnt -= 1
            stats.add_array(a.kind, a.content_site, a.count, a.capacity)
        elif isinstance(a, ZeroedArray):
            n = a.scanned
            for idx in range(n):
                self._mark_item(storage[idx], plan, where)
            stats.add_array(a.kind, a.content_site, n, a.length)
        else:
            idx = a.size - 1
            while idx >= 0:
                self._mark_item(storage[idx], plan, where)
                idx -= 1
            stats.add_array(a.kind, a.content_site, a.size, a.capacity)

    def _drain(self, stats: Optional[GcStats]) -> None:
        if stats is None:
            stats = GcStats()
        gray = self._gray
        while gray:
            e = gray.pop()
            if isinstance(e, HeapObject):
                for name, value in e.fields.items():
                    self._mark_item(value, self._plan_for_field(e.type_id, name),
                                    f"field {e.type_id}.{name}")
            else:
                self.mark_array(e, self.array_plans.get(e.content_site), stats)

    # collection -----------------------------------------------------------

    def collect(self, roots: Iterable[Any]) -> GcStats:
        """Mark from ``roots`` then sweep; a PlanFault aborts the cycle."""
        self.cycles += 1
        stats = GcStats(cycle=self.cycles)
        self._gray = []
        try:
            for r in roots:
                self._mark_item(r, None, "root")
            self._drain(stats)
        except PlanFault:
            for e in self.slots:
                if e is not None:
                    e.mark_bit = False
            self._gray = []
            raise
        for i, e in enumerate(self.slots):
            if e is None:
                continue
            if e.mark_bit:
                e.mark_bit = False
            else:
                if isinstance(e, _Storage):
                    e.release()
                self.slots[i] = None
                self.free.append(i)
                stats.objects_swept += 1
        return stats
