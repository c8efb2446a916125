"""Independent reference models used by the test-suite.

Nothing here calls into the marking code of ``flexgc.heap_gc``; the
collectors below walk raw storage lists directly.
"""

from __future__ import annotations

import random
from collections import deque

from flexgc.flexarray import FastArray, IndexedArray, RingArray, ZeroedArray, _Storage
from flexgc.heap_gc import Heap, HeapObject

LAYOUTS = {"A": ["f", "g"], "B": ["f"], "C": []}


def _entities(values):
    return [v for v in values if isinstance(v, (HeapObject, _Storage))]


def full_scan_live(roots) -> set[int]:
    """Conservative collector: scans every storage cell, supply included."""
    seen: set[int] = set()
    stack = _entities(roots)
    while stack:
        e = stack.pop()
        if e.oid in seen:
            continue
        seen.add(e.oid)
        if isinstance(e, HeapObject):
            stack.extend(_entities(e.fields.values()))
        else:
            stack.extend(_entities(e.storage))
    return seen


def used_cells(a) -> list:
    """Used area by definition, recomputed from the raw fields."""
    if isinstance(a, RingArray):
        return [a.storage[(a.storage_lower + k) % a.capacity]
                for k in range(a.upper - a.lower + 1)]
    if isinstance(a, ZeroedArray):
        return a.storage[:a.gc_boundary + 1]
    return a.storage[:a.size]


def supply_of(a) -> int:
    if isinstance(a, RingArray):
        return a.capacity - (a.upper - a.lower + 1)
    if isinstance(a, ZeroedArray):
        return max(0, len(a.storage) - 1 - a.gc_boundary)
    return a.capacity - a.size


def used_area_reachable(roots) -> list:
    """Entities reachable through fields and used cells only."""
    seen: dict[int, object] = {}
    stack = _entities(roots)
    while stack:
        e = stack.pop()
        if e.oid in seen:
            continue
        seen[e.oid] = e
        if isinstance(e, HeapObject):
            stack.extend(_entities(e.fields.values()))
        else:
            stack.extend(_entities(used_cells(e)))
    return list(seen.values())


def random_workload(seed: int, scrub, steps: int = 120, budget: int = 10**9):
    """Random ADT workload on a fresh heap; returns ``(heap, roots)``.

    Two calls with the same seed and different ``scrub`` perform the same
    logical operations, so their live sets are comparable by oid.
    """
    rng = random.Random(seed)
    heap = Heap(LAYOUTS, budget=budget, scrub=scrub)
    objects: list[HeapObject] = []
    arrays: list[_Storage] = []

    def any_value():
        pool = objects + arrays
        if not pool or rng.random() < 0.15:
            return None
        return rng.choice(pool)

    for _ in range(steps):
        r = rng.random()
        if r < 0.2 or not objects:
            objects.append(heap.alloc_object(rng.choice(sorted(LAYOUTS))))
        elif r < 0.3:
            kind = rng.choice(["fast", "indexed", "ring", "zeroed", "calloc"])
            n = rng.randint(0, 4)
            if kind == "indexed" or kind == "ring":
                arrays.append(heap.new_array(kind, n, rng.randint(-3, 3), site=kind))
            elif kind == "zeroed":
                arrays.append(heap.new_array(kind, n + 1, site=kind))
            else:
                arrays.append(heap.new_array(kind, n, site=kind))
        elif r < 0.4:
            o = rng.choice(objects)
            if o.fields:
                o.fields[rng.choice(sorted(o.fields))] = any_value()
        elif arrays:
            a = rng.choice(arrays)
            op = rng.random()
            if isinstance(a, ZeroedArray):
                if a.length:
                    a.write(rng.randrange(a.length), any_value())
            elif isinstance(a, RingArray):
                if op < 0.35:
                    a.extend(any_value())
                elif op < 0.6:
                    a.prepend(any_value())
                elif op < 0.8 and a.count:
                    a.remove_last()
                elif a.count:
                    a.write(rng.randint(a.lower, a.upper), any_value())
            else:
                if op < 0.55:
                    a.extend(any_value())
                elif op < 0.8 and a.size:
                    a.remove_last()
                elif a.size:
                    lo = a.lower if isinstance(a, IndexedArray) else 0
                    a.write(lo + rng.randrange(a.size), any_value())
    pool = objects + arrays
    roots = rng.sample(pool, k=min(len(pool), rng.randint(0, 4)))
    return heap, roots


class DequeModel:
    """Reference double-ended sequence with logical indexes starting at ``lower``."""

    def __init__(self, lower: int = 0) -> None:
        self.items: deque = deque()
        self.lower = lower

    def extend(self, x) -> None:
        self.items.append(x)

    def prepend(self, x) -> None:
        self.items.appendleft(x)
        self.lower -= 1

    def remove_last(self) -> None:
        self.items.pop()

    def read(self, i):
        return self.items[i - self.lower]

    def write(self, i, x) -> None:
        self.items[i - self.lower] = x

    def __len__(self) -> int:
        return len(self.items)
