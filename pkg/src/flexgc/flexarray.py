"""Flexible array abstract data types with an explicit used/supply split.

Every array here keeps the cells it has handed out to the program (the
*used area*) separate from the cells reserved for future growth (the
*supply area*).  Supply cells are never initialized and never read, which is
what lets the collector in :mod:`flexgc.heap_gc` skip them entirely.

NULL is represented by ``None``.  Fresh supply cells hold the :data:`STALE`
sentinel unless the array was built with an explicit ``scrub`` value, in
which case that value is written into every supply cell at creation, on
growth and on ``remove_last`` (used for poisoning tests and for the
zero-initializing reference collector).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional, Protocol


class _Sentinel:
    __slots__ = ("name",)

    def __init__(self, name: str) -> None:
        self.name = name

    def __repr__(self) -> str:
        return f"<{self.name}>"


#: Value held by supply cells nobody ever wrote.
STALE = _Sentinel("STALE")
#: Marker meaning "leave vacated cells alone" (the normal mode).
NO_SCRUB = _Sentinel("NO_SCRUB")


class ContractViolation(Exception):
    """An ADT precondition did not hold."""


class BoundsError(ContractViolation, IndexError):
    """Index outside a fixed-length array."""


class Tracer(Protocol):
    """Receives storage-level events; see :class:`flexgc.traceminer.TraceWriter`."""

    def alloc(self, nslots: int, zeroed: bool) -> int: ...
    def realloc(self, block: int, nslots: int) -> None: ...
    def write(self, block: int, slot: int, value: Any) -> None: ...
    def read(self, block: int, slot: int) -> None: ...
    def free(self, block: int) -> None: ...


class _Storage:
    """Shared bookkeeping for anything backed by one slot buffer."""

    kind = "?"

    def __init__(self, site: Optional[str], tracer: Optional[Tracer], scrub: Any) -> None:
        self.content_site = site
        self.tracer = tracer
        self.scrub = scrub
        self.block: Optional[int] = None
        # set by the heap
        self.mark_bit = False
        self.oid = -1
        self.slot = -1
        # growth accounting, used by the amortization tests
        self.reallocations = 0
        self.copied_cells = 0

    @property
    def _fill(self) -> Any:
        return STALE if self.scrub is NO_SCRUB else self.scrub

    def _open_block(self, nslots: int, zeroed: bool) -> None:
        if self.tracer is not None:
            self.block = self.tracer.alloc(nslots, zeroed)

    def _store(self, idx: int, value: Any) -> None:
        self.storage[idx] = value
        if self.tracer is not None:
            self.tracer.write(self.block, idx, value)

    def _load(self, idx: int) -> Any:
        if self.tracer is not None:
            self.tracer.read(self.block, idx)
        return self.storage[idx]

    def release(self) -> None:
        """Storage is being reclaimed (called by the collector on sweep)."""
        if self.tracer is not None and self.block is not None:
            self.tracer.free(self.block)
            self.block = None


class FastArray(_Storage):
    """Zero-indexed flexible array filled left to right."""

    kind = "fast"

    def __init__(self, cap: int = 0, site: Optional[str] = None, *,
                 tracer: Optional[Tracer] = None, scrub: Any = NO_SCRUB) -> None:
        if cap < 0:
            raise ContractViolation(f"create: negative capacity {cap}")
        super().__init__(site, tracer, scrub)
        self.capacity = cap
        self.size = 0
        self.storage: list[Any] = [self._fill] * cap
        self._open_block(cap, zeroed=False)

    @classmethod
    def calloc(cls, siz: int, site: Optional[str] = None, *,
               tracer: Optional[Tracer] = None, scrub: Any = NO_SCRUB) -> "FastArray":
        """Array of ``siz`` NULL cells, size == capacity (no supply area)."""
        if siz < 0:
            raise ContractViolation(f"calloc: negative size {siz}")
        a = cls.__new__(cls)
        _Storage.__init__(a, site, tracer, scrub)
        a.capacity = siz
        a.size = siz
        a.storage = [None] * siz
        a._open_block(siz, zeroed=True)
        return a

    def __len__(self) -> int:
        return self.size

    def _check(self, ind: int, op: str) -> None:
        if not 0 <= ind < self.size:
            raise ContractViolation(f"{op}: index {ind} outside [0, {self.size})")

    def _grow(self) -> None:
        new_cap = max(1, 2 * self.capacity)
        self.storage.extend([self._fill] * (new_cap - self.capacity))
        self.reallocations += 1
        self.copied_cells += self.size
        self.capacity = new_cap
        if self.tracer is not None:
            self.tracer.realloc(self.block, new_cap)

    def extend(self, obj: Any) -> None:
        if self.size >= self.capacity:
            self._grow()
        self._store(self.size, obj)
        self.size += 1

    def read(self, ind: int) -> Any:
        self._check(ind, "read")
        return self._load(ind)

    def write(self, ind: int, obj: Any) -> None:
        self._check(ind, "write")
        self._store(ind, obj)

    def remove_last(self) -> None:
        if self.size <= 0:
            raise ContractViolation("remove_last on empty array")
        self.size -= 1
        if self.scrub is not NO_SCRUB:
            self.storage[self.size] = self.scrub

    def used(self) -> list[Any]:
        return self.storage[:self.size]

    def __repr__(self) -> str:
        return f"FastArray(size={self.size}, capacity={self.capacity}, site={self.content_site!r})"


class IndexedArray(FastArray):
    """Flexible array whose left-most index is ``lower`` (any sign)."""

    kind = "indexed"

    def __init__(self, cap: int = 0, lower: int = 0, site: Optional[str] = None, *,
                 tracer: Optional[Tracer] = None, scrub: Any = NO_SCRUB) -> None:
        super().__init__(cap, site, tracer=tracer, scrub=scrub)
        self.lower = lower

    @property
    def upper(self) -> int:
        return self.lower + self.size - 1

    def read(self, ind: int) -> Any:
        if not self.lower <= ind <= self.upper:
            raise ContractViolation(f"read: index {ind} outside [{self.lower}, {self.upper}]")
        return super().read(ind - self.lower)

    def write(self, ind: int, obj: Any) -> None:
        if not self.lower <= ind <= self.upper:
            raise ContractViolation(f"write: index {ind} outside [{self.lower}, {self.upper}]")
        super().write(ind - self.lower, obj)


class RingArray(_Storage):
    """Circular array with visible logical range ``[lower, upper]``.

    Logical index ``i`` lives at physical ``(i - lower + storage_lower) mod
    capacity``.  Growth doubles the buffer and re-linearizes the content so
    ``storage_lower`` restarts at 0.
    """

    kind = "ring"

    def __init__(self, cap: int = 0, low: int = 0, site: Optional[str] = None, *,
                 tracer: Optional[Tracer] = None, scrub: Any = NO_SCRUB) -> None:
        if cap < 0:
            raise ContractViolation(f"ring create: negative capacity {cap}")
        super().__init__(site, tracer, scrub)
        self.capacity = cap
        self.lower = low
        self.upper = low - 1
        self.storage_lower = 0
        self.storage: list[Any] = [self._fill] * cap
        self._open_block(cap, zeroed=False)

    @property
    def count(self) -> int:
        return self.upper - self.lower + 1

    def __len__(self) -> int:
        return self.count

    def _phys(self, ind: int) -> int:
        sidx = ind - self.lower + self.storage_lower
        if sidx >= self.capacity:
            sidx -= self.capacity
        return sidx

    def _check(self, ind: int, op: str) -> None:
        if not self.lower <= ind <= self.upper:
            raise ContractViolation(f"{op}: index {ind} outside [{self.lower}, {self.upper}]")

    def _grow(self) -> None:
        n = self.count
        new_cap = max(1, 2 * self.capacity)
        content = [self.storage[(self.storage_lower + k) % self.capacity] for k in range(n)]
        self.storage = content + [self._fill] * (new_cap - n)
        self.capacity = new_cap
        self.storage_lower = 0
        self.reallocations += 1
        self.copied_cells += n
        if self.tracer is not None:
            old = self.block
            self.block = self.tracer.alloc(new_cap, False)
            for k, v in enumerate(content):
                self.tracer.write(self.block, k, v)
            self.tracer.free(old)

    def extend(self, obj: Any) -> None:
        if self.count >= self.capacity:
            self._grow()
        sidx = self.upper + 1 - self.lower + self.storage_lower
        if sidx >= self.capacity:
            sidx -= self.capacity
        self._store(sidx, obj)
        self.upper += 1

    def prepend(self, obj: Any) -> None:
        if self.count >= self.capacity:
            self._grow()
        self.storage_lower -= 1
        if self.storage_lower < 0:
            self.storage_lower += self.capacity
        self._store(self.storage_lower, obj)
        self.lower -= 1

    def read(self, ind: int) -> Any:
        self._check(ind, "ring read")
        return self._load(self._phys(ind))

    def write(self, ind: int, obj: Any) -> None:
        self._check(ind, "ring write")
        self._store(self._phys(ind), obj)

    def remove_last(self) -> None:
        if self.count <= 0:
            raise ContractViolation("remove_last on empty ring")
        if self.scrub is not NO_SCRUB:
            self.storage[self._phys(self.upper)] = self.scrub
        self.upper -= 1

    def used_indexes(self) -> list[int]:
        """Physical indexes of the visible cells, in logical order."""
        return [(self.storage_lower + k) % self.capacity for k in range(self.count)]

    def used(self) -> list[Any]:
        return [self.storage[i] for i in self.used_indexes()]

    def __repr__(self) -> str:
        return (f"RingArray(lower={self.lower}, upper={self.upper}, "
                f"storage_lower={self.storage_lower}, capacity={self.capacity})")


class ZeroedArray(_Storage):
    """Fixed-length, NULL-initialized array with a write watermark.

    ``gc_boundary`` is the highest index ever written; every slot beyond it
    is still NULL, so the collector only scans ``[0, gc_boundary]``.
    """

    kind = "zeroed"

    def __init__(self, length: int, site: Optional[str] = None, *,
                 tracer: Optional[Tracer] = None, scrub: Any = NO_SCRUB) -> None:
        if length < 0:
            raise ContractViolation(f"zeroed create: negative length {length}")
        super().__init__(site, tracer, scrub)
        self.storage: list[Any] = [None] * length
        self.gc_boundary = 0
        self._open_block(length, zeroed=True)

    @property
    def length(self) -> int:
        return len(self.storage)

    # uniform names for the collector and reports
    capacity = length

    def __len__(self) -> int:
        return len(self.storage)

    def _check(self, index: int) -> None:
        if not 0 <= index < len(self.storage):
            raise BoundsError(f"index {index} outside [0, {len(self.storage)})")

    def write(self, index: int, obj: Any) -> None:
        self._check(index)
        self._store(index, obj)
        if index > self.gc_boundary:
            self.gc_boundary = index

    def read(self, index: int) -> Any:
        self._check(index)
        return self._load(index)

    @property
    def scanned(self) -> int:
        """Cells the collector visits: ``[0, gc_boundary]`` clipped to the length."""
        return min(self.gc_boundary + 1, len(self.storage))

    def __repr__(self) -> str:
        return f"ZeroedArray(length={self.length}, gc_boundary={self.gc_boundary})"


@dataclass(eq=False)
class Cell:
    """Collision-chain cell of a :class:`HashedSet`."""

    item: Any
    next: Optional["Cell"] = None


class HashedSet:
    """Set over a calloc'ed bucket array with separate chaining.

    The bucket array has no supply area (size == capacity); NULL buckets are
    meaningful.  Capacity is fixed at creation.
    """

    def __init__(self, capacity: int, hash_fn: Callable[[Any], int] = hash, *,
                 tracer: Optional[Tracer] = None,
                 new_cell: Callable[[Any, Any], Any] = Cell) -> None:
        if capacity <= 0:
            raise ContractViolation(f"hashed set needs a positive capacity, got {capacity}")
        self.buckets = FastArray.calloc(capacity, tracer=tracer)
        self.hash_fn = hash_fn
        self.new_cell = new_cell
        self.count = 0

    def _bucket(self, item: Any) -> int:
        # Python's % is already non-negative for a positive modulus
        return self.hash_fn(item) % self.buckets.capacity

    def insert(self, item: Any) -> bool:
        if item is None:
            raise ContractViolation("hashed set cannot hold NULL")
        idx = self._bucket(item)
        head = self.buckets.read(idx)
        cell = head
        while cell is not None:
            if cell.item == item:
                return False
            cell = cell.next
        self.buckets.write(idx, self.new_cell(item, head))
        self.count += 1
        return True

    def contains(self, item: Any) -> bool:
        if item is None:
            raise ContractViolation("hashed set cannot hold NULL")
        cell = self.buckets.read(self._bucket(item))
        while cell is not None:
            if cell.item == item:
                return True
            cell = cell.next
        return False

    __contains__ = contains

    def __len__(self) -> int:
        return self.count

    def chain(self, idx: int) -> list[Any]:
        out = []
        cell = self.buckets.read(idx)
        while cell is not None:
            out.append(cell.item)
            cell = cell.next
        return out
