"""Gradual-filling classifier for allocation traces.

A trace is line oriented, one event per line::

    A <id> <bytes> <m|c>              allocation (malloc-like / calloc-like)
    W <id> <offset> <width> <r|n|o>   write of a heap ref, null, or other value
    R <id> <offset> <width>           read
    X <id> <new_bytes>                realloc
    F <id>                            free

Blocks start as gradual candidates.  A pointer-sized, aligned write at the
current watermark extends the used area; a write inside it is harmless; a
write past it demotes the block for good.  Anything that does not look like
an array of references is excluded from the accounting.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, TextIO, Union

CANDIDATE = "candidate_gradual"
NOT_GRADUAL = "not_gradual"
EXCLUDED = "excluded"

_ALLOWED = {
    (CANDIDATE, NOT_GRADUAL),
    (CANDIDATE, EXCLUDED),
    (NOT_GRADUAL, EXCLUDED),
}

REPORT_HEADER = ("used_bytes,supply_bytes,not_gradual_bytes,gradual_malloc,"
                 "gradual_calloc,not_gradual_count,useless_calloc_count")


class TraceError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.message = message
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# events ----------------------------------------------------------------------

@dataclass(frozen=True)
class Alloc:
    block_id: int
    bytes: int
    zeroed: bool


@dataclass(frozen=True)
class Write:
    block_id: int
    offset_bytes: int
    width_bytes: int
    value_kind: str  # heap_ref | null | other


@dataclass(frozen=True)
class Read:
    block_id: int
    offset_bytes: int
    width_bytes: int


@dataclass(frozen=True)
class Realloc:
    block_id: int
    new_bytes: int


@dataclass(frozen=True)
class Free:
    block_id: int


TraceEvent = Union[Alloc, Write, Read, Realloc, Free]

_VALUE_KINDS = {"r": "heap_ref", "n": "null", "o": "other"}
_VALUE_CODES = {v: k for k, v in _VALUE_KINDS.items()}
_ARITY = {"A": 3, "W": 4, "R": 3, "X": 2, "F": 1}


def _num(tok: str, line: Optional[int], what: str, positive: bool = False) -> int:
    if not tok.isdigit():
        raise TraceError(f"{what} must be a non-negative decimal integer, got {tok!r}", line)
    v = int(tok)
    if positive and v == 0:
        raise TraceError(f"{what} must be positive", line)
    return v


def parse_line(text: str, line: Optional[int] = None) -> Optional[TraceEvent]:
    """Parse one trace line; blank and comment-only lines give ``None``."""
    text = text.split("#", 1)[0]
    toks = text.split()
    if not toks:
        return None
    tag, args = toks[0], toks[1:]
    if tag not in _ARITY:
        raise TraceError(f"unknown event {tag!r}", line)
    if len(args) != _ARITY[tag]:
        raise TraceError(f"event {tag} takes {_ARITY[tag]} fields, got {len(args)}", line)
    bid = _num(args[0], line, "block id")
    if tag == "A":
        if args[2] not in ("m", "c"):
            raise TraceError(f"allocation kind must be m or c, got {args[2]!r}", line)
        return Alloc(bid, _num(args[1], line, "size"), args[2] == "c")
    if tag == "W":
        if args[3] not in _VALUE_KINDS:
            raise TraceError(f"value kind must be r, n or o, got {args[3]!r}", line)
        return Write(bid, _num(args[1], line, "offset"), _num(args[2], line, "width", True),
                     _VALUE_KINDS[args[3]])
    if tag == "R":
        return Read(bid, _num(args[1], line, "offset"), _num(args[2], line, "width", True))
    if tag == "X":
        return Realloc(bid, _num(args[1], line, "size"))
    return Free(bid)


def format_event(ev: TraceEvent) -> str:
    if isinstance(ev, Alloc):
        return f"A {ev.block_id} {ev.bytes} {'c' if ev.zeroed else 'm'}"
    if isinstance(ev, Write):
        return f"W {ev.block_id} {ev.offset_bytes} {ev.width_bytes} {_VALUE_CODES[ev.value_kind]}"
    if isinstance(ev, Read):
        return f"R {ev.block_id} {ev.offset_bytes} {ev.width_bytes}"
    if isinstance(ev, Realloc):
        return f"X {ev.block_id} {ev.new_bytes}"
    return f"F {ev.block_id}"


# classifier --------------------------------------------------------------------

@dataclass
class BlockState:
    block_id: int
    bytes: int
    zeroed: bool
    word_size: int
    used_slots: int = 0
    category: str = CANDIDATE

    def move_to(self, category: str) -> None:
        if category == self.category:
            return
        assert (self.category, category) in _ALLOWED, \
            f"block {self.block_id}: illegal transition {self.category} -> {category}"
        self.category = category


@dataclass
class MinerState:
    word_size: int = 8
    live: dict[int, BlockState] = field(default_factory=dict)
    events: int = 0

    def __post_init__(self) -> None:
        if self.word_size <= 0:
            raise ValueError("word size must be positive")

    def _block(self, bid: int, line: Optional[int]) -> BlockState:
        b = self.live.get(bid)
        if b is None:
            raise TraceError(f"unknown or freed block {bid}", line)
        return b

    def _bounds(self, b: BlockState, off: int, width: int, line: Optional[int]) -> None:
        if off + width > b.bytes:
            raise TraceError(f"access [{off}, {off + width}) outside block {b.block_id} "
                             f"of {b.bytes} bytes", line)


def ingest_event(state: MinerState, ev: TraceEvent, line: Optional[int] = None) -> MinerState:
    ws = state.word_size
    state.events += 1
    if isinstance(ev, Alloc):
        if ev.block_id in state.live:
            raise TraceError(f"block {ev.block_id} allocated twice", line)
        state.live[ev.block_id] = BlockState(ev.block_id, ev.bytes, ev.zeroed, ws)
    elif isinstance(ev, Write):
        b = state._block(ev.block_id, line)
        state._bounds(b, ev.offset_bytes, ev.width_bytes, line)
        if ev.width_bytes != ws or ev.offset_bytes % ws or ev.value_kind == "other":
            b.move_to(EXCLUDED)
        elif b.category == CANDIDATE:
            s = ev.offset_bytes // ws
            if s == b.used_slots:
                b.used_slots += 1
            elif s > b.used_slots:
                b.move_to(NOT_GRADUAL)
    elif isinstance(ev, Read):
        b = state._block(ev.block_id, line)
        state._bounds(b, ev.offset_bytes, ev.width_bytes, line)
        if ev.width_bytes != ws:
            b.move_to(EXCLUDED)
    elif isinstance(ev, Realloc):
        b = state._block(ev.block_id, line)
        b.bytes = ev.new_bytes
        b.used_slots = min(b.used_slots, ev.new_bytes // ws)
    elif isinstance(ev, Free):
        state._block(ev.block_id, line)
        del state.live[ev.block_id]
    else:  # pragma: no cover
        raise TypeError(ev)
    return state


@dataclass(frozen=True)
class MinerReport:
    used_bytes_gradual: int = 0
    supply_bytes_gradual: int = 0
    bytes_not_gradual: int = 0
    gradual_malloc: int = 0
    gradual_calloc: int = 0
    not_gradual: int = 0
    useless_calloc_ids: frozenset[int] = frozenset()

    @property
    def total_bytes(self) -> int:
        return self.used_bytes_gradual + self.supply_bytes_gradual + self.bytes_not_gradual

    def csv_row(self) -> str:
        return ",".join(str(v) for v in (
            self.used_bytes_gradual, self.supply_bytes_gradual, self.bytes_not_gradual,
            self.gradual_malloc, self.gradual_calloc, self.not_gradual,
            len(self.useless_calloc_ids)))

    def to_csv(self) -> str:
        return f"{REPORT_HEADER}\n{self.csv_row()}\n"


def included_bytes(state: MinerState) -> int:
    return sum(b.bytes for b in state.live.values() if b.category != EXCLUDED)


def finalize(state: MinerState) -> MinerReport:
    """Snapshot of the blocks still live at the end of the trace."""
    used = supply = other = 0
    g_malloc = g_calloc = n_not = 0
    useless = set()
    for b in state.live.values():
        if b.category == CANDIDATE:
            u = b.used_slots * state.word_size
            used += u
            supply += b.bytes - u
            if b.zeroed:
                g_calloc += 1
                useless.add(b.block_id)
            else:
                g_malloc += 1
        elif b.category == NOT_GRADUAL:
            other += b.bytes
            n_not += 1
    return MinerReport(used, supply, other, g_malloc, g_calloc, n_not, frozenset(useless))


def mine(lines: Iterable[str], word_size: int = 8) -> MinerReport:
    state = MinerState(word_size)
    for n, text in enumerate(lines, start=1):
        ev = parse_line(text, n)
        if ev is not None:
            ingest_event(state, ev, n)
    return finalize(state)


# producer side -----------------------------------------------------------------

def _value_kind(value: Any) -> str:
    # local import: the heap module depends on flexarray, not on us
    from .flexarray import Cell, _Storage
    from .heap_gc import HeapObject

    if value is None:
        return "null"
    if isinstance(value, (HeapObject, _Storage, Cell)):
        return "heap_ref"
    return "other"


class TraceWriter:
    """Tracer that writes storage events in the trace format above.

    Block ids are handed out sequentially from 1 and every slot is
    ``word_size`` bytes wide.
    """

    def __init__(self, out: Optional[TextIO] = None, word_size: int = 8) -> None:
        self.out = out if out is not None else io.StringIO()
        self.word_size = word_size
        self.next_id = 1

    def _emit(self, ev: TraceEvent) -> None:
        self.out.write(format_event(ev) + "\n")

    def alloc(self, nslots: int, zeroed: bool) -> int:
        bid = self.next_id
        self.next_id += 1
        self._emit(Alloc(bid, nslots * self.word_size, zeroed))
        return bid

    def realloc(self, block: int, nslots: int) -> None:
        self._emit(Realloc(block, nslots * self.word_size))

    def write(self, block: int, slot: int, value: Any) -> None:
        self._emit(Write(block, slot * self.word_size, self.word_size, _value_kind(value)))

    def read(self, block: int, slot: int) -> None:
        self._emit(Read(block, slot * self.word_size, self.word_size))

    def free(self, block: int) -> None:
        self._emit(Free(block))
