"""Flow-insensitive type-set analysis over toy IR programs.

NULL is an ordinary member of a set, so null-dereference sites and
null-free arrays fall out of plain membership tests.  Every array cell
produced at one allocation site shares a single content set.  Fields are
merged per declaring class, params are per method and index (0 is the
receiver), and returns are per method.  Reachability is computed in the
same fixpoint, because call targets depend on receiver sets.
"""

from __future__ import annotations

from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .heap_gc import NULL_T, MarkPlan, array_type, derive_mark_plan, is_array_type, site_of
from .toy_ir.nodes import (
    ARead,
    ArrayCreate,
    ArrayExtend,
    ArrayPrepend,
    ArrayRemoveLast,
    ArrayWrite,
    AssignField,
    AssignGlobal,
    AssignLocal,
    Call,
    Expr,
    Field,
    Global,
    Local,
    Location,
    Method,
    New,
    Null,
    Param,
    Program,
    Return,
    Self,
    Stmt,
)

SATURATIONS = (None, "null", "subtypes")


class ResolutionError(LookupError):
    def __init__(self, cls: str, mname: str) -> None:
        self.cls = cls
        self.mname = mname
        super().__init__(f"{cls} has no method {mname}")


@dataclass(frozen=True)
class FlowResult:
    sets: dict[Location, frozenset[str]]
    reachable: frozenset[str]
    null_dereference_sites: frozenset[str]
    # (class, method, call site) triples with no definition; they fault at run time
    unresolved: frozenset[tuple[str, str, str]] = frozenset()
    saturation: Optional[str] = None
    program: Optional[Program] = field(default=None, compare=False, repr=False)

    def get(self, loc: Location) -> frozenset[str]:
        return self.sets.get(loc, frozenset())

    def content(self, site: str) -> frozenset[str]:
        return self.get(Location.array(site))

    def null_free_sites(self) -> list[str]:
        return sorted(loc.name for loc, ts in self.sets.items()
                      if loc.kind == "array" and NULL_T not in ts)

    def is_superset_of(self, other: "FlowResult") -> bool:
        return all(ts <= self.get(loc) for loc, ts in other.sets.items())


def _classes(ts: Iterable[str]) -> list[str]:
    return sorted(t for t in ts if t != NULL_T and not is_array_type(t))


def dispatch_targets(receiver_ts: Iterable[str], mname: str, program: Program) -> set[Method]:
    """Nearest definition of ``mname`` for every class in ``receiver_ts``.

    NULL and array members contribute no target.
    """
    out = set()
    for c in _classes(receiver_ts):
        m = program.resolve(c, mname)
        if m is None:
            raise ResolutionError(c, mname)
        out.add(m)
    return out


class _Solver:
    def __init__(self, p: Program, order: str, saturate: Optional[str]) -> None:
        if order not in ("fifo", "lifo"):
            raise ValueError(f"unknown worklist order {order!r}")
        if saturate not in SATURATIONS:
            raise ValueError(f"unknown saturation {saturate!r}")
        self.p = p
        self.order = order
        self.saturate = saturate
        self.sets: dict[Location, set[str]] = {}
        self.readers: dict[Location, set[str]] = defaultdict(set)
        self.reachable: set[str] = set()
        self.null_sites: set[str] = set()
        self.unresolved: set[tuple[str, str, str]] = set()
        self.work: deque[str] = deque()
        self.queued: set[str] = set()
        self.current: Optional[Method] = None

    # sets -------------------------------------------------------------------

    def _loc(self, loc: Location) -> set[str]:
        s = self.sets.get(loc)
        if s is None:
            s = self.sets[loc] = set()
            if loc.kind == "array" and self.saturate is not None:
                self.join(loc, {NULL_T})
        return s

    def read(self, loc: Location) -> set[str]:
        if self.current is not None:
            self.readers[loc].add(self.current.id)
        return self._loc(loc)

    def join(self, loc: Location, ts: Iterable[str]) -> None:
        s = self._loc(loc)
        new = set(ts) - s
        if loc.kind == "array" and self.saturate == "subtypes" and new:
            for c in _classes(new):
                new.update(self.p.descendants(c))
            new.add(NULL_T)
            new -= s
        if not new:
            return
        s |= new
        for mid in self.readers.get(loc, ()):
            self._enqueue(mid)

    def _enqueue(self, mid: str) -> None:
        if mid not in self.queued:
            self.queued.add(mid)
            self.work.append(mid)

    def _reach(self, m: Method) -> None:
        if m.id in self.reachable:
            return
        self.reachable.add(m.id)
        for name in m.locals:
            self._loc(Location.local(m.id, name))
        for i in range(len(m.params) + 1):
            self._loc(Location.param(m.id, i))
        self._loc(Location.ret(m.id))
        self._enqueue(m.id)

    # transfer rules -----------------------------------------------------------

    def _new(self, e: New) -> set[str]:
        given = {f for f, _ in e.init}
        for f, v in e.init:
            owner = self.p.field_owner(e.cls, f)
            self.join(Location.field(owner, f), self.eval(v))
        for f, owner in self.p.layout(e.cls):
            if f not in given:
                self.join(Location.field(owner, f), {NULL_T})
        return {e.cls}

    def eval(self, e: Expr) -> set[str]:
        m = self.current
        if isinstance(e, Null):
            return {NULL_T}
        if isinstance(e, New):
            return self._new(e)
        if isinstance(e, Local):
            return self.read(Location.local(m.id, e.name))
        if isinstance(e, Global):
            return self.read(Location.global_(e.name))
        if isinstance(e, Param):
            return self.read(Location.param(m.id, m.param_index(e.name)))
        if isinstance(e, Self):
            return self.read(Location.param(m.id, 0))
        if isinstance(e, Field):
            out: set[str] = set()
            for loc in self._field_locs(self.eval(e.of), e.name):
                out |= self.read(loc)
            return out
        if isinstance(e, ARead):
            out = set()
            for site in self._sites(self.eval(e.array)):
                out |= self.read(Location.array(site))
            return out
        raise TypeError(e)

    def _field_locs(self, holders: Iterable[str], name: str) -> list[Location]:
        owners = {self.p.field_owner(c, name) for c in _classes(holders)}
        return [Location.field(o, name) for o in sorted(owners - {None})]

    @staticmethod
    def _sites(ts: Iterable[str]) -> list[str]:
        return sorted(site_of(t) for t in ts if is_array_type(t))

    def store(self, place: Expr, ts: set[str]) -> None:
        m = self.current
        if isinstance(place, Local):
            self.join(Location.local(m.id, place.name), ts)
        elif isinstance(place, Global):
            self.join(Location.global_(place.name), ts)
        elif isinstance(place, Field):
            for loc in self._field_locs(self.eval(place.of), place.name):
                self.join(loc, ts)
        else:  # pragma: no cover - parser guards
            raise TypeError(place)

    def stmt(self, s: Stmt) -> None:
        m = self.current
        if isinstance(s, AssignLocal):
            self.store(Local(s.name), self.eval(s.value))
        elif isinstance(s, AssignGlobal):
            self.store(Global(s.name), self.eval(s.value))
        elif isinstance(s, AssignField):
            self.store(Field(s.of, s.name), self.eval(s.value))
        elif isinstance(s, ArrayCreate):
            content = Location.array(s.site)
            self._loc(content)
            if s.kind in ("calloc", "zeroed"):
                self.join(content, {NULL_T})
            self.store(s.into, {array_type(s.site)})
        elif isinstance(s, (ArrayExtend, ArrayPrepend, ArrayWrite)):
            sites = self._sites(self.eval(s.array))
            ts = self.eval(s.value)
            for site in sites:
                self.join(Location.array(site), ts)
        elif isinstance(s, ArrayRemoveLast):
            self.eval(s.array)
        elif isinstance(s, Call):
            self._call(s)
        elif isinstance(s, Return):
            if s.value is not None:
                self.join(Location.ret(m.id), self.eval(s.value))
        else:  # pragma: no cover
            raise TypeError(s)

    def _call(self, s: Call) -> None:
        recv = self.eval(s.receiver)
        if NULL_T in recv:
            self.null_sites.add(s.site)
        args = [self.eval(a) for a in s.args]
        by_target: dict[str, set[str]] = defaultdict(set)
        targets: dict[str, Method] = {}
        for c in _classes(recv):
            try:
                (t,) = dispatch_targets({c}, s.method, self.p)
            except ResolutionError:
                self.unresolved.add((c, s.method, s.site))
                continue
            by_target[t.id].add(c)
            targets[t.id] = t
        for tid in sorted(targets):
            t = targets[tid]
            self._reach(t)
            self.join(Location.param(tid, 0), by_target[tid])
            for i, ts in enumerate(args, start=1):
                self.join(Location.param(tid, i), ts)
            if s.result is not None:
                self.store(Local(s.result), self.read(Location.ret(tid)))

    def method(self, m: Method) -> None:
        self.current = m
        for s in m.body:
            self.stmt(s)
        if m.return_expr is not None:
            self.join(Location.ret(m.id), self.eval(m.return_expr))
        self.current = None

    # driver ----------------------------------------------------------------

    def solve(self) -> FlowResult:
        p = self.p
        for c, decl in p.classes.items():
            for f in decl.fields:
                self._loc(Location.field(c, f))
        for g, init in p.globals.items():
            self.join(Location.global_(g), self.eval(init))
        entry = p.entry_method
        self._reach(entry)
        self.join(Location.param(entry.id, 0), self._new(New(p.entry[0])))
        while self.work:
            mid = self.work.popleft() if self.order == "fifo" else self.work.pop()
            self.queued.discard(mid)
            self.method(p.method(mid))
        return FlowResult(
            sets={loc: frozenset(ts) for loc, ts in self.sets.items()},
            reachable=frozenset(self.reachable),
            null_dereference_sites=frozenset(self.null_sites),
            unresolved=frozenset(self.unresolved),
            saturation=self.saturate,
            program=p,
        )


def compute_type_sets(p: Program, *, order: str = "fifo", saturate: Optional[str] = None) -> FlowResult:
    """Least fixpoint of the transfer rules over the reachable methods.

    ``saturate="null"`` adds NULL to every array content set;
    ``saturate="subtypes"`` also closes content sets under subclassing.
    """
    return _Solver(p, order, saturate).solve()


def compute_reachable(p: Program) -> frozenset[str]:
    return compute_type_sets(p).reachable


def _resaturate(r: FlowResult, how: str) -> FlowResult:
    if r.program is None:
        raise ValueError("result carries no program to re-run")
    return compute_type_sets(r.program, saturate=how)


def saturate_null(r: FlowResult) -> FlowResult:
    return _resaturate(r, "null")


def saturate_subtypes(r: FlowResult) -> FlowResult:
    return _resaturate(r, "subtypes")


# derived views ----------------------------------------------------------------

def mark_plans(r: FlowResult) -> tuple[dict[str, MarkPlan], dict[tuple[str, str], MarkPlan]]:
    """Array plans by site and field plans by ``(concrete class, field)``."""
    arrays = {loc.name: derive_mark_plan(ts) for loc, ts in r.sets.items() if loc.kind == "array"}
    fields: dict[tuple[str, str], MarkPlan] = {}
    if r.program is not None:
        for c in r.program.classes:
            for f, owner in r.program.layout(c):
                fields[(c, f)] = derive_mark_plan(r.get(Location.field(owner, f)))
    return arrays, fields


def _kind_locations(r: FlowResult, kind: str) -> list[Location]:
    if kind == "local":
        return [loc for loc in r.sets if loc.kind == "local" and loc.scope in r.reachable]
    return [loc for loc in r.sets if loc.kind == kind]


NULL_RATIO_KINDS = ("local", "global", "field")


def null_ratios(r: FlowResult) -> dict[str, tuple[int, int, float]]:
    """Per location kind: ``(holders of NULL, locations, ratio)``."""
    out = {}
    for kind in NULL_RATIO_KINDS:
        locs = _kind_locations(r, kind)
        holders = sum(NULL_T in r.sets[loc] for loc in locs)
        out[kind] = (holders, len(locs), holders / len(locs) if locs else 0.0)
    return out


def set_size_distribution(r: FlowResult, kind: str = "local") -> Counter:
    return Counter(len(r.sets[loc]) for loc in _kind_locations(r, kind))


def to_json(r: FlowResult) -> dict[str, Any]:
    locs = sorted(r.sets, key=str)
    return {
        "saturation": r.saturation or "none",
        "locations": [{"location": str(loc), "types": sorted(r.sets[loc])} for loc in locs],
        "reachable_methods": sorted(r.reachable),
        "null_dereference_sites": sorted(r.null_dereference_sites),
        "unresolved_calls": [list(u) for u in sorted(r.unresolved)],
    }
