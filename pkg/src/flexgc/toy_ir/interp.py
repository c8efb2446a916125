"""Reference interpreter: runs a :class:`Program` on a :class:`Heap`.

Besides executing, it records every dynamic type seen at each static
location (on stores and loads), so the analysis can be checked against
ground truth.  Faults are recorded and the faulting statement is skipped;
nothing is silently absorbed.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from ..flexarray import ContractViolation, FastArray, RingArray, Tracer, ZeroedArray, _Storage
from ..heap_gc import ArrayRecord, GcStats, Heap, HeapObject, MarkPlan, PlanFault, type_of
from .nodes import (
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


@dataclass(frozen=True)
class RunEvent:
    kind: str
    where: str
    message: str = ""


@dataclass
class RunTrace:
    observed: dict[Location, Counter] = field(default_factory=lambda: defaultdict(Counter))
    array_reads: dict[str, Counter] = field(default_factory=lambda: defaultdict(Counter))
    null_derefs: list[RunEvent] = field(default_factory=list)
    faults: list[RunEvent] = field(default_factory=list)
    gc: list[GcStats] = field(default_factory=list)
    exhausted: bool = False
    steps: int = 0
    exit_arrays: list[ArrayRecord] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.faults or self.null_derefs or self.exhausted)


class _Fault(Exception):
    def __init__(self, kind: str, message: str) -> None:
        self.kind = kind
        self.message = message


class _NullDeref(Exception):
    def __init__(self, what: str) -> None:
        self.what = what


class _Return(Exception):
    def __init__(self, has_value: bool, value: Any = None) -> None:
        self.has_value = has_value
        self.value = value


class _Exhausted(Exception):
    pass


class _Abort(Exception):
    pass


@dataclass
class _Frame:
    method: Method
    params: list[Any]
    locals: dict[str, Any] = field(default_factory=dict)


class Interpreter:
    def __init__(self, program: Program, *, budget: int = 100_000, gc_budget: int = 4096,
                 plans: Optional[tuple[dict[str, MarkPlan], dict[tuple[str, str], MarkPlan]]] = None,
                 tracer: Optional[Tracer] = None, max_depth: int = 64) -> None:
        self.program = program
        self.budget = budget
        self.max_depth = max_depth
        layouts = {c: [f for f, _ in program.layout(c)] for c in program.classes}
        self.heap = Heap(layouts, budget=gc_budget, tracer=tracer)
        if plans is not None:
            self.heap.array_plans, self.heap.field_plans = plans
        self.globals: dict[str, Any] = {}
        self.frames: list[_Frame] = []
        self.trace = RunTrace()

    # bookkeeping ----------------------------------------------------------

    def _observe(self, loc: Location, value: Any) -> None:
        t = type_of(value)
        if t is not None:
            self.trace.observed[loc][t] += 1

    def _roots(self) -> list[Any]:
        roots = list(self.globals.values())
        for fr in self.frames:
            roots.extend(fr.params)
            roots.extend(fr.locals.values())
        return roots

    def collect(self) -> None:
        try:
            self.trace.gc.append(self.heap.collect(self._roots()))
        except PlanFault as e:
            self.trace.faults.append(RunEvent("plan", e.where, str(e)))
            raise _Abort from None

    # expressions ----------------------------------------------------------

    def _object(self, e: Expr, fr: _Frame, what: str) -> HeapObject:
        o = self.eval(e, fr)
        if o is None:
            raise _NullDeref(what)
        if not isinstance(o, HeapObject):
            raise _Fault("type", f"{what}: {type_of(o)} is not an object")
        return o

    def _array(self, e: Expr, fr: _Frame, what: str) -> _Storage:
        a = self.eval(e, fr)
        if a is None:
            raise _NullDeref(what)
        if not isinstance(a, _Storage):
            raise _Fault("type", f"{what}: {type_of(a)} is not an array")
        return a

    def _field_owner(self, o: HeapObject, name: str) -> str:
        owner = self.program.field_owner(o.type_id, name)
        if owner is None:
            raise _Fault("type", f"{o.type_id} has no field {name}")
        return owner

    def eval(self, e: Expr, fr: Optional[_Frame]) -> Any:
        if isinstance(e, Null):
            return None
        if isinstance(e, New):
            init = {f: self.eval(v, fr) for f, v in e.init}
            o = self.heap.alloc_object(e.cls)
            for f, owner in self.program.layout(e.cls):
                v = init.get(f)
                o.fields[f] = v
                self._observe(Location.field(owner, f), v)
            return o
        if isinstance(e, Local):
            if e.name not in fr.locals:
                raise _Fault("uninitialized", f"local {e.name} read before assignment")
            v = fr.locals[e.name]
            self._observe(Location.local(fr.method.id, e.name), v)
            return v
        if isinstance(e, Global):
            v = self.globals[e.name]
            self._observe(Location.global_(e.name), v)
            return v
        if isinstance(e, Param):
            idx = fr.method.param_index(e.name)
            v = fr.params[idx]
            self._observe(Location.param(fr.method.id, idx), v)
            return v
        if isinstance(e, Self):
            v = fr.params[0]
            self._observe(Location.param(fr.method.id, 0), v)
            return v
        if isinstance(e, Field):
            o = self._object(e.of, fr, f"field read .{e.name}")
            owner = self._field_owner(o, e.name)
            v = o.fields[e.name]
            self._observe(Location.field(owner, e.name), v)
            return v
        if isinstance(e, ARead):
            a = self._array(e.array, fr, "array read")
            try:
                v = a.read(e.index)
            except ContractViolation as exc:
                raise _Fault("contract", str(exc)) from None
            self._observe(Location.array(a.content_site), v)
            t = type_of(v)
            if t is not None:
                self.trace.array_reads[a.content_site][t] += 1
            return v
        raise TypeError(e)

    def _store(self, place: Expr, value: Any, fr: _Frame) -> None:
        if isinstance(place, Local):
            fr.locals[place.name] = value
            self._observe(Location.local(fr.method.id, place.name), value)
        elif isinstance(place, Global):
            self.globals[place.name] = value
            self._observe(Location.global_(place.name), value)
        elif isinstance(place, Field):
            o = self._object(place.of, fr, f"field write .{place.name}")
            owner = self._field_owner(o, place.name)
            o.fields[place.name] = value
            self._observe(Location.field(owner, place.name), value)
        else:  # pragma: no cover - validator guards
            raise TypeError(place)

    # statements -----------------------------------------------------------

    def _array_op(self, a: _Storage, op: Callable[[], None], value: Any, stored: bool) -> None:
        try:
            op()
        except ContractViolation as exc:
            raise _Fault("contract", str(exc)) from None
        if stored:
            self._observe(Location.array(a.content_site), value)

    def exec(self, s: Stmt, fr: _Frame) -> None:
        if isinstance(s, (AssignLocal, AssignGlobal)):
            place = Local(s.name) if isinstance(s, AssignLocal) else Global(s.name)
            self._store(place, self.eval(s.value, fr), fr)
        elif isinstance(s, AssignField):
            o = self._object(s.of, fr, f"field write .{s.name}")
            owner = self._field_owner(o, s.name)
            v = self.eval(s.value, fr)
            o.fields[s.name] = v
            self._observe(Location.field(owner, s.name), v)
        elif isinstance(s, ArrayCreate):
            try:
                a = self.heap.new_array(s.kind, *s.args, site=s.site)
            except ContractViolation as exc:
                raise _Fault("contract", str(exc)) from None
            if s.kind in ("calloc", "zeroed") and len(a.storage):
                self._observe(Location.array(s.site), None)
            self._store(s.into, a, fr)
        elif isinstance(s, ArrayExtend):
            a = self._array(s.array, fr, "extend")
            v = self.eval(s.value, fr)
            if isinstance(a, ZeroedArray):
                raise _Fault("contract", "extend on a fixed-length zeroed array")
            self._array_op(a, lambda: a.extend(v), v, True)
        elif isinstance(s, ArrayPrepend):
            a = self._array(s.array, fr, "prepend")
            v = self.eval(s.value, fr)
            if not isinstance(a, RingArray):
                raise _Fault("contract", f"prepend on a {a.kind} array")
            self._array_op(a, lambda: a.prepend(v), v, True)
        elif isinstance(s, ArrayWrite):
            a = self._array(s.array, fr, "write")
            v = self.eval(s.value, fr)
            self._array_op(a, lambda: a.write(s.index, v), v, True)
        elif isinstance(s, ArrayRemoveLast):
            a = self._array(s.array, fr, "remove_last")
            if isinstance(a, ZeroedArray):
                raise _Fault("contract", "remove_last on a fixed-length zeroed array")
            self._array_op(a, a.remove_last, None, False)
        elif isinstance(s, Call):
            self._call(s, fr)
        elif isinstance(s, Return):
            if s.value is None:
                raise _Return(False)
            raise _Return(True, self.eval(s.value, fr))
        else:  # pragma: no cover
            raise TypeError(s)

    def _call(self, s: Call, fr: _Frame) -> None:
        recv = self.eval(s.receiver, fr)
        if recv is None:
            raise _NullDeref(f"call {s.method} at {s.site}")
        if not isinstance(recv, HeapObject):
            raise _Fault("type", f"call {s.method} on {type_of(recv)}")
        target = self.program.resolve(recv.type_id, s.method)
        if target is None:
            raise _Fault("type", f"{recv.type_id} does not understand {s.method}")
        args = [self.eval(a, fr) for a in s.args]
        has_value, value = self._invoke(target, recv, args)
        if s.result is not None and has_value:
            self._store(Local(s.result), value, fr)

    def _step(self, s: Stmt, fr: _Frame, k: int) -> None:
        self.trace.steps += 1
        if self.trace.steps > self.budget:
            raise _Exhausted
        if self.heap.should_collect():
            self.collect()
        where = f"{fr.method.id}[{k}]"
        try:
            self.exec(s, fr)
        except _NullDeref as e:
            self.trace.null_derefs.append(RunEvent("null_dereference", where, e.what))
        except _Fault as e:
            self.trace.faults.append(RunEvent(e.kind, where, e.message))

    def _invoke(self, m: Method, recv: Any, args: list[Any], final: bool = False) -> tuple[bool, Any]:
        if len(self.frames) >= self.max_depth:
            raise _Exhausted
        fr = _Frame(m, [recv, *args])
        for i, v in enumerate(fr.params):
            self._observe(Location.param(m.id, i), v)
        self.frames.append(fr)
        result: tuple[bool, Any] = (False, None)
        try:
            for k, s in enumerate(m.body):
                self._step(s, fr, k)
            if m.return_expr is not None:
                try:
                    result = (True, self.eval(m.return_expr, fr))
                except _NullDeref as e:
                    self.trace.null_derefs.append(RunEvent("null_dereference", f"{m.id}[return]", e.what))
                except _Fault as e:
                    self.trace.faults.append(RunEvent(e.kind, f"{m.id}[return]", e.message))
        except _Return as r:
            result = (r.has_value, r.value)
        if result[0]:
            self._observe(Location.ret(m.id), result[1])
        if final:
            self.collect()
        self.frames.pop()
        return result

    # driver ---------------------------------------------------------------

    def run(self) -> RunTrace:
        p = self.program
        try:
            for g, init in p.globals.items():
                v = self.eval(init, None)
                self.globals[g] = v
                self._observe(Location.global_(g), v)
            cls, _ = p.entry
            recv = self.eval(New(cls), None)
            self._invoke(p.entry_method, recv, [], final=True)
        except _Exhausted:
            self.trace.exhausted = True
            try:
                self.collect()
            except _Abort:
                pass
        except _Abort:
            pass
        self.frames.clear()
        self.trace.exit_arrays = [_record(a) for a in self.heap.live() if isinstance(a, _Storage)]
        return self.trace


def _record(a: _Storage) -> ArrayRecord:
    if isinstance(a, RingArray):
        return ArrayRecord(a.kind, a.content_site, a.count, a.capacity)
    if isinstance(a, ZeroedArray):
        return ArrayRecord(a.kind, a.content_site, a.scanned, a.length)
    assert isinstance(a, FastArray)
    return ArrayRecord(a.kind, a.content_site, a.size, a.capacity)


def interpret(program: Program, budget: int = 100_000, **kw) -> RunTrace:
    return Interpreter(program, budget=budget, **kw).run()
