"""Seeded random program generator used by the fuzz and soundness suites.

The generator keeps a private typing discipline (every variable holds either
objects of the main hierarchy or arrays of one kind) so most generated
programs run far enough to be interesting.  Calls only go to methods with a
higher level number, so every program terminates.
"""

from __future__ import annotations

import random
from typing import Any, Optional

from .nodes import Program
from .parse import parse_program

_KINDS = ("fast", "indexed", "ring", "calloc", "zeroed")
_OPS = {
    "fast": ("extend", "extend", "awrite", "aread", "remove_last"),
    "indexed": ("extend", "extend", "awrite", "aread", "remove_last"),
    "calloc": ("awrite", "aread", "extend", "remove_last"),
    "ring": ("extend", "prepend", "awrite", "aread", "remove_last"),
    "zeroed": ("awrite", "awrite", "aread"),
}


class _Gen:
    def __init__(self, seed: int, classes: int, methods: int, statements: int, depth: int) -> None:
        self.rng = random.Random(seed)
        self.n_classes = max(1, classes)
        self.n_methods = max(1, methods)
        self.n_statements = max(1, statements)
        self.depth = max(0, depth)
        self.site_counter = 0

    # typing helpers: a type is "obj" or ("arr", kind)

    def _type(self) -> Any:
        if self.rng.random() < 0.6:
            return "obj"
        return ("arr", self.rng.choice(_KINDS))

    def build(self) -> dict:
        rng = self.rng
        names = [f"K{i}" for i in range(self.n_classes)]
        self.parent: dict[str, Optional[str]] = {"K0": None}
        level = {"K0": 0}
        for c in names[1:]:
            choices = [p for p in names if p in level and level[p] < self.depth]
            p = rng.choice(choices) if choices else None
            self.parent[c] = p
            level[c] = 0 if p is None else level[p] + 1
        self.classes = names

        # fields, unique program-wide
        self.fields: dict[str, dict[str, Any]] = {c: {} for c in names}
        k = 0
        for c in names:
            for _ in range(rng.randint(0, 2)):
                self.fields[c][f"f{k}"] = self._type()
                k += 1
        self.root_fields = {f: t for c in names if self.parent[c] is None
                            for f, t in self.fields[c].items()}

        # method signatures; every root declares every method name
        self.sigs = []
        for i in range(self.n_methods):
            params = [self._type() for _ in range(rng.randint(0, 2))]
            ret = rng.choice([None, "obj", self._type()])
            self.sigs.append((f"m{i}", params, ret))

        self.globals = {f"g{i}": self._type() for i in range(rng.randint(0, 3))}

        classes = []
        for c in names:
            methods = {}
            for level_i, (mname, params, ret) in enumerate(self.sigs):
                if self.parent[c] is None or rng.random() < 0.35:
                    methods[mname] = self.method(c, level_i, params, ret)
            classes.append({"name": c, "parent": self.parent[c],
                            "fields": list(self.fields[c]), "methods": methods})
        main = {"params": [], "locals": [], "body": [], "return": None}
        classes.append({"name": "MAIN", "parent": None, "fields": [],
                        "methods": {"main": main}})
        main.update(self.method("MAIN", -1, [], None))

        globals_doc = {}
        for g, t in self.globals.items():
            if t == "obj" and rng.random() < 0.6:
                globals_doc[g] = {"expr": "new", "class": rng.choice(names)}
            else:
                globals_doc[g] = None
        return {"version": 1, "classes": classes, "globals": globals_doc,
                "entry": {"class": "MAIN", "method": "main"}}

    def _layout(self, c: str) -> dict[str, Any]:
        out: dict[str, Any] = {}
        cur: Optional[str] = c
        while cur is not None:
            out.update(self.fields[cur])
            cur = self.parent[cur]
        return out

    # expressions -------------------------------------------------------------

    def _vars_of(self, t: Any) -> list[dict]:
        out = [{"expr": "local", "name": n} for n, lt in self.locals.items()
               if lt == t and n in self.assigned]
        out += [{"expr": "param", "name": n} for n, pt in self.params if pt == t]
        out += [{"expr": "global", "name": g} for g, gt in self.globals.items() if gt == t]
        if self.owner != "MAIN":
            out += [{"expr": "field", "of": {"expr": "self"}, "name": f}
                    for f, ft in self._layout(self.owner).items() if ft == t]
        return out

    def obj_expr(self, depth: int = 0) -> dict:
        rng = self.rng
        r = rng.random()
        pool = self._vars_of("obj")
        if self.owner != "MAIN":
            pool.append({"expr": "self"})
        if r < 0.3 or not pool:
            c = rng.choice(self.classes)
            e: dict[str, Any] = {"expr": "new", "class": c}
            layout = self._layout(c)
            init = {f: self.obj_expr(depth + 1) for f, t in layout.items()
                    if t == "obj" and depth < 1 and rng.random() < 0.5}
            if init:
                e["init"] = init
            return e
        if r < 0.38:
            return {"expr": "null"}
        if r < 0.5 and depth < 1:
            arrs = [v for k in _KINDS for v in self._vars_of(("arr", k))]
            if arrs:
                return {"expr": "aread", "array": rng.choice(arrs), "index": rng.randint(-1, 2)}
        if r < 0.58 and depth < 1 and self.root_fields:
            objs = [f for f, t in self.root_fields.items() if t == "obj"]
            if objs:
                return {"expr": "field", "of": rng.choice(pool), "name": rng.choice(objs)}
        return rng.choice(pool)

    def value_expr(self, t: Any) -> Optional[dict]:
        if t == "obj":
            return self.obj_expr()
        pool = self._vars_of(t)
        return self.rng.choice(pool) if pool else None

    # statements --------------------------------------------------------------

    def _create(self, kind: str, into: dict) -> dict:
        self.site_counter += 1
        rng = self.rng
        if kind in ("indexed", "ring"):
            args = [rng.randint(0, 3), rng.randint(-2, 2)]
        elif kind == "fast":
            args = [rng.randint(0, 3)]
        else:
            args = [rng.randint(1, 4)]
        return {"op": "array_create", "site": f"s{self.site_counter}", "kind": kind,
                "args": args, "into": into}

    def _place(self, t: Any) -> Optional[dict]:
        places = [{"expr": "local", "name": n} for n, lt in self.locals.items() if lt == t]
        places += [{"expr": "global", "name": g} for g, gt in self.globals.items() if gt == t]
        if self.owner != "MAIN":
            places += [{"expr": "field", "of": {"expr": "self"}, "name": f}
                       for f, ft in self._layout(self.owner).items() if ft == t]
        return self.rng.choice(places) if places else None

    def statement(self) -> Optional[dict]:
        rng = self.rng
        r = rng.random()
        if r < 0.18:
            t = self._type()
            place = self._place(t)
            if place is None:
                return None
            if t != "obj" and rng.random() < 0.7:
                stmt = self._create(t[1], place)
            else:
                v = self.value_expr(t)
                if v is None:
                    return None
                return self._assign(place, v)
            self._note(place)
            return stmt
        if r < 0.3:
            place = self._place("obj")
            if place is None:
                return None
            return self._assign(place, self.obj_expr())
        if r < 0.42:
            objs = [f for f, t in self.root_fields.items() if t == "obj"]
            if not objs:
                return None
            return {"op": "assign_field", "of": self.obj_expr(), "name": rng.choice(objs),
                    "value": self.obj_expr()}
        if r < 0.75:
            kind = rng.choice(_KINDS)
            arrs = self._vars_of(("arr", kind))
            if not arrs:
                return None
            arr = rng.choice(arrs)
            op = rng.choice(_OPS[kind])
            if op in ("extend", "prepend"):
                return {"op": op, "array": arr, "value": self.obj_expr()}
            if op == "awrite":
                return {"op": "awrite", "array": arr, "index": rng.randint(-1, 3),
                        "value": self.obj_expr()}
            if op == "remove_last":
                return {"op": "remove_last", "array": arr}
            place = self._place("obj")
            if place is None or place["expr"] != "local":
                return None
            return self._assign(place, {"expr": "aread", "array": arr, "index": rng.randint(-1, 2)})
        if r < 0.95:
            callable_ = [(i, s) for i, s in enumerate(self.sigs) if i > self.level]
            if not callable_:
                return None
            _, (mname, params, ret) = rng.choice(callable_)
            args = []
            for pt in params:
                v = self.value_expr(pt)
                if v is None:
                    v = {"expr": "null"}
                args.append(v)
            recv = self.obj_expr() if rng.random() < 0.5 else {"expr": "new", "class": rng.choice(self.classes)}
            stmt = {"op": "call", "receiver": recv, "method": mname, "args": args,
                    "result": None}
            if ret is not None:
                res = [n for n, lt in self.locals.items() if lt == ret]
                if res:
                    stmt["result"] = rng.choice(res)
                    self.assigned.add(stmt["result"])
            return stmt
        if self.ret is not None and rng.random() < 0.5:
            v = self.value_expr(self.ret)
            if v is not None:
                return {"op": "return", "value": v}
        return None

    def _note(self, place: dict) -> None:
        if place["expr"] == "local":
            self.assigned.add(place["name"])

    def _assign(self, place: dict, value: dict) -> dict:
        self._note(place)
        if place["expr"] == "local":
            return {"op": "assign_local", "name": place["name"], "value": value}
        if place["expr"] == "global":
            return {"op": "assign_global", "name": place["name"], "value": value}
        return {"op": "assign_field", "of": place["of"], "name": place["name"], "value": value}

    def method(self, owner: str, level: int, params: list, ret: Any) -> dict:
        rng = self.rng
        self.owner, self.level, self.ret = owner, level, ret
        self.params = [(f"p{i}", t) for i, t in enumerate(params)]
        self.locals = {f"l{i}": self._type() for i in range(rng.randint(1, 4))}
        self.assigned: set[str] = set()
        body = []
        want = self.n_statements * 2 if owner == "MAIN" else rng.randint(1, self.n_statements)
        for _ in range(4 * want):
            if len(body) >= want:
                break
            s = self.statement()
            if s is not None:
                body.append(s)
        ret_expr = None
        if ret is not None:
            ret_expr = self.value_expr(ret)
            if ret_expr is None:
                ret_expr = {"expr": "null"}
        return {"params": [n for n, _ in self.params], "locals": list(self.locals),
                "body": body, "return": ret_expr}


def random_document(seed: int, classes: int = 3, methods: int = 5,
                    statements: int = 8, depth: int = 2) -> dict:
    return _Gen(seed, classes, methods, statements, depth).build()


def random_program(seed: int, classes: int = 3, methods: int = 5,
                   statements: int = 8, depth: int = 2) -> Program:
    """Deterministic, always-valid random program for ``seed``."""
    return parse_program(random_document(seed, classes, methods, statements, depth), validate=False)
