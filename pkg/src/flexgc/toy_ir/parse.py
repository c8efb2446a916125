"""Program documents (JSON) to validated :class:`Program` values and back."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Any, Optional

import jsonschema

from .nodes import (
    ARRAY_KINDS,
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
    ClassDecl,
    Expr,
    Field,
    Global,
    Local,
    Method,
    New,
    Null,
    Param,
    Program,
    Return,
    Self,
    Stmt,
)

SCHEMA_VERSION = 1
RESERVED = {"NULL"}


class ProgramError(ValueError):
    def __init__(self, message: str, where: str = "") -> None:
        self.message = message
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@lru_cache(maxsize=1)
def schema() -> dict:
    text = resources.files(__package__).joinpath("program.schema.json").read_text()
    return json.loads(text)


@lru_cache(maxsize=1)
def _validator() -> jsonschema.Draft202012Validator:
    return jsonschema.Draft202012Validator(schema())


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def parse_program(text: str | dict, *, validate: bool = True) -> Program:
    """Parse and validate a program document (JSON text or decoded dict).

    ``validate=False`` skips the JSON Schema pass (semantic checks still run);
    only meant for documents built by code, such as the random generator.
    """
    if isinstance(text, str):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ProgramError(f"malformed JSON: {e.msg}", f"line {e.lineno} column {e.colno}") from None
    else:
        doc = text
    err = jsonschema.exceptions.best_match(_validator().iter_errors(doc)) if validate else None
    if err is not None:
        raise ProgramError(f"schema violation: {err.message}", _path(err.absolute_path) or "document")
    return _Builder(doc).build()


def load_program(path) -> Program:
    with open(path, encoding="utf-8") as fp:
        return parse_program(fp.read())


class _Builder:
    def __init__(self, doc: dict) -> None:
        self.doc = doc
        self.sites: set[str] = set()
        self.class_names: set[str] = set()
        self.all_fields: set[str] = set()
        self.arity: dict[str, set[int]] = {}

    def build(self) -> Program:
        doc = self.doc
        raw_classes = doc["classes"]
        for i, c in enumerate(raw_classes):
            name = c["name"]
            if name in self.class_names:
                raise ProgramError(f"duplicate class {name}", f"classes[{i}]")
            if name in RESERVED:
                raise ProgramError(f"reserved class name {name}", f"classes[{i}]")
            self.class_names.add(name)
        parents = {c["name"]: c.get("parent") for c in raw_classes}
        for i, c in enumerate(raw_classes):
            p = c.get("parent")
            if p is not None and p not in self.class_names:
                raise ProgramError(f"unknown parent class {p}", f"classes[{i}].parent")
            seen, cur = {c["name"]}, p
            while cur is not None:
                if cur in seen:
                    raise ProgramError(f"inheritance cycle through {c['name']}", f"classes[{i}]")
                seen.add(cur)
                cur = parents[cur]
        for c in raw_classes:
            self.all_fields.update(c.get("fields", []))
            for mname, m in c.get("methods", {}).items():
                self.arity.setdefault(mname, set()).add(len(m.get("params", [])))

        # field layouts only, for redeclaration checks
        skeleton = {c["name"]: ClassDecl(c["name"], c.get("parent"), tuple(c.get("fields", [])))
                    for c in raw_classes}
        shell = Program(skeleton, {}, ("", ""))
        for i, c in enumerate(raw_classes):
            where = f"classes[{i}]"
            own = c.get("fields", [])
            if len(set(own)) != len(own):
                raise ProgramError("duplicate field", f"{where}.fields")
            if c.get("parent") is not None:
                inherited = {f for f, _ in shell.layout(c["parent"])}
                clash = inherited & set(own)
                if clash:
                    raise ProgramError(f"field {sorted(clash)[0]} redeclared", f"{where}.fields")

        classes: dict[str, ClassDecl] = {}
        for i, c in enumerate(raw_classes):
            where = f"classes[{i}]"
            methods = {}
            for mname, m in c.get("methods", {}).items():
                mwhere = f"{where}.methods.{mname}"
                for anc in self._ancestors(c["name"])[1:]:
                    inherited = self.doc_methods(anc).get(mname)
                    if inherited is not None and len(inherited.get("params", [])) != len(m.get("params", [])):
                        raise ProgramError(f"override of {mname} changes arity", mwhere)
                methods[mname] = self.method(c["name"], mname, m, mwhere)
            classes[c["name"]] = ClassDecl(c["name"], c.get("parent"), tuple(c.get("fields", [])), methods)

        globals_: dict[str, Expr] = {}
        for g, init in doc["globals"].items():
            globals_[g] = Null() if init is None else self.global_init(init, f"globals.{g}")

        entry = (doc["entry"]["class"], doc["entry"]["method"])
        prog = Program(classes, globals_, entry)
        if entry[0] not in classes:
            raise ProgramError(f"unknown entry class {entry[0]}", "entry.class")
        m = prog.resolve(*entry)
        if m is None:
            raise ProgramError(f"entry method {entry[1]} not found in {entry[0]}", "entry.method")
        if m.params:
            raise ProgramError("entry method must take no parameters", "entry.method")
        return prog

    def global_init(self, e: dict, where: str) -> Expr:
        kind = e["expr"]
        if kind == "null":
            return Null()
        if kind != "new":
            raise ProgramError("global initializers must be new or null", where)
        if e["class"] not in self.class_names:
            raise ProgramError(f"unknown class {e['class']}", where)
        init = tuple((f, self.global_init(v, f"{where}.init.{f}")) for f, v in e.get("init", {}).items())
        self._check_init_fields(e["class"], init, where)
        return New(e["class"], e.get("site"), init)

    def _check_init_fields(self, cls: str, init, where: str) -> None:
        layout = {f for c in self._ancestors(cls) for f in self.doc_fields(c)}
        for f, _ in init:
            if f not in layout:
                raise ProgramError(f"class {cls} has no field {f}", f"{where}.init")

    def _ancestors(self, cls: str) -> list[str]:
        parents = {c["name"]: c.get("parent") for c in self.doc["classes"]}
        out, cur = [], cls
        while cur is not None:
            out.append(cur)
            cur = parents[cur]
        return out

    def _doc_class(self, cls: str) -> dict:
        for c in self.doc["classes"]:
            if c["name"] == cls:
                return c
        return {}

    def doc_fields(self, cls: str) -> list[str]:
        return self._doc_class(cls).get("fields", [])

    def doc_methods(self, cls: str) -> dict:
        return self._doc_class(cls).get("methods", {})

    # methods ---------------------------------------------------------------

    def method(self, owner: str, name: str, m: dict, where: str) -> Method:
        params = tuple(m.get("params", []))
        locals_ = tuple(m.get("locals", []))
        names = list(params) + list(locals_)
        if len(set(names)) != len(names):
            raise ProgramError("parameter and local names must be unique", where)
        self.scope = (owner, name, set(params), set(locals_))
        self.calls = 0
        body = tuple(self.stmt(s, f"{where}.body[{k}]") for k, s in enumerate(m.get("body", [])))
        ret = m.get("return")
        return Method(owner, name, params, locals_, body,
                      None if ret is None else self.expr(ret, f"{where}.return"))

    def _array_ref(self, e: dict, where: str) -> Expr:
        x = self.expr(e, where)
        if not isinstance(x, (Local, Global, Field, Param)):
            raise ProgramError("array operand must be a local, global, field or parameter", where)
        return x

    def stmt(self, s: dict, where: str) -> Stmt:
        op = s["op"]
        if op == "assign_local":
            self._local(s["name"], where)
            return AssignLocal(s["name"], self.expr(s["value"], f"{where}.value"))
        if op == "assign_global":
            self._global(s["name"], where)
            return AssignGlobal(s["name"], self.expr(s["value"], f"{where}.value"))
        if op == "assign_field":
            self._field(s["name"], where)
            return AssignField(self.expr(s["of"], f"{where}.of"), s["name"],
                               self.expr(s["value"], f"{where}.value"))
        if op == "array_create":
            site, kind = s["site"], s["kind"]
            if site in self.sites:
                raise ProgramError(f"duplicate allocation site {site}", where)
            self.sites.add(site)
            if len(s["args"]) != ARRAY_KINDS[kind]:
                raise ProgramError(f"{kind} arrays take {ARRAY_KINDS[kind]} argument(s)", f"{where}.args")
            into = self.expr(s["into"], f"{where}.into")
            if not isinstance(into, (Local, Global, Field)):
                raise ProgramError("array_create target must be a local, global or field", f"{where}.into")
            return ArrayCreate(site, kind, tuple(s["args"]), into)
        if op in ("extend", "prepend"):
            cls = ArrayExtend if op == "extend" else ArrayPrepend
            return cls(self._array_ref(s["array"], f"{where}.array"), self.expr(s["value"], f"{where}.value"))
        if op == "awrite":
            return ArrayWrite(self._array_ref(s["array"], f"{where}.array"), s["index"],
                              self.expr(s["value"], f"{where}.value"))
        if op == "remove_last":
            return ArrayRemoveLast(self._array_ref(s["array"], f"{where}.array"))
        if op == "call":
            mname = s["method"]
            args = tuple(self.expr(a, f"{where}.args[{k}]") for k, a in enumerate(s.get("args", [])))
            if mname not in self.arity:
                raise ProgramError(f"call to undeclared method {mname}", where)
            if self.arity[mname] != {len(args)}:
                raise ProgramError(f"{mname} called with {len(args)} argument(s)", where)
            result = s.get("result")
            if result is not None:
                self._local(result, f"{where}.result")
            owner, name, _, _ = self.scope
            site = s.get("site") or f"{owner}.{name}@{self.calls}"
            self.calls += 1
            return Call(self.expr(s["receiver"], f"{where}.receiver"), mname, args, result, site)
        if op == "return":
            v = s.get("value")
            return Return(None if v is None else self.expr(v, f"{where}.value"))
        raise ProgramError(f"unknown statement {op}", where)  # pragma: no cover - schema guards

    def _local(self, name: str, where: str) -> None:
        if name not in self.scope[3]:
            raise ProgramError(f"undeclared local {name}", where)

    def _global(self, name: str, where: str) -> None:
        if name not in self.doc["globals"]:
            raise ProgramError(f"undeclared global {name}", where)

    def _field(self, name: str, where: str) -> None:
        if name not in self.all_fields:
            raise ProgramError(f"undeclared field {name}", where)

    def expr(self, e: dict, where: str) -> Expr:
        kind = e["expr"]
        if kind == "new":
            cls = e["class"]
            if cls not in self.class_names:
                raise ProgramError(f"unknown class {cls}", where)
            init = tuple((f, self.expr(v, f"{where}.init.{f}")) for f, v in e.get("init", {}).items())
            self._check_init_fields(cls, init, where)
            return New(cls, e.get("site"), init)
        if kind == "null":
            return Null()
        if kind == "self":
            return Self()
        if kind == "local":
            self._local(e["name"], where)
            return Local(e["name"])
        if kind == "global":
            self._global(e["name"], where)
            return Global(e["name"])
        if kind == "param":
            if e["name"] not in self.scope[2]:
                raise ProgramError(f"undeclared parameter {e['name']}", where)
            return Param(e["name"])
        if kind == "field":
            self._field(e["name"], where)
            return Field(self.expr(e["of"], f"{where}.of"), e["name"])
        if kind == "aread":
            return ARead(self._array_ref(e["array"], f"{where}.array"), e["index"])
        raise ProgramError(f"unknown expression {kind}", where)  # pragma: no cover


# serialization -------------------------------------------------------------

def expr_doc(e: Expr) -> dict:
    if isinstance(e, New):
        d: dict[str, Any] = {"expr": "new", "class": e.cls}
        if e.site is not None:
            d["site"] = e.site
        if e.init:
            d["init"] = {f: expr_doc(v) for f, v in e.init}
        return d
    if isinstance(e, Null):
        return {"expr": "null"}
    if isinstance(e, Self):
        return {"expr": "self"}
    if isinstance(e, Local):
        return {"expr": "local", "name": e.name}
    if isinstance(e, Global):
        return {"expr": "global", "name": e.name}
    if isinstance(e, Param):
        return {"expr": "param", "name": e.name}
    if isinstance(e, Field):
        return {"expr": "field", "of": expr_doc(e.of), "name": e.name}
    if isinstance(e, ARead):
        return {"expr": "aread", "array": expr_doc(e.array), "index": e.index}
    raise TypeError(e)


def stmt_doc(s: Stmt) -> dict:
    if isinstance(s, AssignLocal):
        return {"op": "assign_local", "name": s.name, "value": expr_doc(s.value)}
    if isinstance(s, AssignGlobal):
        return {"op": "assign_global", "name": s.name, "value": expr_doc(s.value)}
    if isinstance(s, AssignField):
        return {"op": "assign_field", "of": expr_doc(s.of), "name": s.name, "value": expr_doc(s.value)}
    if isinstance(s, ArrayCreate):
        return {"op": "array_create", "site": s.site, "kind": s.kind, "args": list(s.args),
                "into": expr_doc(s.into)}
    if isinstance(s, ArrayExtend):
        return {"op": "extend", "array": expr_doc(s.array), "value": expr_doc(s.value)}
    if isinstance(s, ArrayPrepend):
        return {"op": "prepend", "array": expr_doc(s.array), "value": expr_doc(s.value)}
    if isinstance(s, ArrayWrite):
        return {"op": "awrite", "array": expr_doc(s.array), "index": s.index, "value": expr_doc(s.value)}
    if isinstance(s, ArrayRemoveLast):
        return {"op": "remove_last", "array": expr_doc(s.array)}
    if isinstance(s, Call):
        return {"op": "call", "receiver": expr_doc(s.receiver), "method": s.method,
                "args": [expr_doc(a) for a in s.args], "result": s.result, "site": s.site}
    if isinstance(s, Return):
        return {"op": "return", "value": None if s.value is None else expr_doc(s.value)}
    raise TypeError(s)


def to_document(p: Program) -> dict:
    classes = []
    for c in p.classes.values():
        methods = {}
        for m in c.methods.values():
            methods[m.name] = {
                "params": list(m.params),
                "locals": list(m.locals),
                "body": [stmt_doc(s) for s in m.body],
                "return": None if m.return_expr is None else expr_doc(m.return_expr),
            }
        classes.append({"name": c.name, "parent": c.parent, "fields": list(c.fields), "methods": methods})
    globals_: dict[str, Optional[dict]] = {
        g: None if isinstance(e, Null) else expr_doc(e) for g, e in p.globals.items()
    }
    return {"version": SCHEMA_VERSION, "classes": classes, "globals": globals_,
            "entry": {"class": p.entry[0], "method": p.entry[1]}}


def dumps(p: Program) -> str:
    return json.dumps(to_document(p), indent=1, sort_keys=False) + "\n"
