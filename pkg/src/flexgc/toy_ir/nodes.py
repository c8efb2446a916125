"""Program representation: classes, methods, statements, expressions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union


# expressions ---------------------------------------------------------------

@dataclass(frozen=True)
class New:
    cls: str
    site: Optional[str] = None
    init: tuple[tuple[str, "Expr"], ...] = ()


@dataclass(frozen=True)
class Null:
    pass


@dataclass(frozen=True)
class Local:
    name: str


@dataclass(frozen=True)
class Global:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Self:
    pass


@dataclass(frozen=True)
class Field:
    of: "Expr"
    name: str


@dataclass(frozen=True)
class ARead:
    array: "Expr"
    index: int


Expr = Union[New, Null, Local, Global, Param, Self, Field, ARead]


# statements ----------------------------------------------------------------

@dataclass(frozen=True)
class AssignLocal:
    name: str
    value: Expr


@dataclass(frozen=True)
class AssignGlobal:
    name: str
    value: Expr


@dataclass(frozen=True)
class AssignField:
    of: Expr
    name: str
    value: Expr


ARRAY_KINDS = {"fast": 1, "indexed": 2, "ring": 2, "calloc": 1, "zeroed": 1}


@dataclass(frozen=True)
class ArrayCreate:
    site: str
    kind: str
    args: tuple[int, ...]
    into: Expr  # Local, Global or Field


@dataclass(frozen=True)
class ArrayExtend:
    array: Expr
    value: Expr


@dataclass(frozen=True)
class ArrayPrepend:
    array: Expr
    value: Expr


@dataclass(frozen=True)
class ArrayWrite:
    array: Expr
    index: int
    value: Expr


@dataclass(frozen=True)
class ArrayRemoveLast:
    array: Expr


@dataclass(frozen=True)
class Call:
    receiver: Expr
    method: str
    args: tuple[Expr, ...]
    result: Optional[str]
    site: str


@dataclass(frozen=True)
class Return:
    value: Optional[Expr]


Stmt = Union[AssignLocal, AssignGlobal, AssignField, ArrayCreate, ArrayExtend,
             ArrayPrepend, ArrayWrite, ArrayRemoveLast, Call, Return]


# declarations --------------------------------------------------------------

@dataclass(frozen=True)
class Method:
    owner: str
    name: str
    params: tuple[str, ...] = ()
    locals: tuple[str, ...] = ()
    body: tuple[Stmt, ...] = ()
    return_expr: Optional[Expr] = None

    @property
    def id(self) -> str:
        return f"{self.owner}.{self.name}"

    def param_index(self, name: str) -> int:
        """Declared parameters start at 1; index 0 is the receiver."""
        return self.params.index(name) + 1


@dataclass(frozen=True)
class ClassDecl:
    name: str
    parent: Optional[str] = None
    fields: tuple[str, ...] = ()
    methods: dict[str, Method] = field(default_factory=dict)


class Location(NamedTuple):
    """One static fact holder.  ``scope`` is a method id, class name or ''."""

    kind: str  # local | global | field | param | return | array
    scope: str
    name: str

    def __str__(self) -> str:
        if self.kind == "global":
            return f"global:{self.name}"
        if self.kind == "array":
            return f"array:{self.name}"
        if self.kind == "return":
            return f"return:{self.scope}"
        if self.kind == "param":
            return f"param:{self.scope}#{self.name}"
        sep = "." if self.kind == "field" else ":"
        return f"{self.kind}:{self.scope}{sep}{self.name}"

    @classmethod
    def local(cls, method_id: str, name: str) -> "Location":
        return cls("local", method_id, name)

    @classmethod
    def global_(cls, name: str) -> "Location":
        return cls("global", "", name)

    @classmethod
    def field(cls, owner: str, name: str) -> "Location":
        return cls("field", owner, name)

    @classmethod
    def param(cls, method_id: str, index: int) -> "Location":
        return cls("param", method_id, str(index))

    @classmethod
    def ret(cls, method_id: str) -> "Location":
        return cls("return", method_id, "")

    @classmethod
    def array(cls, site: str) -> "Location":
        return cls("array", "", site)


@dataclass(frozen=True)
class Program:
    classes: dict[str, ClassDecl]
    globals: dict[str, Expr]
    entry: tuple[str, str]

    def ancestors(self, cls: str) -> list[str]:
        """``cls`` itself first, then parents up to the root."""
        out = []
        c: Optional[str] = cls
        while c is not None:
            out.append(c)
            c = self.classes[c].parent
        return out

    def descendants(self, cls: str) -> list[str]:
        return [c for c in self.classes if c != cls and cls in self.ancestors(c)]

    def resolve(self, cls: str, mname: str) -> Optional[Method]:
        for c in self.ancestors(cls):
            m = self.classes[c].methods.get(mname)
            if m is not None:
                return m
        return None

    def field_owner(self, cls: str, fname: str) -> Optional[str]:
        for c in self.ancestors(cls):
            if fname in self.classes[c].fields:
                return c
        return None

    def layout(self, cls: str) -> list[tuple[str, str]]:
        """``(field, declaring class)`` pairs, root fields first."""
        out = []
        for c in reversed(self.ancestors(cls)):
            out.extend((f, c) for f in self.classes[c].fields)
        return out

    def methods(self) -> list[Method]:
        return [m for c in self.classes.values() for m in c.methods.values()]

    def method(self, method_id: str) -> Method:
        owner, _, name = method_id.rpartition(".")
        return self.classes[owner].methods[name]

    @property
    def entry_method(self) -> Method:
        m = self.resolve(*self.entry)
        assert m is not None
        return m
