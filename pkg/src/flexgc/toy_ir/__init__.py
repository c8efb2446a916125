"""Minimal class-based IR, its document format and a reference interpreter."""

from .interp import Interpreter, RunEvent, RunTrace, interpret
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
)
from .parse import ProgramError, dumps, load_program, parse_program, to_document
from .randgen import random_document, random_program

__all__ = [
    "ARRAY_KINDS", "ARead", "ArrayCreate", "ArrayExtend", "ArrayPrepend", "ArrayRemoveLast",
    "ArrayWrite", "AssignField", "AssignGlobal", "AssignLocal", "Call", "ClassDecl", "Field",
    "Global", "Interpreter", "Local", "Location", "Method", "New", "Null", "Param", "Program",
    "ProgramError", "Return", "RunEvent", "RunTrace", "Self", "dumps", "interpret",
    "load_program", "parse_program", "random_document", "random_program", "to_document",
]
