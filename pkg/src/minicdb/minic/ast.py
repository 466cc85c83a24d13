"""MiniC abstract syntax.

Nodes are plain mutable dataclasses; every expression and statement
carries the coordinate of its first token.  The type checker annotates
expressions in place (``ctype``, resolved symbols, member records), so a
single tree flows through parsing, checking, planning, and code
generation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..symtab import Coordinate


# --- type syntax -----------------------------------------------------------

@dataclass
class TypeExpr:
    coord: Coordinate


@dataclass
class NamedType(TypeExpr):
    name: str                 # 'int', 'char', ... or a typedef name
    is_typedef: bool = False


@dataclass
class RecordSpec(TypeExpr):
    kind: str                 # 'struct' | 'union'
    tag: Optional[str]
    members: Optional[list["Decl"]]   # None: reference to a named tag


@dataclass
class EnumSpec(TypeExpr):
    tag: Optional[str]
    enumerators: Optional[list[tuple[str, Optional["Expr"], Coordinate]]]


@dataclass
class PtrType(TypeExpr):
    inner: TypeExpr


@dataclass
class ArrType(TypeExpr):
    inner: TypeExpr
    size: Optional["Expr"]    # None for [] in parameters


@dataclass
class QualType(TypeExpr):
    qual: str                 # 'const' | 'volatile'
    inner: TypeExpr


# --- declarations ----------------------------------------------------------

@dataclass
class Decl:
    coord: Coordinate         # coordinate of the declared name
    name: Optional[str]
    type: TypeExpr
    storage: str = ""         # '', 'static', 'typedef'
    init: Optional["Expr"] = None
    bitsize: Optional["Expr"] = None
    sym: object = None        # sema: the frontend symbol


@dataclass
class Param:
    coord: Coordinate
    name: Optional[str]
    type: TypeExpr
    sym: object = None


@dataclass
class FuncDef:
    coord: Coordinate         # coordinate of the function name
    name: str
    ret: TypeExpr
    params: list[Param]
    body: Optional["Block"]   # None for a prototype
    static: bool = False
    sym: object = None


@dataclass
class Unit:
    file: str
    decls: list[object] = field(default_factory=list)  # Decl | FuncDef | TagDecl


@dataclass
class TagDecl:
    coord: Coordinate
    spec: TypeExpr            # bare 'struct x {...};' or 'enum {...};'


# --- statements -------------------------------------------------------------

@dataclass
class Stmt:
    coord: Coordinate


@dataclass
class Block(Stmt):
    stmts: list[object] = field(default_factory=list)
    scope: object = None      # sema: Scope


@dataclass
class DeclStmt(Stmt):
    decls: list[Decl] = field(default_factory=list)


@dataclass
class ExprStmt(Stmt):
    expr: "Expr" = None


@dataclass
class EmptyStmt(Stmt):
    pass


@dataclass
class IfStmt(Stmt):
    cond: "Expr" = None
    then: Stmt = None
    els: Optional[Stmt] = None


@dataclass
class WhileStmt(Stmt):
    cond: "Expr" = None
    body: Stmt = None


@dataclass
class ForStmt(Stmt):
    init: Optional["Expr"] = None
    cond: Optional["Expr"] = None
    step: Optional["Expr"] = None
    body: Stmt = None


@dataclass
class ReturnStmt(Stmt):
    expr: Optional["Expr"] = None


# --- expressions ------------------------------------------------------------

@dataclass
class Expr:
    coord: Coordinate
    ctype: object = field(default=None, compare=False)   # sema: CType
    lvalue: bool = field(default=False, compare=False)


@dataclass
class IntLit(Expr):
    value: int = 0


@dataclass
class FloatLit(Expr):
    value: float = 0.0
    single: bool = False


@dataclass
class StrLit(Expr):
    data: bytes = b""


@dataclass
class NameRef(Expr):
    name: str = ""
    sym: object = None        # sema: symbol or builtin marker


@dataclass
class Unary(Expr):
    op: str = ""              # '-', '!', '*', '&', '++', '--'
    operand: Expr = None


@dataclass
class Postfix(Expr):
    op: str = ""              # '++', '--'
    operand: Expr = None


@dataclass
class Binary(Expr):
    op: str = ""
    left: Expr = None
    right: Expr = None
    arith: str = field(default="", compare=False)  # sema: 'int','uint','float','ptr','ptrdiff'


@dataclass
class Assign(Expr):
    op: str = "="             # '=', '+=', '-=', '*=', '/='
    target: Expr = None
    value: Expr = None


@dataclass
class Call(Expr):
    name: str = ""
    args: list[Expr] = field(default_factory=list)
    sym: object = None        # sema: function symbol, or 'builtin:<name>'


@dataclass
class Index(Expr):
    base: Expr = None
    index: Expr = None


@dataclass
class Member(Expr):
    base: Expr = None
    name: str = ""
    arrow: bool = False
    rec: object = None        # sema: record CType
    fld: object = None        # sema: field record
