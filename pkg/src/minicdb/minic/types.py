"""Semantic types and data layout for MiniC.

Layout follows ILP32 conventions: char 1, short 2, int/unsigned/float and
pointers 4, double 8; record members sit at offsets aligned to their own
alignment and bit fields pack least-significant-bit first into storage
units of their declared type.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


class CType:
    size: int = 0
    align: int = 1

    def is_numeric(self) -> bool:
        return False

    def is_integer(self) -> bool:
        return False

    def is_scalar(self) -> bool:
        return self.is_numeric() or isinstance(self, PtrCT)


@dataclass(frozen=True)
class PrimCT(CType):
    kind: str   # 'void','char','short','int','unsigned','float','double'
    size: int
    align: int

    def is_numeric(self) -> bool:
        return self.kind != "void"

    def is_integer(self) -> bool:
        return self.kind in ("char", "short", "int", "unsigned")


VOID = PrimCT("void", 0, 1)
CHAR = PrimCT("char", 1, 1)
SHORT = PrimCT("short", 2, 2)
INT = PrimCT("int", 4, 4)
UNSIGNED = PrimCT("unsigned", 4, 4)
FLOAT = PrimCT("float", 4, 4)
DOUBLE = PrimCT("double", 8, 8)

_PRIMS = {p.kind: p for p in (VOID, CHAR, SHORT, INT, UNSIGNED, FLOAT, DOUBLE)}


def prim(kind: str) -> PrimCT:
    return _PRIMS[kind]


@dataclass(frozen=True)
class PtrCT(CType):
    ref: CType
    size: int = 4
    align: int = 4


@dataclass(frozen=True)
class ArrayCT(CType):
    elem: CType
    nelems: int

    @property
    def size(self) -> int:  # type: ignore[override]
        return self.elem.size * self.nelems

    @property
    def align(self) -> int:  # type: ignore[override]
        return self.elem.align


@dataclass
class MemberCT:
    name: str
    ctype: CType
    offset: int = 0
    bitsize: int = 0
    lsb: int = 0


@dataclass(eq=False)
class RecordCT(CType):
    """struct or union; completed in place when its member list is seen."""

    kind: str                      # 'struct' | 'union'
    tag: Optional[str]
    members: list[MemberCT] = field(default_factory=list)
    size: int = 0
    align: int = 1
    complete: bool = False

    def member(self, name: str) -> MemberCT | None:
        for m in self.members:
            if m.name == name:
                return m
        return None


@dataclass(eq=False)
class EnumCT(CType):
    tag: Optional[str]
    items: list[tuple[str, int]] = field(default_factory=list)
    size: int = 4
    align: int = 4

    def is_numeric(self) -> bool:
        return True

    def is_integer(self) -> bool:
        return True


@dataclass(frozen=True)
class FuncCT(CType):
    ret: CType
    params: tuple[CType, ...]
    size: int = 0
    align: int = 1


@dataclass(frozen=True)
class QualCT(CType):
    qual: str          # 'const' | 'volatile'
    ref: CType

    @property
    def size(self) -> int:  # type: ignore[override]
        return self.ref.size

    @property
    def align(self) -> int:  # type: ignore[override]
        return self.ref.align

    def is_numeric(self) -> bool:
        return self.ref.is_numeric()

    def is_integer(self) -> bool:
        return self.ref.is_integer()


def unqual(t: CType) -> CType:
    while isinstance(t, QualCT):
        t = t.ref
    return t


def decay(t: CType) -> CType:
    """Arrays decay to pointers to their element type in expressions."""
    u = unqual(t)
    if isinstance(u, ArrayCT):
        return PtrCT(u.elem)
    return t


def is_void_ptr(t: CType) -> bool:
    u = unqual(t)
    return isinstance(u, PtrCT) and unqual(u.ref) is VOID


def same_type(a: CType, b: CType) -> bool:
    """Structural equality; records and enums compare by identity."""
    a, b = unqual(a), unqual(b)
    if isinstance(a, PrimCT) and isinstance(b, PrimCT):
        return a.kind == b.kind
    if isinstance(a, PtrCT) and isinstance(b, PtrCT):
        return same_type(a.ref, b.ref)
    if isinstance(a, ArrayCT) and isinstance(b, ArrayCT):
        return a.nelems == b.nelems and same_type(a.elem, b.elem)
    if isinstance(a, FuncCT) and isinstance(b, FuncCT):
        return (len(a.params) == len(b.params)
                and same_type(a.ret, b.ret)
                and all(same_type(x, y) for x, y in zip(a.params, b.params)))
    return a is b


def complete_record(rec: RecordCT, members: list[MemberCT]) -> None:
    """Assign offsets, pack bit fields, and set size/align in place."""
    bit_offset = 0
    align = 1
    for m in members:
        mt = unqual(m.ctype)
        malign = max(1, mt.align)
        align = max(align, malign)
        if rec.kind == "union":
            m.offset = 0
            if m.bitsize:
                m.lsb = 0
            continue
        if m.bitsize:
            unit_bits = 8 * mt.size
            if bit_offset % unit_bits + m.bitsize > unit_bits:
                bit_offset += -bit_offset % unit_bits
            unit_index = bit_offset // unit_bits
            m.offset = unit_index * mt.size
            m.lsb = bit_offset - unit_index * unit_bits
            bit_offset += m.bitsize
        else:
            bit_offset += -bit_offset % (8 * malign)
            m.offset = bit_offset // 8
            bit_offset += 8 * mt.size
    if rec.kind == "union":
        size = max((unqual(m.ctype).size for m in members), default=0)
    else:
        size = (bit_offset + 7) // 8
    size += -size % align
    if size == 0:
        size = align
    rec.members = members
    rec.size = size
    rec.align = align
    rec.complete = True


def promote(t: CType) -> CType:
    """Integer promotion: char, short, and enums become int."""
    u = unqual(t)
    if isinstance(u, EnumCT):
        return INT
    if isinstance(u, PrimCT) and u.kind in ("char", "short"):
        return INT
    return u


def usual_arith(a: CType, b: CType) -> CType:
    """The common type of a binary arithmetic operation."""
    a, b = promote(a), promote(b)
    kinds = {a.kind if isinstance(a, PrimCT) else "int",
             b.kind if isinstance(b, PrimCT) else "int"}
    if "double" in kinds:
        return DOUBLE
    if "float" in kinds:
        return FLOAT
    if "unsigned" in kinds:
        return UNSIGNED
    return INT


def type_str(t: CType) -> str:
    u = t
    if isinstance(u, QualCT):
        return f"{u.qual} {type_str(u.ref)}"
    if isinstance(u, PrimCT):
        return u.kind
    if isinstance(u, PtrCT):
        return f"{type_str(u.ref)} *"
    if isinstance(u, ArrayCT):
        return f"{type_str(u.elem)}[{u.nelems}]"
    if isinstance(u, RecordCT):
        return f"{u.kind} {u.tag or '<anonymous>'}"
    if isinstance(u, EnumCT):
        return f"enum {u.tag or '<anonymous>'}"
    if isinstance(u, FuncCT):
        return f"{type_str(u.ret)}()"
    return "?"
