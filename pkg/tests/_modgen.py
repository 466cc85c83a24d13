"""Random generator for valid symbol-table modules.

Builds modules bottom-up so every cross-item invariant holds by
construction; the result is re-checked with validate_module before it is
returned, so a generator bug cannot silently weaken the round-trip tests.
"""

from __future__ import annotations

import random

from minicdb.symtab import (
    ArrayType, ConstType, Coordinate, EnumConstSym, EnumItem, EnumType,
    FieldRec, FloatType, FunctionType, GlobalSym, IntType, Item, LocalSym,
    ParamSym, PointerType, SPoint, StaticSym, StructType, SymModule, Symbol,
    TypeNode, TypedefSym, UnionType, UnsignedType, VoidType, VolatileType,
    validate_module,
)

_NAME_CHARS = "abcdefghijklmnopqrstuvwxyz_"
_FANCY = ["total", "wörd", "巨大な名前", "x" * 80, "n0", "_tmp"]


def _name(rng: random.Random) -> str:
    if rng.random() < 0.1:
        return rng.choice(_FANCY) + str(rng.randrange(100))
    return "".join(rng.choice(_NAME_CHARS) for _ in range(rng.randint(1, 10)))


def _coord(rng: random.Random, file: str) -> Coordinate:
    return Coordinate(file, rng.randint(1, 200), rng.randint(1, 5000))


class _Builder:
    def __init__(self, rng: random.Random, file: str, uname: int):
        self.rng = rng
        self.file = file
        self.uname = uname
        self.items: list[Item] = []
        self.type_uids: list[int] = []
        self.next_uid = 1

    def add(self, node) -> int:
        uid = self.next_uid
        self.next_uid += 1
        self.items.append(Item(uid, node))
        return uid

    def add_type(self, node: TypeNode) -> int:
        uid = self.add(node)
        self.type_uids.append(uid)
        return uid

    def any_type(self) -> int:
        return self.rng.choice(self.type_uids)

    def type_of(self, uid: int) -> TypeNode:
        return self.items[uid - 1].node  # uids are dense here


def _make_record(b: _Builder, union: bool) -> TypeNode:
    rng = b.rng
    fields = []
    offset = 0
    align = 1
    for _ in range(rng.randint(0, 5)):
        ft_uid = b.any_type()
        ft = b.type_of(ft_uid)
        if ft.size == 0:
            continue
        falign = max(1, ft.align)
        align = max(align, falign)
        if union:
            foffset = 0
        else:
            offset += (-offset) % falign
            foffset = offset
            offset += ft.size
        bitsize = lsb = 0
        if not union and isinstance(ft, (IntType, UnsignedType)) and rng.random() < 0.3:
            bitsize = rng.randint(1, 8 * ft.size)
            lsb = rng.randint(0, 8 * ft.size - bitsize)
        fields.append(FieldRec(_name(rng) + str(len(fields)), ft_uid, foffset, bitsize, lsb))
    if union:
        size = max((b.type_of(f.type).size for f in fields), default=0)
    else:
        size = offset
    size += (-size) % align
    if size == 0:
        size = align
    cls = UnionType if union else StructType
    return cls(size, align, _name(rng), tuple(fields))


def _add_types(b: _Builder) -> None:
    rng = b.rng
    b.add_type(IntType(4, 4))
    b.add_type(IntType(1, 1))
    b.add_type(VoidType(0, 1))
    for _ in range(rng.randint(0, 12)):
        kind = rng.randrange(9)
        if kind == 0:
            b.add_type(UnsignedType(4, 4))
        elif kind == 1:
            b.add_type(FloatType(rng.choice([4, 8]), rng.choice([4, 8])))
        elif kind == 2:
            b.add_type(PointerType(4, 4, b.any_type()))
        elif kind == 3:
            elem_uid = b.any_type()
            elem = b.type_of(elem_uid)
            n = rng.randint(0, 16)
            b.add_type(ArrayType(n * elem.size, max(1, elem.align), elem_uid, n))
        elif kind == 4:
            names = set()
            ids = []
            base = rng.randint(-5, 5)
            for i in range(rng.randint(1, 6)):
                nm = _name(rng)
                if nm in names:
                    continue
                names.add(nm)
                ids.append(EnumItem(nm, base + i))
            b.add_type(EnumType(4, 4, _name(rng), tuple(ids)))
        elif kind == 5:
            b.add_type(_make_record(b, union=False))
        elif kind == 6:
            b.add_type(_make_record(b, union=True))
        elif kind == 7:
            formals = tuple(b.any_type() for _ in range(rng.randint(0, 4)))
            b.add_type(FunctionType(0, 1, b.any_type(), formals))
        else:
            ref_uid = b.any_type()
            ref = b.type_of(ref_uid)
            cls = ConstType if rng.random() < 0.5 else VolatileType
            b.add_type(cls(ref.size, max(1, ref.align), ref_uid))


def _add_symbols(b: _Builder) -> tuple[int, list[int]]:
    """File-scope chain plus nested function scopes; returns (globals, all
    symbol uids)."""
    rng = b.rng
    file_tail = 0
    globals_tail = 0
    index = 0
    sym_uids: list[int] = []

    def common(kind_cls, *extra) -> int:
        nonlocal file_tail
        uid = b.next_uid  # symbol uid attribute must equal the item uid
        sym = kind_cls(_name(rng), uid, b.uname, _coord(rng, b.file),
                       b.any_type(), file_tail, *extra)
        got = b.add(sym)
        assert got == uid
        sym_uids.append(uid)
        file_tail = uid
        return uid

    for _ in range(rng.randint(0, 8)):
        choice = rng.randrange(4)
        if choice == 0:
            uid = common(StaticSym, index)
            index += 1
            globals_tail = uid
        elif choice == 1:
            uid = common(GlobalSym, index)
            index += 1
            globals_tail = uid
        elif choice == 2:
            common(TypedefSym)
        else:
            common(EnumConstSym, rng.randint(-100, 100))

    # A few function scopes hanging off the current file chain.
    for _ in range(rng.randint(0, 3)):
        inner_tail = file_tail
        offset = 20
        for _ in range(rng.randint(0, 4)):
            cls = ParamSym if rng.random() < 0.5 else LocalSym
            uid = b.next_uid
            sym = cls(_name(rng), uid, b.uname, _coord(rng, b.file),
                      b.any_type(), inner_tail, offset)
            b.add(sym)
            sym_uids.append(uid)
            inner_tail = uid
            offset += rng.choice([4, 8])
    return globals_tail, sym_uids


def random_module(rng: random.Random) -> SymModule:
    file = _name(rng) + ".c"
    uname = rng.randint(1, 0xFFFFFFFF)
    b = _Builder(rng, file, uname)
    _add_types(b)
    globals_tail, sym_uids = _add_symbols(b)

    spoints = []
    used = set()
    for _ in range(rng.randint(0, 20)):
        c = _coord(rng, file)
        if (c.x, c.y) in used:
            continue
        used.add((c.x, c.y))
        tail = rng.choice(sym_uids) if sym_uids and rng.random() < 0.8 else 0
        spoints.append(SPoint(c, tail))

    nuids = b.next_uid - 1
    if rng.random() < 0.2:
        nuids += rng.randint(1, 5)  # uids may be sparse
    m = SymModule(file, uname, nuids, tuple(b.items), globals_tail, tuple(spoints))
    validate_module(m)
    return m
