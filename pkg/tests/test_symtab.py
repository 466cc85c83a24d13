"""Symbol-table model: construction, validation, and visibility queries."""

from __future__ import annotations

import random

import pytest

from minicdb.symtab import (
    ArrayType, ConstructionError, Coordinate, EnumConstSym, EnumItem, EnumType,
    FieldRec, FloatType, FunctionType, GlobalSym, IntType, Item, LocalSym,
    ParamSym, PointerType, SPoint, StaticSym, StructType, SymModule,
    TypedefSym, UnionType, UnsignedType, ValidationError, VoidType, WILDCARD,
    find_spoints, lookup_name, validate_module, visible_chain,
)

from _modgen import random_module


def _coord(y, x=1, file="wf.c"):
    return Coordinate(file, x, y)


def wf_like_module() -> SymModule:
    """Hand-built unit shaped like the word-frequency example: functions
    isletter, getword, tprint, main and a file-scope static ``words``,
    declared in that order, with getword's locals hanging off the file
    chain after ``words``."""
    items = []

    def add(node):
        items.append(Item(node.uid if hasattr(node, "uid") else len(items) + 1, node))

    int_t = IntType(4, 4)          # uid 1
    char_t = IntType(1, 1)         # uid 2
    charp_t = PointerType(4, 4, 2)  # uid 3
    fn_t = FunctionType(0, 1, 1, (1,))   # uid 4: int(int)
    nodep_t = PointerType(4, 4, 1)  # uid 5: stand-in pointer type
    items = [
        Item(1, int_t), Item(2, char_t), Item(3, charp_t), Item(4, fn_t),
        Item(5, nodep_t),
    ]
    u = 0x49499895
    isletter = StaticSym("isletter", 6, u, _coord(1), 4, 0, 4)
    getword = StaticSym("getword", 7, u, _coord(2), 4, 6, 3)
    tprint = GlobalSym("tprint", 8, u, _coord(3), 4, 7, 2)
    main = GlobalSym("main", 9, u, _coord(4), 4, 8, 1)
    words = StaticSym("words", 10, u, _coord(5), 5, 9, 0)
    buf = ParamSym("buf", 11, u, _coord(7, 25), 3, 10, 20)
    s = LocalSym("s", 12, u, _coord(8, 11), 3, 11, 24)
    c = LocalSym("c", 13, u, _coord(9, 9), 1, 12, 28)
    for sym in (isletter, getword, tprint, main, words, buf, s, c):
        items.append(Item(sym.uid, sym))
    spoints = (
        SPoint(_coord(7, 30), 11),   # entry: params bound
        SPoint(_coord(10, 12), 13),  # after both locals
        SPoint(_coord(11, 9), 13),
    )
    m = SymModule("wf.c", u, 13, tuple(items), 10, spoints)
    validate_module(m)
    return m


class TestConstruction:
    def test_enum_color(self):
        t = EnumType(4, 4, "color",
                     (EnumItem("RED", 1), EnumItem("GREEN", 2), EnumItem("BLUE", 3)))
        assert t.size == 4 and t.align == 4
        assert [e.id for e in t.ids] == ["RED", "GREEN", "BLUE"]
        assert [e.value for e in t.ids] == [1, 2, 3]

    def test_int_sizes(self):
        assert IntType(4, 4).size == 4
        assert IntType(1, 1).align == 1  # char

    def test_void(self):
        assert VoidType(0, 1).size == 0
        with pytest.raises(ConstructionError):
            VoidType(4, 1)

    def test_arity_mismatch(self):
        with pytest.raises(TypeError):
            PointerType(4, 4)  # missing referent
        with pytest.raises(TypeError):
            IntType(4, 4, 9)

    def test_bad_values(self):
        with pytest.raises(ConstructionError):
            IntType(-1, 4)
        with pytest.raises(ConstructionError):
            IntType(4, 0)
        with pytest.raises(ConstructionError):
            EnumType(4, 4, "e", (EnumItem("A", 1), EnumItem("A", 2)))
        with pytest.raises(ConstructionError):
            FieldRec("f", 1, 0, 0, 3)  # lsb without bitsize
        with pytest.raises(ConstructionError):
            LocalSym("x", 0, 1, _coord(1), 1, 0, 8)  # uid 0 reserved

    def test_construction_is_pure(self):
        a = PointerType(4, 4, 2)
        b = PointerType(4, 4, 2)
        assert a == b and a is not b


class TestValidation:
    def test_duplicate_uid(self):
        items = (Item(1, IntType(4, 4)), Item(1, IntType(4, 4)))
        with pytest.raises(ValidationError, match="duplicate uid"):
            validate_module(SymModule("a.c", 1, 2, items, 0, ()))

    def test_uid_out_of_range(self):
        items = (Item(5, IntType(4, 4)),)
        with pytest.raises(ValidationError, match="out of range"):
            validate_module(SymModule("a.c", 1, 2, items, 0, ()))

    def test_dangling_type_reference(self):
        items = (Item(1, PointerType(4, 4, 9)),)
        with pytest.raises(ValidationError, match="dangling uid 9"):
            validate_module(SymModule("a.c", 1, 1, items, 0, ()))

    def test_dangling_uplink(self):
        items = (
            Item(1, IntType(4, 4)),
            Item(2, GlobalSym("g", 2, 1, _coord(1), 1, 7, 0)),
        )
        with pytest.raises(ValidationError, match="dangling uid 7"):
            validate_module(SymModule("a.c", 1, 2, items, 2, ()))

    def test_uplink_cycle(self):
        items = (
            Item(1, IntType(4, 4)),
            Item(2, GlobalSym("a", 2, 1, _coord(1), 1, 3, 0)),
            Item(3, GlobalSym("b", 3, 1, _coord(2), 1, 2, 1)),
        )
        with pytest.raises(ValidationError, match="cycle"):
            validate_module(SymModule("a.c", 1, 3, items, 2, ()))

    def test_globals_must_be_static_or_global(self):
        items = (
            Item(1, IntType(4, 4)),
            Item(2, TypedefSym("T", 2, 1, _coord(1), 1, 0)),
        )
        with pytest.raises(ValidationError, match="not a static or global"):
            validate_module(SymModule("a.c", 1, 2, items, 2, ()))

    def test_array_size_consistency(self):
        items = (Item(1, IntType(4, 4)), Item(2, ArrayType(12, 4, 1, 4)))
        with pytest.raises(ValidationError, match="size 12 != 4 x 4"):
            validate_module(SymModule("a.c", 1, 2, items, 0, ()))

    def test_struct_field_overflow(self):
        items = (
            Item(1, IntType(4, 4)),
            Item(2, StructType(4, 4, "s", (FieldRec("f", 1, 4, 0, 0),))),
        )
        with pytest.raises(ValidationError, match="overflows"):
            validate_module(SymModule("a.c", 1, 2, items, 0, ()))

    def test_bitfield_unit_overflow(self):
        items = (
            Item(1, IntType(1, 1)),
            Item(2, StructType(1, 1, "s", (FieldRec("f", 1, 0, 7, 3),))),
        )
        with pytest.raises(ValidationError, match="storage unit"):
            validate_module(SymModule("a.c", 1, 2, items, 0, ()))

    def test_spoint_wildcard_rejected(self):
        items = (Item(1, IntType(4, 4)),)
        sp = (SPoint(Coordinate("a.c", 0, 3), 0),)
        with pytest.raises(ValidationError, match="wildcard"):
            validate_module(SymModule("a.c", 1, 1, items, 0, sp))

    def test_symbol_item_uid_mismatch(self):
        items = (
            Item(1, IntType(4, 4)),
            Item(2, GlobalSym("g", 3, 1, _coord(1), 1, 0, 0)),
        )
        with pytest.raises(ValidationError, match="disagrees"):
            validate_module(SymModule("a.c", 1, 3, items, 0, ()))


class TestVisibility:
    def test_wf_chain(self):
        m = wf_like_module()
        c_uid = next(it.uid for it in m.items
                     if isinstance(it.node, LocalSym) and it.node.id == "c")
        ids = [s.id for s in visible_chain(m, c_uid)]
        assert ids == ["c", "s", "buf", "words", "main", "tprint", "getword", "isletter"]

    def test_single_element_chain(self):
        m = wf_like_module()
        isletter = next(it.uid for it in m.items
                        if getattr(it.node, "id", None) == "isletter")
        chain = visible_chain(m, isletter)
        assert [s.id for s in chain] == ["isletter"]

    def test_chain_bounded_and_duplicate_free(self):
        rng = random.Random(7)
        for _ in range(50):
            m = random_module(rng)
            for it in m.items:
                if not hasattr(it.node, "uplink"):
                    continue
                chain = visible_chain(m, it.uid)
                uids = [s.uid for s in chain]
                assert len(uids) == len(set(uids))
                assert len(chain) <= m.nuids

    def test_lookup_param_shadows_nothing(self):
        m = wf_like_module()
        buf_uid = 11
        sym = lookup_name("buf", (m, 13))
        assert isinstance(sym, ParamSym) and sym.uid == buf_uid

    def test_lookup_file_scope_static(self):
        m = wf_like_module()
        # context: inside main -> its chain starts at main's uid here
        sym = lookup_name("words", (m, 10))
        assert isinstance(sym, StaticSym) and sym.id == "words"

    def test_lookup_absent(self):
        m = wf_like_module()
        assert lookup_name("nosuch", (m, 13), [m]) is None

    def test_lookup_cross_module_globals_only(self):
        m = wf_like_module()
        other_items = (
            Item(1, IntType(4, 4)),
            Item(2, GlobalSym("lookup", 2, 77, _coord(1, file="lookup.c"), 1, 0, 0)),
            Item(3, TypedefSym("hidden", 3, 77, _coord(2, file="lookup.c"), 1, 2)),
        )
        other = SymModule("lookup.c", 77, 3, other_items, 2, ())
        validate_module(other)
        found = lookup_name("lookup", (m, 13), [m, other])
        assert isinstance(found, GlobalSym)
        assert lookup_name("hidden", (m, 13), [m, other]) is None

    def test_inner_declaration_wins(self):
        u = 5
        items = (
            Item(1, IntType(4, 4)),
            Item(2, GlobalSym("x", 2, u, _coord(1, file="s.c"), 1, 0, 0)),
            Item(3, LocalSym("x", 3, u, _coord(2, file="s.c"), 1, 2, 20)),
        )
        m = SymModule("s.c", u, 3, items, 2, ())
        validate_module(m)
        sym = lookup_name("x", (m, 3))
        assert isinstance(sym, LocalSym)


class TestFindSpoints:
    def test_exact_match(self):
        m = wf_like_module()
        hits = find_spoints(m, Coordinate("wf.c", 12, 10))
        assert len(hits) == 1 and hits[0][0] == 1

    def test_line_only_pattern(self):
        m = wf_like_module()
        hits = find_spoints(m, Coordinate("wf.c", 0, 10))
        assert [i for i, _ in hits] == [1]
        hits = find_spoints(m, Coordinate("", 0, 0))
        assert len(hits) == len(m.spoints)

    def test_wildcard_everything(self):
        m = wf_like_module()
        hits = find_spoints(m, WILDCARD)
        assert [i for i, _ in hits] == list(range(len(m.spoints)))

    def test_no_match(self):
        m = wf_like_module()
        assert find_spoints(m, Coordinate("zz.c", 0, 0)) == []
