"""Lexer, parser, and type checker behavior."""

from __future__ import annotations

from pathlib import Path

import pytest

from minicdb.minic import CompileError, analyze, parse
from minicdb.minic import ast
from minicdb.minic.lexer import lex
from minicdb.minic.types import (
    ArrayCT, DOUBLE, EnumCT, FLOAT, INT, PtrCT, RecordCT, UNSIGNED, unqual,
)

FIXTURES = Path(__file__).parent / "fixtures"
WF_SOURCE = (FIXTURES / "wf.c").read_text()


def check(source: str, file: str = "t.c"):
    return analyze(parse(source, file))


class TestLexer:
    def test_coordinates_are_one_based_byte_columns(self):
        toks = lex("int a;\n\tx = 1;\n", "t.c")
        assert (toks[0].coord.y, toks[0].coord.x) == (1, 1)
        assert (toks[1].coord.y, toks[1].coord.x) == (1, 5)
        # tab counts as a single column
        assert (toks[3].coord.y, toks[3].coord.x) == (2, 2)

    def test_multibyte_chars_advance_by_encoded_length(self):
        toks = lex('x = "é"; y', "t.c")
        y_tok = [t for t in toks if t.text == "y"][0]
        # "é" occupies two bytes, so everything after it shifts one column
        assert y_tok.coord.x == 11

    def test_literals(self):
        toks = lex("0x10 12 1.5 2e3 1.5f 'a' '\\n' \"hi\\n\"", "t.c")
        values = [t.value for t in toks[:-1]]
        assert values == [16, 12, (1.5, False), (2000.0, False), (1.5, True),
                          97, 10, b"hi\n"]

    def test_comments_and_operators(self):
        toks = lex("a /* c */ && b // rest\n|| ->", "t.c")
        assert [t.text for t in toks[:-1]] == ["a", "&&", "b", "||", "->"]

    def test_lex_error_has_coordinate(self):
        with pytest.raises(CompileError) as err:
            lex("int @;", "t.c")
        assert "t.c:1.5" in str(err.value)


class TestParser:
    def test_wf_declarations(self):
        unit = parse(WF_SOURCE, "wf.c")
        funcs = [d.name for d in unit.decls if isinstance(d, ast.FuncDef)]
        assert funcs == ["isletter", "getword", "tprint", "main",
                         "isletter", "getword", "tprint", "main"]
        variables = [d.name for d in unit.decls if isinstance(d, ast.Decl)]
        assert variables == ["words"]

    def test_empty_file(self):
        unit = parse("", "t.c")
        assert unit.decls == []

    def test_missing_semicolon_diagnostic_at_brace(self):
        with pytest.raises(CompileError) as err:
            parse("int f(void) { return 1 }", "t.c")
        d = err.value.diagnostics[0]
        assert (d.coord.y, d.coord.x) == (1, 24)
        assert "';'" in d.message

    def test_multiple_errors_reported(self):
        with pytest.raises(CompileError) as err:
            parse("int f(void) { 1 + ; }\nint g(void) { 2 + ; }", "t.c")
        assert len(err.value.diagnostics) >= 2

    def test_paren_expression_starts_at_paren(self):
        unit = parse("int f(void) { return (1 + 2) * 3; }", "t.c")
        ret = unit.decls[0].body.stmts[0]
        assert isinstance(ret, ast.ReturnStmt)
        # return expression is the multiply; its first token is '('
        assert ret.expr.coord.x == 22

    def test_typedef_names_parse(self):
        unit = parse("typedef unsigned uint;\nuint g;\nint f(uint x) { return 0; }", "t.c")
        assert isinstance(unit.decls[1], ast.Decl)

    def test_precedence_shape(self):
        unit = parse("int f(void) { return 1 + 2 * 3 == 7 && 1; }", "t.c")
        expr = unit.decls[0].body.stmts[0].expr
        assert isinstance(expr, ast.Binary) and expr.op == "&&"
        assert expr.left.op == "=="


class TestSema:
    def test_layout_table(self):
        sem = check(
            "char c; short s; int i; unsigned u; float f; double d;\n"
            "int *p; struct t { int a; } v; enum e { E1 } w;")
        sizes = {s.name: (unqual(s.ctype).size, unqual(s.ctype).align)
                 for s in sem.file_syms if s.kind in ("global", "static")}
        assert sizes == {
            "c": (1, 1), "s": (2, 2), "i": (4, 4), "u": (4, 4),
            "f": (4, 4), "d": (8, 8), "p": (4, 4), "v": (4, 4), "w": (4, 4),
        }

    def test_struct_pointer_type(self):
        sem = check("struct node { struct node *next; int v; };\nstruct node *head;")
        head = sem.file_scope.lookup("head")
        t = unqual(head.ctype)
        assert isinstance(t, PtrCT) and t.size == 4
        rec = unqual(t.ref)
        assert isinstance(rec, RecordCT) and rec.size == 8

    def test_struct_layout_with_padding(self):
        sem = check("struct s { char c; int i; short h; } x;")
        rec = unqual(sem.file_scope.lookup("x").ctype)
        offs = {m.name: m.offset for m in rec.members}
        assert offs == {"c": 0, "i": 4, "h": 8}
        assert rec.size == 12 and rec.align == 4

    def test_bitfield_packing(self):
        sem = check("struct b { unsigned a : 3; unsigned b : 5; unsigned c : 30; } x;")
        rec = unqual(sem.file_scope.lookup("x").ctype)
        by = {m.name: m for m in rec.members}
        assert (by["a"].offset, by["a"].lsb, by["a"].bitsize) == (0, 0, 3)
        assert (by["b"].offset, by["b"].lsb, by["b"].bitsize) == (0, 3, 5)
        # c does not fit in the remaining 24 bits of the first unit
        assert (by["c"].offset, by["c"].lsb) == (4, 0)
        assert rec.size == 8

    def test_union_layout(self):
        sem = check("union u { char c; double d; int i; } x;")
        rec = unqual(sem.file_scope.lookup("x").ctype)
        assert rec.size == 8 and rec.align == 8
        assert all(m.offset == 0 for m in rec.members)

    def test_enum_values_auto_increment(self):
        sem = check("enum color { RED = 1, GREEN, BLUE } c;")
        enum = unqual(sem.file_scope.lookup("c").ctype)
        assert isinstance(enum, EnumCT)
        assert enum.items == [("RED", 1), ("GREEN", 2), ("BLUE", 3)]
        green = sem.file_scope.lookup("GREEN")
        assert green.kind == "enumconst" and green.value == 2

    def test_undeclared_identifier(self):
        with pytest.raises(CompileError, match="undeclared identifier 'nosuch'"):
            check("int f(void) { return nosuch; }")

    def test_uplinks_follow_declaration_order(self):
        sem = check(WF_SOURCE, "wf.c")
        chain = []
        sym = sem.file_scope.tail()
        while sym is not None:
            chain.append(sym.name)
            sym = sym.uplink
        assert chain == ["words", "main", "tprint", "getword", "isletter"]
        assert sem.globals_tail.name == "words"

    def test_getword_locals_link_to_file_tail_at_definition(self):
        sem = check(WF_SOURCE, "wf.c")
        getword = next(f for f in sem.functions if f.sym.name == "getword")
        names = []
        sym = getword.frame_syms[-1]
        while sym is not None:
            names.append(sym.name)
            sym = sym.uplink
        assert names == ["c", "s", "buf", "words", "main", "tprint",
                         "getword", "isletter"]

    def test_prototype_definition_type_mismatch(self):
        with pytest.raises(CompileError, match="conflicting declaration"):
            check("int f(int x);\nint f(char *x) { return 0; }")

    def test_call_arity_checked(self):
        with pytest.raises(CompileError, match="expects 1 arguments, got 2"):
            check("int f(int x);\nint g(void) { return f(1, 2); }")

    def test_pointer_int_mixing_rejected(self):
        with pytest.raises(CompileError, match="cannot assign"):
            check("int *p; int g(void) { p = 5; return 0; }")

    def test_double_promotion(self):
        sem = check("double d; int f(void) { d = d + 1; return 0; }")
        body = next(f for f in sem.functions if f.sym.name == "f")
        assign = body.node.body.stmts[0].expr
        assert assign.value.ctype is DOUBLE
        assert assign.value.arith == "float"

    def test_unsigned_arithmetic_kind(self):
        sem = check("unsigned u; int f(void) { u = u / 3; return 0; }")
        body = next(f for f in sem.functions if f.sym.name == "f")
        div = body.node.body.stmts[0].expr.value
        assert div.arith == "uint" and div.ctype is UNSIGNED

    def test_array_param_decays(self):
        sem = check("int f(char *argv[]) { return 0; }")
        f = next(f for f in sem.functions if f.sym.name == "f")
        p = f.params[0].ctype
        assert isinstance(p, PtrCT) and isinstance(unqual(p.ref), PtrCT)

    def test_address_of_bitfield_rejected(self):
        with pytest.raises(CompileError, match="bit field"):
            check("struct b { int f : 3; } x;\nint g(void) { return *(&x.f); }")

    def test_static_function_must_be_defined(self):
        with pytest.raises(CompileError, match="never defined"):
            check("static int f(int x);\nint main(void) { return f(1); }")
