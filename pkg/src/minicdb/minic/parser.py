"""MiniC recursive-descent parser.

Declarators cover the subset we compile: pointers, one array suffix, and
one parameter-list suffix; there are no parenthesized declarators, so a
declarator is read left to right.  Typedef names are tracked by the
parser itself (file-scope typedefs only) so the grammar stays LL(1).

An expression's coordinate is its first token, including a parenthesis:
``(c = getchar()) != -1`` begins at the ``(``.
"""

from __future__ import annotations

from ..symtab import Coordinate
from .ast import (
    ArrType, Assign, Binary, Block, Call, Decl, DeclStmt, EmptyStmt, EnumSpec,
    Expr, ExprStmt, FloatLit, ForStmt, FuncDef, IfStmt, Index, IntLit, Member,
    NameRef, NamedType, Param, Postfix, PtrType, QualType, RecordSpec,
    ReturnStmt, StrLit, TagDecl, TypeExpr, Unary, Unit, WhileStmt,
)
from .diagnostics import CompileError, Diagnostic
from .lexer import Token, lex

_BASE_TYPES = ("void", "char", "short", "int", "unsigned", "float", "double")
_SPEC_STARTERS = _BASE_TYPES + ("struct", "union", "enum", "const", "volatile",
                                "static", "typedef")


class _ParseError(Exception):
    pass


class _Parser:
    def __init__(self, tokens: list[Token], file: str):
        self.tokens = tokens
        self.file = file
        self.pos = 0
        self.diags: list[Diagnostic] = []
        self.typedefs: set[str] = set()

    # -- token plumbing ----------------------------------------------------

    def peek(self, off: int = 0) -> Token:
        return self.tokens[min(self.pos + off, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at_punct(self, *texts: str) -> bool:
        return self.peek().is_punct(*texts)

    def accept(self, text: str) -> Token | None:
        if self.at_punct(text):
            return self.next()
        return None

    def expect(self, text: str, what: str = "") -> Token:
        if self.at_punct(text):
            return self.next()
        tok = self.peek()
        msg = f"expected {text!r}" + (f" {what}" if what else "")
        self.error(msg, tok.coord)
        raise _ParseError()

    def error(self, message: str, coord: Coordinate) -> None:
        self.diags.append(Diagnostic(coord, message))

    def sync_to_statement(self) -> None:
        depth = 0
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.is_punct(";") and depth == 0:
                self.next()
                return
            if tok.is_punct("{"):
                depth += 1
            elif tok.is_punct("}"):
                if depth == 0:
                    return
                depth -= 1
            self.next()

    # -- declarations --------------------------------------------------------

    def starts_declaration(self) -> bool:
        tok = self.peek()
        if tok.kind == "kw" and tok.text in _SPEC_STARTERS:
            return True
        return tok.kind == "ident" and tok.text in self.typedefs

    def parse_decl_specs(self) -> tuple[TypeExpr, str]:
        """Returns (base type, storage), storage in {'', 'static', 'typedef'}."""
        storage = ""
        quals: list[str] = []
        base: TypeExpr | None = None
        start = self.peek().coord
        while True:
            tok = self.peek()
            if tok.is_kw("static", "typedef"):
                if storage:
                    self.error("multiple storage classes", tok.coord)
                storage = tok.text
                self.next()
            elif tok.is_kw("const", "volatile"):
                quals.append(tok.text)
                self.next()
            elif tok.is_kw(*_BASE_TYPES):
                if base is not None:
                    self.error(f"unexpected {tok.text!r} after a type", tok.coord)
                self.next()
                name = tok.text
                if name == "unsigned" and self.peek().is_kw("int"):
                    self.next()
                elif name == "short" and self.peek().is_kw("int"):
                    self.next()
                base = NamedType(tok.coord, name)
            elif tok.is_kw("struct", "union"):
                if base is not None:
                    self.error("two base types in one declaration", tok.coord)
                base = self.parse_record_spec()
            elif tok.is_kw("enum"):
                if base is not None:
                    self.error("two base types in one declaration", tok.coord)
                base = self.parse_enum_spec()
            elif (tok.kind == "ident" and tok.text in self.typedefs
                  and base is None):
                self.next()
                base = NamedType(tok.coord, tok.text, is_typedef=True)
            else:
                break
        if base is None:
            self.error("declaration needs a type", start)
            raise _ParseError()
        for q in quals:
            base = QualType(base.coord, q, base)
        return base, storage

    def parse_record_spec(self) -> RecordSpec:
        kw = self.next()
        tag = None
        if self.peek().kind == "ident":
            tag = self.next().text
        members = None
        if self.accept("{"):
            members = []
            while not self.at_punct("}") and self.peek().kind != "eof":
                try:
                    members.extend(self.parse_member_group())
                except _ParseError:
                    self.sync_to_statement()
            self.expect("}", "after member list")
        elif tag is None:
            self.error(f"{kw.text} needs a tag or a member list", kw.coord)
            raise _ParseError()
        return RecordSpec(kw.coord, kw.text, tag, members)

    def parse_member_group(self) -> list[Decl]:
        base, storage = self.parse_decl_specs()
        if storage:
            self.error(f"{storage!r} not allowed on members", base.coord)
        decls = []
        while True:
            name, dtype, coord, _params = self.parse_declarator(base)
            bitsize = None
            if self.accept(":"):
                bitsize = self.parse_binary_expr()
            if name is None:
                self.error("member needs a name", coord)
            else:
                decls.append(Decl(coord, name, dtype, bitsize=bitsize))
            if not self.accept(","):
                break
        self.expect(";", "after member declaration")
        return decls

    def parse_enum_spec(self) -> EnumSpec:
        kw = self.next()
        tag = None
        if self.peek().kind == "ident":
            tag = self.next().text
        enumerators = None
        if self.accept("{"):
            enumerators = []
            while not self.at_punct("}") and self.peek().kind != "eof":
                tok = self.peek()
                if tok.kind != "ident":
                    self.error("expected enumerator name", tok.coord)
                    raise _ParseError()
                self.next()
                value = None
                if self.accept("="):
                    value = self.parse_binary_expr()
                enumerators.append((tok.text, value, tok.coord))
                if not self.accept(","):
                    break
            self.expect("}", "after enumerator list")
        elif tag is None:
            self.error("enum needs a tag or an enumerator list", kw.coord)
            raise _ParseError()
        return EnumSpec(kw.coord, tag, enumerators)

    def parse_declarator(self, base: TypeExpr):
        """Returns (name or None, TypeExpr, name coordinate, params or None)."""
        dtype = base
        coord = self.peek().coord
        while self.accept("*"):
            dtype = PtrType(coord, dtype)
            while self.peek().is_kw("const", "volatile"):
                q = self.next()
                dtype = QualType(q.coord, q.text, dtype)
            coord = self.peek().coord
        name = None
        if self.peek().kind == "ident":
            tok = self.next()
            name = tok.text
            coord = tok.coord
        params = None
        if self.at_punct("("):
            params = self.parse_param_list()
        elif self.at_punct("["):
            self.next()
            size = None
            if not self.at_punct("]"):
                size = self.parse_binary_expr()
            self.expect("]", "after array size")
            dtype = ArrType(coord, dtype, size)
        return name, dtype, coord, params

    def parse_param_list(self) -> list[Param]:
        self.expect("(")
        params: list[Param] = []
        if self.accept(")"):
            return params
        if self.peek().is_kw("void") and self.peek(1).is_punct(")"):
            self.next()
            self.expect(")")
            return params
        while True:
            base, storage = self.parse_decl_specs()
            if storage:
                self.error("storage class not allowed on parameters", base.coord)
            name, dtype, coord, nested = self.parse_declarator(base)
            if nested is not None:
                self.error("function parameters cannot be functions", coord)
            params.append(Param(coord, name, dtype))
            if not self.accept(","):
                break
        self.expect(")", "after parameters")
        return params

    def parse_file_declaration(self, unit: Unit) -> None:
        base, storage = self.parse_decl_specs()
        if self.accept(";"):
            unit.decls.append(TagDecl(base.coord, base))
            return
        first = True
        while True:
            name, dtype, coord, params = self.parse_declarator(base)
            if name is None:
                self.error("declaration needs a name", coord)
                raise _ParseError()
            if params is not None:
                if storage == "typedef":
                    self.error("cannot typedef a function", coord)
                if first and self.at_punct("{"):
                    body = self.parse_block()
                    unit.decls.append(FuncDef(coord, name, dtype, params, body,
                                              static=storage == "static"))
                    return
                unit.decls.append(FuncDef(coord, name, dtype, params, None,
                                          static=storage == "static"))
            else:
                init = None
                if self.accept("="):
                    init = self.parse_assignment_expr()
                if storage == "typedef":
                    self.typedefs.add(name)
                unit.decls.append(Decl(coord, name, dtype, storage, init))
            first = False
            if not self.accept(","):
                break
        self.expect(";", "after declaration")

    # -- statements ----------------------------------------------------------

    def parse_block(self) -> Block:
        open_tok = self.expect("{")
        block = Block(open_tok.coord)
        while not self.at_punct("}") and self.peek().kind != "eof":
            try:
                block.stmts.append(self.parse_statement())
            except _ParseError:
                self.sync_to_statement()
        self.expect("}", "to close block")
        return block

    def parse_statement(self):
        tok = self.peek()
        if tok.is_punct("{"):
            return self.parse_block()
        if tok.is_punct(";"):
            self.next()
            return EmptyStmt(tok.coord)
        if tok.is_kw("if"):
            self.next()
            self.expect("(", "after if")
            cond = self.parse_expr()
            self.expect(")", "after condition")
            then = self.parse_statement()
            els = None
            if self.peek().is_kw("else"):
                self.next()
                els = self.parse_statement()
            return IfStmt(tok.coord, cond, then, els)
        if tok.is_kw("while"):
            self.next()
            self.expect("(", "after while")
            cond = self.parse_expr()
            self.expect(")", "after condition")
            body = self.parse_statement()
            return WhileStmt(tok.coord, cond, body)
        if tok.is_kw("for"):
            self.next()
            self.expect("(", "after for")
            init = None if self.at_punct(";") else self.parse_expr()
            self.expect(";", "after for initializer")
            cond = None if self.at_punct(";") else self.parse_expr()
            self.expect(";", "after for condition")
            step = None if self.at_punct(")") else self.parse_expr()
            self.expect(")", "after for clauses")
            body = self.parse_statement()
            return ForStmt(tok.coord, init, cond, step, body)
        if tok.is_kw("return"):
            self.next()
            expr = None
            if not self.at_punct(";"):
                expr = self.parse_expr()
            self.expect(";", "after return")
            return ReturnStmt(tok.coord, expr)
        if self.starts_declaration():
            return self.parse_local_declaration()
        expr = self.parse_expr()
        self.expect(";", "after expression")
        return ExprStmt(expr.coord, expr)

    def parse_local_declaration(self) -> DeclStmt:
        base, storage = self.parse_decl_specs()
        if storage == "typedef":
            self.error("typedef is file scope only in MiniC", base.coord)
            storage = ""
        if storage == "static":
            self.error("block-scope statics are not part of MiniC", base.coord)
            storage = ""
        stmt = DeclStmt(base.coord)
        while True:
            name, dtype, coord, params = self.parse_declarator(base)
            if params is not None:
                self.error("local function declarations are not supported", coord)
                raise _ParseError()
            if name is None:
                self.error("declaration needs a name", coord)
                raise _ParseError()
            init = None
            if self.accept("="):
                init = self.parse_assignment_expr()
            stmt.decls.append(Decl(coord, name, dtype, "", init))
            if not self.accept(","):
                break
        self.expect(";", "after declaration")
        return stmt

    # -- expressions -----------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_assignment_expr()

    def parse_assignment_expr(self) -> Expr:
        left = self.parse_binary_expr()
        tok = self.peek()
        if tok.is_punct("=", "+=", "-=", "*=", "/="):
            self.next()
            value = self.parse_assignment_expr()
            return Assign(left.coord, op=tok.text, target=left, value=value)
        return left

    _LEVELS = (
        ("||",), ("&&",), ("|",), ("^",), ("&",), ("==", "!="),
        ("<", ">", "<=", ">="), ("<<", ">>"), ("+", "-"), ("*", "/", "%"),
    )

    def parse_binary_expr(self, level: int = 0) -> Expr:
        if level >= len(self._LEVELS):
            return self.parse_unary()
        ops = self._LEVELS[level]
        left = self.parse_binary_expr(level + 1)
        while self.peek().is_punct(*ops):
            op = self.next().text
            right = self.parse_binary_expr(level + 1)
            left = Binary(left.coord, op=op, left=left, right=right)
        return left

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if tok.is_punct("-", "!", "*", "&", "++", "--", "+", "~"):
            self.next()
            operand = self.parse_unary()
            if tok.text == "+":
                return operand
            return Unary(tok.coord, op=tok.text, operand=operand)
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        expr = self.parse_primary()
        while True:
            tok = self.peek()
            if tok.is_punct("["):
                self.next()
                index = self.parse_expr()
                self.expect("]", "after subscript")
                expr = Index(expr.coord, base=expr, index=index)
            elif tok.is_punct("."):
                self.next()
                name = self.next()
                if name.kind != "ident":
                    self.error("expected member name", name.coord)
                    raise _ParseError()
                expr = Member(expr.coord, base=expr, name=name.text, arrow=False)
            elif tok.is_punct("->"):
                self.next()
                name = self.next()
                if name.kind != "ident":
                    self.error("expected member name", name.coord)
                    raise _ParseError()
                expr = Member(expr.coord, base=expr, name=name.text, arrow=True)
            elif tok.is_punct("++", "--"):
                self.next()
                expr = Postfix(expr.coord, op=tok.text, operand=expr)
            elif tok.is_punct("("):
                if not isinstance(expr, NameRef):
                    self.error("only named functions can be called", tok.coord)
                    raise _ParseError()
                args = self.parse_call_args()
                expr = Call(expr.coord, name=expr.name, args=args)
            else:
                return expr

    def parse_call_args(self) -> list[Expr]:
        self.expect("(")
        args: list[Expr] = []
        if self.accept(")"):
            return args
        while True:
            args.append(self.parse_assignment_expr())
            if not self.accept(","):
                break
        self.expect(")", "after arguments")
        return args

    def parse_primary(self) -> Expr:
        tok = self.next()
        if tok.kind == "int":
            return IntLit(tok.coord, value=tok.value)
        if tok.kind == "char":
            return IntLit(tok.coord, value=tok.value)
        if tok.kind == "float":
            value, single = tok.value
            return FloatLit(tok.coord, value=value, single=single)
        if tok.kind == "string":
            return StrLit(tok.coord, data=tok.value)
        if tok.kind == "ident":
            return NameRef(tok.coord, name=tok.text)
        if tok.is_punct("("):
            expr = self.parse_expr()
            self.expect(")", "to close expression")
            # The whole parenthesized expression begins at the '('.
            expr.coord = tok.coord
            return expr
        self.error(f"unexpected {tok.text or tok.kind!r} in expression", tok.coord)
        raise _ParseError()


def parse(source: str, file: str) -> Unit:
    """Parse one translation unit; raises CompileError on any diagnostic."""
    tokens = lex(source, file)
    p = _Parser(tokens, file)
    unit = Unit(file)
    while p.peek().kind != "eof":
        try:
            p.parse_file_declaration(unit)
        except _ParseError:
            p.sync_to_statement()
    if p.diags:
        raise CompileError(p.diags)
    return unit
