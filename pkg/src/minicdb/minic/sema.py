"""MiniC type checker and scope builder.

Produces, for one parsed unit: every expression annotated with its type,
a scope tree whose symbols carry uplinks to the previous visible
declaration, the ordered list of function definitions, and the tail of
the file-scope global/static chain.  Uplinks are assigned at declaration
time, so a function defined late in the file links its parameters to
whatever file-scope symbol was most recently declared, exactly as the
debugger will see it.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

from ..symtab import Coordinate
from . import ast
from .diagnostics import CompileError, Diagnostic
from .types import (
    ArrayCT, CHAR, CType, DOUBLE, EnumCT, FLOAT, FuncCT, INT, MemberCT,
    PrimCT, PtrCT, QualCT, RecordCT, UNSIGNED, VOID, complete_record, decay,
    prim, promote, same_type, type_str, unqual, usual_arith,
)

BUILTINS = {
    "getchar": FuncCT(INT, ()),
    "putchar": FuncCT(INT, (INT,)),
    "print_int": FuncCT(VOID, (INT,)),
}


@dataclass(eq=False)
class SemSym:
    """A declared identifier; the unit of uplink chains and symfiles."""

    name: str
    kind: str            # 'global','static','local','param','typedef','enumconst'
    ctype: CType
    coord: Coordinate
    uplink: Optional["SemSym"]
    value: int = 0       # enumconst value
    offset: int = 0      # frame offset, assigned by the code generator
    index: int = -1      # address-vector slot, assigned by the code generator
    uid: int = 0         # symfile uid, assigned by the symfile builder
    defined: bool = False

    def is_function(self) -> bool:
        return isinstance(unqual(self.ctype), FuncCT)

    def __repr__(self):
        return f"<{self.kind} {self.name}>"


class Scope:
    def __init__(self, parent: Optional["Scope"] = None):
        self.parent = parent
        self.names: dict[str, SemSym] = {}
        self.order: list[SemSym] = []
        self.tags: dict[str, CType] = {}

    def tail(self) -> Optional[SemSym]:
        if self.order:
            return self.order[-1]
        return self.parent.tail() if self.parent else None

    def lookup(self, name: str) -> Optional[SemSym]:
        scope: Optional[Scope] = self
        while scope:
            if name in scope.names:
                return scope.names[name]
            scope = scope.parent
        return None

    def lookup_tag(self, tag: str) -> Optional[CType]:
        scope: Optional[Scope] = self
        while scope:
            if tag in scope.tags:
                return scope.tags[tag]
            scope = scope.parent
        return None


@dataclass
class FuncInfo:
    """One function definition, ready for code generation."""

    node: ast.FuncDef
    sym: SemSym
    scope: Scope
    params: list[SemSym] = dc_field(default_factory=list)
    frame_syms: list[SemSym] = dc_field(default_factory=list)  # params + locals
    entry_tail: Optional[SemSym] = None   # visible tail at the body brace


@dataclass
class SemaUnit:
    ast: ast.Unit
    file_scope: Scope
    functions: list[FuncInfo]
    file_syms: list[SemSym]          # file-scope chain in declaration order
    all_syms: list[SemSym]           # every symbol, in creation order
    globals_tail: Optional[SemSym]   # last file-scope static/global


class _Sema:
    def __init__(self, unit: ast.Unit):
        self.unit = unit
        self.diags: list[Diagnostic] = []
        self.file_scope = Scope()
        self.functions: list[FuncInfo] = []
        self.all_syms: list[SemSym] = []
        self.globals_tail: Optional[SemSym] = None
        self.cur_func: Optional[FuncInfo] = None
        self.cur_ret: CType = VOID

    def error(self, coord: Coordinate, message: str) -> None:
        self.diags.append(Diagnostic(coord, message))

    # -- type expressions ---------------------------------------------------

    def resolve_type(self, texpr: ast.TypeExpr, scope: Scope) -> CType:
        if isinstance(texpr, ast.NamedType):
            if texpr.is_typedef:
                sym = scope.lookup(texpr.name)
                if sym is None or sym.kind != "typedef":
                    self.error(texpr.coord, f"unknown type name {texpr.name!r}")
                    return INT
                return sym.ctype
            return prim(texpr.name)
        if isinstance(texpr, ast.PtrType):
            return PtrCT(self.resolve_type(texpr.inner, scope))
        if isinstance(texpr, ast.QualType):
            return QualCT(texpr.qual, self.resolve_type(texpr.inner, scope))
        if isinstance(texpr, ast.ArrType):
            elem = self.resolve_type(texpr.inner, scope)
            if unqual(elem).size == 0:
                self.error(texpr.coord, "array of an incomplete or void type")
                elem = INT
            if texpr.size is None:
                return ArrayCT(elem, 0)       # parameter form; decays anyway
            n = self.const_int(texpr.size, scope)
            if n is None or n < 1:
                self.error(texpr.coord, "array size must be a positive constant")
                n = 1
            return ArrayCT(elem, n)
        if isinstance(texpr, ast.RecordSpec):
            return self.resolve_record(texpr, scope)
        if isinstance(texpr, ast.EnumSpec):
            return self.resolve_enum(texpr, scope)
        raise AssertionError(f"unhandled type expression {texpr!r}")

    def resolve_record(self, spec: ast.RecordSpec, scope: Scope) -> CType:
        rec: Optional[RecordCT] = None
        if spec.tag is not None:
            known = scope.lookup_tag(spec.tag)
            if known is not None and not isinstance(known, RecordCT):
                self.error(spec.coord, f"tag {spec.tag!r} is not a {spec.kind}")
                return INT
            rec = known  # may be None
        if spec.members is None:
            if rec is None:
                rec = RecordCT(spec.kind, spec.tag)
                scope.tags[spec.tag] = rec
            return rec
        if rec is None or rec.complete:
            if rec is not None and rec.complete:
                self.error(spec.coord, f"redefinition of {spec.kind} {spec.tag!r}")
            rec = RecordCT(spec.kind, spec.tag)
            if spec.tag is not None:
                scope.tags[spec.tag] = rec
        elif rec.kind != spec.kind:
            self.error(spec.coord, f"tag {spec.tag!r} declared as a different record kind")
        members: list[MemberCT] = []
        for decl in spec.members:
            mtype = self.resolve_type(decl.type, scope)
            bitsize = 0
            if decl.bitsize is not None:
                width = self.const_int(decl.bitsize, scope)
                mu = unqual(mtype)
                if not (isinstance(mu, PrimCT) and mu.is_integer()) and not isinstance(mu, EnumCT):
                    self.error(decl.coord, "bit field needs an integer type")
                elif width is None or width < 1 or width > 8 * mu.size:
                    self.error(decl.coord, "bad bit field width")
                else:
                    bitsize = width
            mu = unqual(mtype)
            if isinstance(mu, RecordCT) and not mu.complete:
                self.error(decl.coord, f"member {decl.name!r} has incomplete type")
                continue
            if isinstance(mu, FuncCT) or mu.size == 0:
                self.error(decl.coord, f"member {decl.name!r} has invalid type")
                continue
            if any(m.name == decl.name for m in members):
                self.error(decl.coord, f"duplicate member {decl.name!r}")
                continue
            members.append(MemberCT(decl.name, mtype, bitsize=bitsize))
        complete_record(rec, members)
        return rec

    def resolve_enum(self, spec: ast.EnumSpec, scope: Scope) -> CType:
        if spec.enumerators is None:
            known = scope.lookup_tag(spec.tag)
            if known is None:
                self.error(spec.coord, f"unknown enum tag {spec.tag!r}")
                return INT
            if not isinstance(known, EnumCT):
                self.error(spec.coord, f"tag {spec.tag!r} is not an enum")
                return INT
            return known
        enum = EnumCT(spec.tag)
        if spec.tag is not None:
            if spec.tag in scope.tags:
                self.error(spec.coord, f"redefinition of tag {spec.tag!r}")
            scope.tags[spec.tag] = enum
        next_value = 0
        for name, value_expr, coord in spec.enumerators:
            if value_expr is not None:
                v = self.const_int(value_expr, scope)
                if v is None:
                    v = next_value
                next_value = v
            value = next_value
            next_value += 1
            enum.items.append((name, value))
            self.declare(scope, name, "enumconst", enum, coord, value=value)
        return enum

    # -- declarations ---------------------------------------------------------

    def declare(self, scope: Scope, name: str, kind: str, ctype: CType,
                coord: Coordinate, value: int = 0) -> SemSym:
        if name in scope.names:
            self.error(coord, f"redeclaration of {name!r}")
            return scope.names[name]
        sym = SemSym(name, kind, ctype, coord, scope.tail(), value=value)
        scope.names[name] = sym
        scope.order.append(sym)
        self.all_syms.append(sym)
        return sym

    def declare_function(self, node: ast.FuncDef, defining: bool) -> SemSym:
        scope = self.file_scope
        ret = self.resolve_type(node.ret, scope)
        if isinstance(unqual(ret), (ArrayCT, FuncCT, RecordCT)):
            self.error(node.coord, "functions cannot return arrays, functions, or records")
            ret = INT
        param_types = []
        for p in node.params:
            pt = decay(self.resolve_type(p.type, scope))
            pu = unqual(pt)
            if pu is VOID or isinstance(pu, FuncCT):
                self.error(p.coord, f"parameter {p.name or ''} has invalid type")
                pt = INT
            if isinstance(pu, RecordCT):
                self.error(p.coord, "record parameters are passed by pointer in MiniC")
                pt = PtrCT(pt)
            param_types.append(pt)
        ftype = FuncCT(ret, tuple(param_types))
        kind = "static" if node.static else "global"
        existing = scope.names.get(node.name)
        if existing is not None:
            if not existing.is_function() or not same_type(existing.ctype, ftype):
                self.error(node.coord, f"conflicting declaration of {node.name!r}")
            elif existing.kind != kind:
                self.error(node.coord, f"linkage of {node.name!r} disagrees with its declaration")
            if defining:
                if existing.defined:
                    self.error(node.coord, f"redefinition of function {node.name!r}")
                existing.defined = True
                existing.coord = node.coord
            node.sym = existing
            return existing
        sym = self.declare(scope, node.name, kind, ftype, node.coord)
        sym.defined = defining
        if kind in ("static", "global"):
            self.globals_tail = sym
        node.sym = sym
        return sym

    def check_file_decl(self, decl: ast.Decl) -> None:
        scope = self.file_scope
        ctype = self.resolve_type(decl.type, scope)
        if decl.storage == "typedef":
            sym = self.declare(scope, decl.name, "typedef", ctype, decl.coord)
            decl.sym = sym
            if decl.init is not None:
                self.error(decl.coord, "typedef cannot have an initializer")
            return
        u = unqual(ctype)
        if isinstance(u, FuncCT):
            self.error(decl.coord, f"{decl.name!r} declares a function without parameters")
            return
        if isinstance(u, RecordCT) and not u.complete:
            self.error(decl.coord, f"variable {decl.name!r} has incomplete type")
            return
        if u is VOID:
            self.error(decl.coord, f"variable {decl.name!r} has void type")
            return
        kind = "static" if decl.storage == "static" else "global"
        sym = self.declare(scope, decl.name, kind, ctype, decl.coord)
        sym.defined = True
        decl.sym = sym
        self.globals_tail = sym
        if decl.init is not None:
            self.check_global_init(decl, sym)

    def check_global_init(self, decl: ast.Decl, sym: SemSym) -> None:
        init = decl.init
        u = unqual(sym.ctype)
        if isinstance(init, ast.StrLit):
            self.check_expr(init, self.file_scope)
            if isinstance(u, ArrayCT) and unqual(u.elem) is CHAR:
                if len(init.data) + 1 > u.nelems:
                    self.error(init.coord, "string initializer does not fit")
            elif not (isinstance(u, PtrCT) and unqual(u.ref) is CHAR):
                self.error(init.coord, "string initializer needs char* or char[]")
            return
        if isinstance(init, ast.FloatLit):
            if not (isinstance(u, PrimCT) and u.kind in ("float", "double")):
                self.error(init.coord, "floating initializer for a non-floating variable")
            self.check_expr(init, self.file_scope)
            return
        value = self.const_int(init, self.file_scope)
        if value is None:
            self.error(init.coord, "global initializer must be a constant")
            return
        if isinstance(u, PtrCT) and value != 0:
            self.error(init.coord, "pointer initializer must be 0")
        if not (u.is_numeric() or isinstance(u, PtrCT)):
            self.error(init.coord, f"cannot initialize {type_str(sym.ctype)} with a constant")
        decl.init = ast.IntLit(init.coord, value=value)
        decl.init.ctype = INT

    def check_funcdef(self, node: ast.FuncDef) -> None:
        sym = self.declare_function(node, defining=True)
        scope = Scope(self.file_scope)
        info = FuncInfo(node, sym, scope)
        self.cur_func = info
        self.cur_ret = unqual(sym.ctype).ret
        ftype: FuncCT = unqual(sym.ctype)
        for p, ptype in zip(node.params, ftype.params):
            if p.name is None:
                self.error(p.coord, "definition parameters need names")
                continue
            psym = self.declare(scope, p.name, "param", ptype, p.coord)
            p.sym = psym
            info.params.append(psym)
            info.frame_syms.append(psym)
        info.entry_tail = scope.tail()
        node.body.scope = scope
        self.check_block(node.body, scope, reuse_scope=True)
        self.functions.append(info)
        self.cur_func = None

    # -- statements --------------------------------------------------------------

    def check_block(self, block: ast.Block, outer: Scope, reuse_scope: bool = False) -> None:
        scope = outer if reuse_scope else Scope(outer)
        block.scope = scope
        for stmt in block.stmts:
            self.check_stmt(stmt, scope)

    def check_stmt(self, stmt, scope: Scope) -> None:
        if isinstance(stmt, ast.Block):
            self.check_block(stmt, scope)
        elif isinstance(stmt, ast.DeclStmt):
            for decl in stmt.decls:
                self.check_local_decl(decl, scope)
        elif isinstance(stmt, ast.ExprStmt):
            self.check_expr(stmt.expr, scope)
        elif isinstance(stmt, ast.EmptyStmt):
            pass
        elif isinstance(stmt, ast.IfStmt):
            self.check_cond(stmt.cond, scope)
            self.check_stmt(stmt.then, scope)
            if stmt.els is not None:
                self.check_stmt(stmt.els, scope)
        elif isinstance(stmt, ast.WhileStmt):
            self.check_cond(stmt.cond, scope)
            self.check_stmt(stmt.body, scope)
        elif isinstance(stmt, ast.ForStmt):
            if stmt.init is not None:
                self.check_expr(stmt.init, scope)
            if stmt.cond is not None:
                self.check_cond(stmt.cond, scope)
            if stmt.step is not None:
                self.check_expr(stmt.step, scope)
            self.check_stmt(stmt.body, scope)
        elif isinstance(stmt, ast.ReturnStmt):
            if stmt.expr is None:
                if self.cur_ret is not VOID:
                    self.error(stmt.coord, "non-void function returns no value")
            else:
                t = self.check_expr(stmt.expr, scope)
                if self.cur_ret is VOID:
                    self.error(stmt.coord, "void function returns a value")
                elif t is not None and not self.convertible(t, self.cur_ret, stmt.expr):
                    self.error(stmt.expr.coord,
                               f"cannot return {type_str(t)} as {type_str(self.cur_ret)}")
        else:
            raise AssertionError(f"unhandled statement {stmt!r}")

    def check_local_decl(self, decl: ast.Decl, scope: Scope) -> None:
        ctype = self.resolve_type(decl.type, scope)
        u = unqual(ctype)
        if u is VOID or isinstance(u, FuncCT):
            self.error(decl.coord, f"variable {decl.name!r} has invalid type")
            return
        if isinstance(u, RecordCT) and not u.complete:
            self.error(decl.coord, f"variable {decl.name!r} has incomplete type")
            return
        sym = self.declare(scope, decl.name, "local", ctype, decl.coord)
        decl.sym = sym
        if self.cur_func is not None:
            self.cur_func.frame_syms.append(sym)
        if decl.init is not None:
            if isinstance(u, ArrayCT):
                self.error(decl.coord, "array initializers are not supported")
                decl.init = None
                return
            t = self.check_expr(decl.init, scope)
            if t is not None and not self.convertible(t, ctype, decl.init):
                self.error(decl.init.coord,
                           f"cannot initialize {type_str(ctype)} from {type_str(t)}")

    # -- expressions ---------------------------------------------------------------

    def check_cond(self, expr: ast.Expr, scope: Scope) -> None:
        t = self.check_expr(expr, scope)
        if t is not None and not decay(t).is_scalar():
            self.error(expr.coord, f"condition has non-scalar type {type_str(t)}")

    def convertible(self, src: CType, dst: CType, expr: ast.Expr | None = None) -> bool:
        s, d = decay(unqual(src)), unqual(dst)
        if s.is_numeric() and d.is_numeric():
            return True
        if isinstance(s, PtrCT) and isinstance(d, PtrCT):
            return (same_type(s.ref, d.ref)
                    or unqual(s.ref) is VOID or unqual(d.ref) is VOID)
        if isinstance(d, PtrCT) and isinstance(expr, ast.IntLit) and expr.value == 0:
            return True
        if isinstance(s, (RecordCT, EnumCT)) and s is d:
            return True
        if isinstance(s, EnumCT) and d.is_numeric():
            return True
        if s.is_numeric() and isinstance(d, EnumCT):
            return True
        return False

    def require_lvalue(self, expr: ast.Expr, what: str) -> None:
        if not expr.lvalue:
            self.error(expr.coord, f"{what} needs an lvalue")

    def check_expr(self, expr: ast.Expr, scope: Scope) -> Optional[CType]:
        t = self._check_expr(expr, scope)
        if t is not None:
            expr.ctype = t
        return t

    def _check_expr(self, expr: ast.Expr, scope: Scope) -> Optional[CType]:
        if isinstance(expr, ast.IntLit):
            return INT
        if isinstance(expr, ast.FloatLit):
            return FLOAT if expr.single else DOUBLE
        if isinstance(expr, ast.StrLit):
            return ArrayCT(CHAR, len(expr.data) + 1)
        if isinstance(expr, ast.NameRef):
            sym = scope.lookup(expr.name)
            if sym is None:
                self.error(expr.coord, f"use of undeclared identifier {expr.name!r}")
                return None
            if sym.kind == "typedef":
                self.error(expr.coord, f"{expr.name!r} is a type name, not a value")
                return None
            expr.sym = sym
            if sym.kind == "enumconst":
                return sym.ctype
            expr.lvalue = not sym.is_function()
            return sym.ctype
        if isinstance(expr, ast.Unary):
            return self.check_unary(expr, scope)
        if isinstance(expr, ast.Postfix):
            t = self.check_expr(expr.operand, scope)
            if t is None:
                return None
            self.require_lvalue(expr.operand, f"operand of {expr.op}")
            u = unqual(t)
            if isinstance(u, ArrayCT):
                self.error(expr.coord, f"{expr.op} cannot modify an array")
                return None
            if self._is_bitfield(expr.operand):
                self.error(expr.coord, f"{expr.op} on bit fields is not supported")
                return None
            if not (u.is_integer() or isinstance(u, PtrCT)):
                self.error(expr.coord, f"{expr.op} needs an integer or pointer")
                return None
            return u
        if isinstance(expr, ast.Binary):
            return self.check_binary(expr, scope)
        if isinstance(expr, ast.Assign):
            return self.check_assign(expr, scope)
        if isinstance(expr, ast.Call):
            return self.check_call(expr, scope)
        if isinstance(expr, ast.Index):
            base = self.check_expr(expr.base, scope)
            idx = self.check_expr(expr.index, scope)
            if base is None or idx is None:
                return None
            b = decay(unqual(base))
            if not isinstance(b, PtrCT):
                self.error(expr.coord, f"cannot index {type_str(base)}")
                return None
            if not unqual(idx).is_integer():
                self.error(expr.index.coord, "subscript must be an integer")
            elem = b.ref
            if unqual(elem).size == 0:
                self.error(expr.coord, "cannot index a pointer to an incomplete type")
                return None
            expr.lvalue = True
            return elem
        if isinstance(expr, ast.Member):
            return self.check_member(expr, scope)
        raise AssertionError(f"unhandled expression {expr!r}")

    def check_unary(self, expr: ast.Unary, scope: Scope) -> Optional[CType]:
        t = self.check_expr(expr.operand, scope)
        if t is None:
            return None
        u = decay(unqual(t))
        if expr.op == "-":
            if not u.is_numeric():
                self.error(expr.coord, "unary minus needs a number")
                return None
            return promote(u) if u.is_integer() or isinstance(u, EnumCT) else u
        if expr.op == "~":
            if not u.is_integer():
                self.error(expr.coord, "bitwise complement needs an integer")
                return None
            return promote(u)
        if expr.op == "!":
            if not u.is_scalar():
                self.error(expr.coord, "logical not needs a scalar")
                return None
            return INT
        if expr.op == "*":
            if not isinstance(u, PtrCT):
                self.error(expr.coord, f"cannot dereference {type_str(t)}")
                return None
            ref = unqual(u.ref)
            if ref is VOID or isinstance(ref, FuncCT):
                self.error(expr.coord, f"cannot dereference {type_str(t)}")
                return None
            if isinstance(ref, RecordCT) and not ref.complete:
                self.error(expr.coord, "cannot dereference a pointer to an incomplete type")
                return None
            expr.lvalue = True
            return u.ref
        if expr.op == "&":
            if isinstance(expr.operand, ast.Member) and expr.operand.fld is not None \
                    and expr.operand.fld.bitsize:
                self.error(expr.coord, "cannot take the address of a bit field")
                return None
            self.require_lvalue(expr.operand, "address-of")
            return PtrCT(t)
        if expr.op in ("++", "--"):
            self.require_lvalue(expr.operand, f"operand of {expr.op}")
            if isinstance(unqual(t), ArrayCT):
                self.error(expr.coord, f"{expr.op} cannot modify an array")
                return None
            if self._is_bitfield(expr.operand):
                self.error(expr.coord, f"{expr.op} on bit fields is not supported")
                return None
            if not (u.is_integer() or isinstance(u, PtrCT)):
                self.error(expr.coord, f"{expr.op} needs an integer or pointer")
                return None
            return unqual(t)
        raise AssertionError(expr.op)

    @staticmethod
    def _is_bitfield(expr: ast.Expr) -> bool:
        return (isinstance(expr, ast.Member) and expr.fld is not None
                and expr.fld.bitsize != 0)

    def check_binary(self, expr: ast.Binary, scope: Scope) -> Optional[CType]:
        lt = self.check_expr(expr.left, scope)
        rt = self.check_expr(expr.right, scope)
        if lt is None or rt is None:
            return None
        lu, ru = decay(unqual(lt)), decay(unqual(rt))
        op = expr.op

        if op in ("&&", "||"):
            if not lu.is_scalar() or not ru.is_scalar():
                self.error(expr.coord, f"{op} needs scalar operands")
            expr.arith = "logic"
            return INT

        if op in ("==", "!=", "<", ">", "<=", ">="):
            if isinstance(lu, PtrCT) and isinstance(ru, PtrCT):
                expr.arith = "uint"
                return INT
            if isinstance(lu, PtrCT) or isinstance(ru, PtrCT):
                other = expr.right if isinstance(lu, PtrCT) else expr.left
                if not (isinstance(other, ast.IntLit) and other.value == 0):
                    self.error(expr.coord, "comparison mixes a pointer and a number")
                expr.arith = "uint"
                return INT
            if not lu.is_numeric() or not ru.is_numeric():
                self.error(expr.coord, f"{op} needs numeric operands")
                return None
            common = usual_arith(lu, ru)
            expr.arith = self._arith_kind(common)
            return INT

        if op in ("&", "|", "^", "<<", ">>", "%"):
            if not lu.is_integer() or not ru.is_integer():
                self.error(expr.coord, f"{op} needs integer operands")
                return None
            common = usual_arith(lu, ru)
            expr.arith = self._arith_kind(common)
            return common

        if op in ("+", "-"):
            if isinstance(lu, PtrCT) and isinstance(ru, PtrCT):
                if op == "-":
                    if not same_type(lu.ref, ru.ref):
                        self.error(expr.coord, "pointer difference needs matching types")
                    expr.arith = "ptrdiff"
                    return INT
                self.error(expr.coord, "cannot add pointers")
                return None
            if isinstance(lu, PtrCT) or isinstance(ru, PtrCT):
                if op == "-" and isinstance(ru, PtrCT):
                    self.error(expr.coord, "cannot subtract a pointer from a number")
                    return None
                p = lu if isinstance(lu, PtrCT) else ru
                other = ru if p is lu else lu
                if not other.is_integer():
                    self.error(expr.coord, "pointer arithmetic needs an integer")
                if unqual(p.ref).size == 0:
                    self.error(expr.coord, "arithmetic on a pointer to an incomplete type")
                expr.arith = "ptr"
                return p

        if op in ("+", "-", "*", "/"):
            if not lu.is_numeric() or not ru.is_numeric():
                self.error(expr.coord, f"{op} needs numeric operands")
                return None
            common = usual_arith(lu, ru)
            expr.arith = self._arith_kind(common)
            return common
        raise AssertionError(op)

    @staticmethod
    def _arith_kind(common: CType) -> str:
        if isinstance(common, PrimCT):
            if common.kind in ("float", "double"):
                return "float"
            if common.kind == "unsigned":
                return "uint"
        return "int"

    def check_assign(self, expr: ast.Assign, scope: Scope) -> Optional[CType]:
        tt = self.check_expr(expr.target, scope)
        vt = self.check_expr(expr.value, scope)
        if tt is None or vt is None:
            return None
        self.require_lvalue(expr.target, "assignment target")
        tu = unqual(tt)
        if isinstance(tu, ArrayCT):
            self.error(expr.coord, "cannot assign to an array")
            return None
        if isinstance(tu, RecordCT):
            self.error(expr.coord, "record assignment is not supported")
            return None
        if expr.op == "=":
            if not self.convertible(vt, tt, expr.value):
                self.error(expr.coord,
                           f"cannot assign {type_str(vt)} to {type_str(tt)}")
            return tu
        # compound assignment: target op= value
        vu = decay(unqual(vt))
        if isinstance(tu, PtrCT):
            if expr.op not in ("+=", "-=") or not vu.is_integer():
                self.error(expr.coord, f"bad pointer operation {expr.op}")
        elif not (tu.is_numeric() and vu.is_numeric()):
            self.error(expr.coord, f"{expr.op} needs numeric operands")
        return tu

    def check_call(self, expr: ast.Call, scope: Scope) -> Optional[CType]:
        sym = scope.lookup(expr.name)
        ftype: Optional[FuncCT] = None
        if sym is None:
            if expr.name in BUILTINS:
                expr.sym = "builtin:" + expr.name
                ftype = BUILTINS[expr.name]
            else:
                self.error(expr.coord, f"call to undeclared function {expr.name!r}")
        else:
            if not sym.is_function():
                self.error(expr.coord, f"{expr.name!r} is not a function")
                return None
            expr.sym = sym
            ftype = unqual(sym.ctype)
        arg_types = [self.check_expr(a, scope) for a in expr.args]
        if ftype is None:
            return None
        if len(arg_types) != len(ftype.params):
            self.error(expr.coord,
                       f"{expr.name!r} expects {len(ftype.params)} arguments, got {len(arg_types)}")
        else:
            for arg, at, pt in zip(expr.args, arg_types, ftype.params):
                if at is not None and not self.convertible(at, pt, arg):
                    self.error(arg.coord,
                               f"cannot pass {type_str(at)} as {type_str(pt)}")
        return ftype.ret

    def check_member(self, expr: ast.Member, scope: Scope) -> Optional[CType]:
        base = self.check_expr(expr.base, scope)
        if base is None:
            return None
        if expr.arrow:
            bu = decay(unqual(base))
            if not isinstance(bu, PtrCT) or not isinstance(unqual(bu.ref), RecordCT):
                self.error(expr.coord, f"-> applied to {type_str(base)}")
                return None
            rec = unqual(bu.ref)
            expr.lvalue = True
        else:
            rec = unqual(base)
            if not isinstance(rec, RecordCT):
                self.error(expr.coord, f". applied to {type_str(base)}")
                return None
            expr.lvalue = expr.base.lvalue
        if not rec.complete:
            self.error(expr.coord, f"{type_str(rec)} is incomplete here")
            return None
        fld = rec.member(expr.name)
        if fld is None:
            self.error(expr.coord, f"no member {expr.name!r} in {type_str(rec)}")
            return None
        expr.rec = rec
        expr.fld = fld
        return fld.ctype

    # -- constant expressions ----------------------------------------------------

    def const_int(self, expr: ast.Expr, scope: Scope) -> Optional[int]:
        if isinstance(expr, ast.IntLit):
            return expr.value
        if isinstance(expr, ast.NameRef):
            sym = scope.lookup(expr.name)
            if sym is not None and sym.kind == "enumconst":
                expr.sym = sym
                expr.ctype = sym.ctype
                return sym.value
            return None
        if isinstance(expr, ast.Unary):
            v = self.const_int(expr.operand, scope)
            if v is None:
                return None
            return {"-": -v, "~": ~v, "!": int(not v)}.get(expr.op)
        if isinstance(expr, ast.Binary):
            left = self.const_int(expr.left, scope)
            right = self.const_int(expr.right, scope)
            if left is None or right is None:
                return None
            try:
                return {
                    "+": left + right, "-": left - right, "*": left * right,
                    "/": int(left / right) if right else None,
                    "%": left - int(left / right) * right if right else None,
                    "<<": left << right if 0 <= right < 32 else None,
                    ">>": left >> right if 0 <= right < 32 else None,
                    "&": left & right, "|": left | right, "^": left ^ right,
                    "==": int(left == right), "!=": int(left != right),
                    "<": int(left < right), ">": int(left > right),
                    "<=": int(left <= right), ">=": int(left >= right),
                }.get(expr.op)
            except (ZeroDivisionError, ValueError):
                return None
        return None


def analyze(unit: ast.Unit) -> SemaUnit:
    """Type-check one unit; raises CompileError on any diagnostic."""
    sema = _Sema(unit)
    for decl in unit.decls:
        if isinstance(decl, ast.FuncDef):
            if decl.body is None:
                sema.declare_function(decl, defining=False)
            else:
                sema.check_funcdef(decl)
        elif isinstance(decl, ast.Decl):
            sema.check_file_decl(decl)
        elif isinstance(decl, ast.TagDecl):
            sema.resolve_type(decl.spec, sema.file_scope)
        else:
            raise AssertionError(f"unhandled declaration {decl!r}")
    # Static functions must be defined in this unit: their addresses go in
    # the address vector.
    for sym in sema.file_scope.order:
        if sym.kind == "static" and sym.is_function() and not sym.defined:
            sema.error(sym.coord, f"static function {sym.name!r} declared but never defined")
    if sema.diags:
        raise CompileError(sema.diags)
    return SemaUnit(unit, sema.file_scope, sema.functions,
                    list(sema.file_scope.order), sema.all_syms,
                    sema.globals_tail)
