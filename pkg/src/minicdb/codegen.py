"""Compile one type-checked unit to an object module.

Responsibilities, in build order:

  * lay out every function frame: a 20-byte shadow record at offset 0
    (up, down, func uid, unit uname, current stopping point), then
    parameters and locals at positive offsets;
  * place globals into the unit's data image and plan the address
    vector in globals-chain order (innermost declaration first), which
    fixes the index field of every static/global symbol;
  * build the unit's symbol-table module (types deduplicated
    structurally, symbols in creation order, stopping points from the
    plan);
  * emit instrumented bytecode: every stopping point n is guarded by
    ``BPCHK n`` (record n, trap when armed) placed before the
    expression it names; calls are preceded by ``SETIP``; prologues and
    epilogues link and unlink the shadow frame.

With instrumentation off, the same layout is kept but no debug opcodes
are emitted, so program output must be identical when no flags are set.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .isa import (
    Assembler, K_F32, K_F64, K_I8, K_I16, K_W32, Label, Reloc,
)
from .minic import ast
from .minic.sema import FuncInfo, SemSym, SemaUnit
from .minic.stops import ENTRY, StopPlan, StopPoint
from .minic.types import (
    ArrayCT, CType, DOUBLE, EnumCT, FLOAT, FuncCT, INT, PrimCT, PtrCT,
    QualCT, RecordCT, UNSIGNED, VOID, unqual,
)
from .symtab import (
    ArrayType, ConstType, Coordinate, EnumConstSym, EnumItem, EnumType,
    FieldRec, FloatType, FunctionType, GlobalSym, IntType, Item, LocalSym,
    ParamSym, PointerType, SPoint, StaticSym, StructType, SymModule,
    TypeNode, TypedefSym, UnionType, UnsignedType, VoidType, VolatileType,
    validate_module,
)

SHADOW_SIZE = 20
SHADOW_UP, SHADOW_DOWN, SHADOW_FUNC, SHADOW_MODULE, SHADOW_IP = 0, 4, 8, 12, 16


class CodegenError(Exception):
    pass


@dataclass(frozen=True)
class ParamSlot:
    offset: int
    kind: int          # LD/ST kind used to store the argument


@dataclass
class FuncEntry:
    name: str
    uid: int
    uname: int
    entry: int         # unit-relative code offset
    frame_size: int
    params: list[ParamSlot]
    is_static: bool


@dataclass(frozen=True)
class VecEntry:
    """One address-vector slot: where a static/global lives."""

    kind: str          # 'data' | 'func' | 'xfunc'
    value: int = 0     # data offset or local function index
    name: str = ""     # external function name


@dataclass
class ObjectModule:
    uname: int
    source_file: str
    code: bytes
    code_relocs: list[Reloc]
    data: bytes
    data_relocs: list[int]           # offsets of 4-byte slots needing +data_base
    functions: list[FuncEntry]
    vector: list[VecEntry]
    spoint_count: int
    symfile_name: str
    exports: dict[str, tuple[str, int]] = field(default_factory=dict)
    symmodule: SymModule | None = None   # populated on compile; not serialized


def _align(value: int, align: int) -> int:
    return value + (-value) % align


def load_kind(ct: CType) -> int:
    u = unqual(ct)
    if isinstance(u, PrimCT):
        return {"char": K_I8, "short": K_I16, "int": K_W32, "unsigned": K_W32,
                "float": K_F32, "double": K_F64}[u.kind]
    if isinstance(u, (PtrCT, EnumCT)):
        return K_W32
    raise CodegenError(f"no load kind for {u}")


def _is_float(ct: CType) -> bool:
    u = unqual(ct)
    return isinstance(u, PrimCT) and u.kind in ("float", "double")


def _is_unsigned(ct: CType) -> bool:
    u = unqual(ct)
    return (isinstance(u, PrimCT) and u.kind == "unsigned") or isinstance(u, PtrCT)


# ---------------------------------------------------------------------------
# Symbol-table module construction.


class _TypeRegistry:
    def __init__(self):
        self.items: list[Item] = []
        self.next_uid = 1
        self._memo: dict = {}
        self._nodes: dict[int, TypeNode | None] = {}

    def take_uid(self) -> int:
        uid = self.next_uid
        self.next_uid += 1
        return uid

    def add_node(self, uid: int, node) -> None:
        self._nodes[uid] = node
        self.items.append(Item(uid, node))

    def _key(self, ct: CType):
        u = unqual(ct) if not isinstance(ct, QualCT) else ct
        if isinstance(u, PrimCT):
            return ("prim", u.kind)
        if isinstance(u, (RecordCT, EnumCT)):
            return ("tagged", id(u))
        return None  # computed after referents are known

    def uid_of(self, ct: CType) -> int:
        if isinstance(ct, QualCT):
            ref = self.uid_of(ct.ref)
            key = (ct.qual, ref)
            if key in self._memo:
                return self._memo[key]
            uid = self.take_uid()
            self._memo[key] = uid
            cls = ConstType if ct.qual == "const" else VolatileType
            self.add_node(uid, cls(ct.size, ct.align, ref))
            return uid
        u = unqual(ct)
        if isinstance(u, PrimCT):
            key = ("prim", u.kind)
            if key in self._memo:
                return self._memo[key]
            uid = self.take_uid()
            self._memo[key] = uid
            if u.kind == "void":
                node: TypeNode = VoidType(0, 1)
            elif u.kind == "unsigned":
                node = UnsignedType(u.size, u.align)
            elif u.kind in ("float", "double"):
                node = FloatType(u.size, u.align)
            else:
                node = IntType(u.size, u.align)
            self.add_node(uid, node)
            return uid
        if isinstance(u, PtrCT):
            ref = self.uid_of(u.ref)
            key = ("ptr", ref)
            if key in self._memo:
                return self._memo[key]
            uid = self.take_uid()
            self._memo[key] = uid
            self.add_node(uid, PointerType(4, 4, ref))
            return uid
        if isinstance(u, ArrayCT):
            elem = self.uid_of(u.elem)
            key = ("arr", elem, u.nelems)
            if key in self._memo:
                return self._memo[key]
            uid = self.take_uid()
            self._memo[key] = uid
            self.add_node(uid, ArrayType(u.size, u.align, elem, u.nelems))
            return uid
        if isinstance(u, FuncCT):
            ret = self.uid_of(u.ret)
            formals = tuple(self.uid_of(p) for p in u.params)
            key = ("fn", ret, formals)
            if key in self._memo:
                return self._memo[key]
            uid = self.take_uid()
            self._memo[key] = uid
            self.add_node(uid, FunctionType(0, 1, ret, formals))
            return uid
        if isinstance(u, EnumCT):
            key = ("tagged", id(u))
            if key in self._memo:
                return self._memo[key]
            uid = self.take_uid()
            self._memo[key] = uid
            ids = tuple(EnumItem(n, v) for n, v in u.items)
            self.add_node(uid, EnumType(u.size, u.align, u.tag or "", ids))
            return uid
        if isinstance(u, RecordCT):
            key = ("tagged", id(u))
            if key in self._memo:
                return self._memo[key]
            # Reserve the uid before visiting members so self-referential
            # records resolve to it.
            uid = self.take_uid()
            self._memo[key] = uid
            marker = len(self.items)
            fields = tuple(
                FieldRec(m.name, self.uid_of(m.ctype), m.offset, m.bitsize, m.lsb)
                for m in u.members)
            cls = StructType if u.kind == "struct" else UnionType
            node = cls(u.size, u.align, u.tag or "", fields)
            self._nodes[uid] = node
            self.items.insert(marker, Item(uid, node))
            return uid
        raise CodegenError(f"cannot map type {u} into the symbol table")


def _symbol_node(sym: SemSym, uname: int, type_uid: int, uplink: int):
    args = (sym.name, sym.uid, uname, sym.coord, type_uid, uplink)
    if sym.kind == "global":
        return GlobalSym(*args, index=sym.index)
    if sym.kind == "static":
        return StaticSym(*args, index=sym.index)
    if sym.kind == "local":
        return LocalSym(*args, offset=sym.offset)
    if sym.kind == "param":
        return ParamSym(*args, offset=sym.offset)
    if sym.kind == "typedef":
        return TypedefSym(*args)
    if sym.kind == "enumconst":
        return EnumConstSym(*args, value=sym.value)
    raise CodegenError(f"unexpected symbol kind {sym.kind}")


def build_symmodule(sem: SemaUnit, plan: StopPlan, uname: int) -> SymModule:
    """Assign uids and produce the unit's symbol-table module.

    Precondition: frame offsets and address-vector indices are assigned.
    """
    reg = _TypeRegistry()
    for sym in sem.all_syms:
        sym.uid = 0
    # Reserve type uids on demand, then symbol uids in creation order.
    for sym in sem.all_syms:
        type_uid = reg.uid_of(sym.ctype)
        sym.uid = reg.take_uid()
        uplink = sym.uplink.uid if sym.uplink is not None else 0
        if sym.uplink is not None and sym.uplink.uid == 0:
            raise CodegenError(f"uplink of {sym.name!r} was not yet assigned")
        reg.add_node(sym.uid, _symbol_node(sym, uname, type_uid, uplink))
    spoints = tuple(
        SPoint(p.src, p.tail.uid if p.tail is not None else 0)
        for p in plan.points)
    globals_uid = sem.globals_tail.uid if sem.globals_tail is not None else 0
    module = SymModule(sem.ast.file, uname, reg.next_uid - 1,
                       tuple(reg.items), globals_uid, spoints)
    validate_module(module)
    return module


# ---------------------------------------------------------------------------
# Layout.


def layout_frame(info: FuncInfo) -> tuple[int, list[ParamSlot]]:
    offset = SHADOW_SIZE
    slots = []
    for sym in info.frame_syms:
        u = unqual(sym.ctype)
        offset = _align(offset, max(1, u.align))
        sym.offset = offset
        if sym.kind == "param":
            slots.append(ParamSlot(offset, load_kind(sym.ctype)))
        offset += u.size
    return _align(offset, 8), slots


def plan_vector(sem: SemaUnit) -> list[SemSym]:
    """Static/global symbols in globals-chain order (tail first); assigns
    each its vector index."""
    chain: list[SemSym] = []
    sym = sem.globals_tail
    while sym is not None:
        if sym.kind in ("static", "global"):
            sym.index = len(chain)
            chain.append(sym)
        sym = sym.uplink
    return chain


# ---------------------------------------------------------------------------
# Code generation proper.


class _FuncCompiler:
    def __init__(self, unit: "_UnitCompiler", info: FuncInfo):
        self.unit = unit
        self.info = info
        self.asm = Assembler()
        self.cur_point = 0
        self.instrument = unit.instrument

    # -- helpers ------------------------------------------------------------

    def emit(self, op: str, *args) -> None:
        self.asm.emit(op, *args)

    def point_index(self, coord: Coordinate) -> int:
        key = (coord.y, coord.x)
        idx = self.unit.point_by_coord.get(key)
        if idx is None:
            raise CodegenError(f"no stopping point at {coord}")
        return idx

    def bpcheck(self, coord: Coordinate) -> int:
        idx = self.point_index(coord)
        if self.instrument:
            self.emit("BPCHK", idx)
        self.cur_point = idx
        return idx

    def data_ref(self, offset: int) -> Reloc:
        return Reloc(0, "data", value=offset)

    # -- addresses ------------------------------------------------------------

    def lvalue_addr(self, expr: ast.Expr) -> None:
        if isinstance(expr, ast.NameRef):
            sym = expr.sym
            if sym.kind in ("local", "param"):
                self.emit("LOCAL", sym.offset)
            elif sym.kind in ("global", "static"):
                self.emit("PUSH", self.data_ref(self.unit.global_offset(sym)))
            else:
                raise CodegenError(f"{sym.name} is not addressable")
            return
        if isinstance(expr, ast.Unary) and expr.op == "*":
            self.rvalue(expr.operand)
            return
        if isinstance(expr, ast.Index):
            self.rvalue(expr.base)
            self.rvalue(expr.index)
            self.convert(expr.index.ctype, INT)
            elem = unqual(decayed_ref(expr.base.ctype))
            if elem.size != 1:
                self.emit("PUSH", elem.size)
                self.emit("MUL")
            self.emit("ADD")
            return
        if isinstance(expr, ast.Member):
            if expr.arrow:
                self.rvalue(expr.base)
            else:
                self.lvalue_addr(expr.base)
            if expr.fld.offset:
                self.emit("PUSH", expr.fld.offset)
                self.emit("ADD")
            return
        if isinstance(expr, ast.StrLit):
            self.emit("PUSH", self.data_ref(self.unit.string_offset(expr.data)))
            return
        raise CodegenError(f"expression at {expr.coord} is not an lvalue")

    # -- values -----------------------------------------------------------------

    def rvalue(self, expr: ast.Expr) -> None:
        if isinstance(expr, ast.IntLit):
            self.emit("PUSH", expr.value & 0xFFFFFFFF)
            return
        if isinstance(expr, ast.FloatLit):
            value = expr.value
            if expr.single:
                value = struct.unpack("<f", struct.pack("<f", value))[0]
            self.emit("PUSHF", value)
            return
        if isinstance(expr, ast.StrLit):
            self.emit("PUSH", self.data_ref(self.unit.string_offset(expr.data)))
            return
        if isinstance(expr, ast.NameRef):
            sym = expr.sym
            if sym.kind == "enumconst":
                self.emit("PUSH", sym.value & 0xFFFFFFFF)
                return
            if isinstance(unqual(sym.ctype), ArrayCT):
                self.lvalue_addr(expr)      # arrays decay to their address
                return
            self.lvalue_addr(expr)
            self.emit("LD", load_kind(sym.ctype))
            return
        if isinstance(expr, (ast.Index,)) or (isinstance(expr, ast.Unary) and expr.op == "*"):
            self.lvalue_addr(expr)
            if isinstance(unqual(expr.ctype), ArrayCT):
                return
            self.emit("LD", load_kind(expr.ctype))
            return
        if isinstance(expr, ast.Member):
            self.lvalue_addr(expr)
            if expr.fld.bitsize:
                unit_kind = load_kind(expr.fld.ctype)
                self.emit("LD", unit_kind)
                if expr.fld.lsb:
                    self.emit("PUSH", expr.fld.lsb)
                    self.emit("SHRU")
                self.emit("PUSH", (1 << expr.fld.bitsize) - 1)
                self.emit("AND")
                return
            if isinstance(unqual(expr.ctype), ArrayCT):
                return
            self.emit("LD", load_kind(expr.ctype))
            return
        if isinstance(expr, ast.Unary):
            self.unary(expr)
            return
        if isinstance(expr, ast.Postfix):
            self.postfix(expr)
            return
        if isinstance(expr, ast.Binary):
            self.binary(expr)
            return
        if isinstance(expr, ast.Assign):
            self.assign(expr)
            return
        if isinstance(expr, ast.Call):
            self.call(expr)
            return
        raise CodegenError(f"unhandled expression at {expr.coord}")

    def convert(self, src: CType | None, dst: CType) -> None:
        if src is None:
            return
        s, d = unqual(src), unqual(dst)
        if isinstance(s, ArrayCT):
            return                      # already an address
        if _is_float(s) and not _is_float(d):
            self.emit("F2U" if _is_unsigned(d) else "F2I")
        elif not _is_float(s) and _is_float(d):
            self.emit("U2F" if _is_unsigned(s) else "I2F")

    def unary(self, expr: ast.Unary) -> None:
        op = expr.op
        if op == "&":
            self.lvalue_addr(expr.operand)
            return
        if op in ("++", "--"):
            # prefix: addr addr addr | load | bump | store | reload
            self.lvalue_addr(expr.operand)
            self.emit("DUP")
            self.emit("DUP")
            kind = load_kind(expr.operand.ctype)
            self.emit("LD", kind)
            self.emit("PUSH", self._step_size(expr.operand.ctype))
            self.emit("ADD" if op == "++" else "SUB")
            self.emit("ST", kind)
            self.emit("LD", kind)
            return
        self.rvalue(expr.operand)
        if op == "-":
            self.convert(expr.operand.ctype, expr.ctype)
            self.emit("FNEG" if _is_float(expr.ctype) else "NEG")
        elif op == "~":
            self.emit("NOTB")
        elif op == "!":
            self.emit("NOTL")
        else:
            raise CodegenError(f"unhandled unary {op}")

    def postfix(self, expr: ast.Postfix) -> None:
        # addr addr | load | dup -> stash | bump | store | unstash
        self.lvalue_addr(expr.operand)
        self.emit("DUP")
        kind = load_kind(expr.operand.ctype)
        self.emit("LD", kind)
        self.emit("DUP")
        self.emit("STASH")
        self.emit("PUSH", self._step_size(expr.operand.ctype))
        self.emit("ADD" if expr.op == "++" else "SUB")
        self.emit("ST", kind)
        self.emit("UNSTASH")

    def _step_size(self, ct: CType) -> int:
        u = unqual(ct)
        if isinstance(u, PtrCT):
            return unqual(u.ref).size
        return 1

    def binary(self, expr: ast.Binary) -> None:
        op = expr.op
        if op in ("&&", "||"):
            done = Label()
            take_rhs_failed = Label()
            self.rvalue(expr.left)
            self.emit("JZ" if op == "&&" else "JNZ", take_rhs_failed)
            if self.instrument:
                self.emit("BPCHK", self.point_index(expr.right.coord))
            saved = self.cur_point
            self.cur_point = self.point_index(expr.right.coord)
            self.rvalue(expr.right)
            self.cur_point = saved
            self.emit("BOOL")
            self.emit("JMP", done)
            self.asm.place(take_rhs_failed)
            self.emit("PUSH", 0 if op == "&&" else 1)
            self.asm.place(done)
            return

        lt, rt = expr.left.ctype, expr.right.ctype
        if expr.arith == "ptr":
            if isinstance(unqual(decay_ct(lt)), PtrCT):
                ptr_expr, int_expr = expr.left, expr.right
                self.rvalue(ptr_expr)
                self.rvalue(int_expr)
            else:
                # int + ptr: evaluate in source order, then swap
                self.rvalue(expr.left)
                self.rvalue(expr.right)
                self.emit("SWAP")
                ptr_expr, int_expr = expr.right, expr.left
            scale = unqual(decayed_ref(ptr_expr.ctype)).size
            if scale != 1:
                self.emit("PUSH", scale)
                self.emit("MUL")
            self.emit("ADD" if op == "+" else "SUB")
            return
        if expr.arith == "ptrdiff":
            self.rvalue(expr.left)
            self.rvalue(expr.right)
            self.emit("SUB")
            scale = unqual(decayed_ref(lt)).size
            if scale != 1:
                self.emit("PUSH", scale)
                self.emit("DIVS")
            return

        is_cmp = op in ("==", "!=", "<", ">", "<=", ">=")
        if expr.arith == "float":
            common: CType = DOUBLE
        elif expr.arith == "uint":
            common = UNSIGNED
        else:
            common = INT
        self.rvalue(expr.left)
        self.convert(lt, common)
        self.rvalue(expr.right)
        self.convert(rt, common)
        table = {
            ("+", "float"): "FADD", ("-", "float"): "FSUB",
            ("*", "float"): "FMUL", ("/", "float"): "FDIV",
            ("==", "float"): "FEQ", ("!=", "float"): "FNE",
            ("<", "float"): "FLT", ("<=", "float"): "FLE",
            (">", "float"): "FGT", (">=", "float"): "FGE",
        }
        if expr.arith == "float":
            self.emit(table[(op, "float")])
            return
        signed = expr.arith != "uint"
        int_table = {
            "+": "ADD", "-": "SUB", "*": "MUL",
            "/": "DIVS" if signed else "DIVU",
            "%": "REMS" if signed else "REMU",
            "&": "AND", "|": "OR", "^": "XOR",
            "<<": "SHL", ">>": "SHRS" if signed else "SHRU",
            "==": "EQ", "!=": "NE",
            "<": "LTS" if signed else "LTU",
            "<=": "LES" if signed else "LEU",
            ">": "GTS" if signed else "GTU",
            ">=": "GES" if signed else "GEU",
        }
        self.emit(int_table[op])

    def assign(self, expr: ast.Assign) -> None:
        target = expr.target
        bitfield = (isinstance(target, ast.Member) and target.fld is not None
                    and target.fld.bitsize != 0)
        if expr.op == "=":
            self.lvalue_addr(target)
            self.emit("DUP")
            if bitfield:
                self._store_bitfield_value(expr, target)
            else:
                self.rvalue(expr.value)
                self.convert(expr.value.ctype, target.ctype)
                kind = load_kind(target.ctype)
                self.emit("ST", kind)
                self.emit("LD", kind)
            return
        # compound assignment: load, operate, store, reload
        if bitfield:
            raise CodegenError("compound assignment to bit fields is not supported")
        self.lvalue_addr(target)
        self.emit("DUP")
        self.emit("DUP")
        kind = load_kind(target.ctype)
        self.emit("LD", kind)
        tu = unqual(target.ctype)
        base_op = expr.op[0]
        if isinstance(tu, PtrCT):
            self.rvalue(expr.value)
            self.convert(expr.value.ctype, INT)
            scale = unqual(tu.ref).size
            if scale != 1:
                self.emit("PUSH", scale)
                self.emit("MUL")
            self.emit("ADD" if base_op == "+" else "SUB")
        elif _is_float(tu):
            self.convert(tu, DOUBLE)
            self.rvalue(expr.value)
            self.convert(expr.value.ctype, DOUBLE)
            self.emit({"+": "FADD", "-": "FSUB", "*": "FMUL", "/": "FDIV"}[base_op])
        else:
            self.rvalue(expr.value)
            self.convert(expr.value.ctype, tu)
            signed = not _is_unsigned(tu)
            self.emit({"+": "ADD", "-": "SUB", "*": "MUL",
                       "/": "DIVS" if signed else "DIVU"}[base_op])
        self.emit("ST", kind)
        self.emit("LD", kind)

    def _store_bitfield_value(self, expr: ast.Assign, target: ast.Member) -> None:
        # stack: [addr, addr]; leaves the re-extracted field value
        fld = target.fld
        kind = load_kind(fld.ctype)
        mask = (1 << fld.bitsize) - 1
        self.rvalue(expr.value)
        self.convert(expr.value.ctype, fld.ctype)
        self.emit("STASH")
        self.emit("DUP")
        self.emit("LD", kind)
        self.emit("PUSH", ~(mask << fld.lsb) & 0xFFFFFFFF)
        self.emit("AND")
        self.emit("UNSTASH")
        self.emit("PUSH", mask)
        self.emit("AND")
        if fld.lsb:
            self.emit("PUSH", fld.lsb)
            self.emit("SHL")
        self.emit("OR")
        self.emit("ST", kind)
        self.emit("LD", kind)
        if fld.lsb:
            self.emit("PUSH", fld.lsb)
            self.emit("SHRU")
        self.emit("PUSH", mask)
        self.emit("AND")

    def call(self, expr: ast.Call) -> None:
        if isinstance(expr.sym, str):   # builtin
            name = expr.sym.split(":", 1)[1]
            for arg in expr.args:
                self.rvalue(arg)
                self.convert(arg.ctype, INT)
            self.emit({"getchar": "GETC", "putchar": "PUTC",
                       "print_int": "PRINTI"}[name])
            return
        fsym: SemSym = expr.sym
        ftype: FuncCT = unqual(fsym.ctype)
        for arg, pt in zip(expr.args, ftype.params):
            self.rvalue(arg)
            self.convert(arg.ctype, pt)
        if self.instrument:
            self.emit("SETIP", self.cur_point)
        self.emit("CALL", self.unit.func_ref(fsym))

    # -- statements -------------------------------------------------------------

    def rvalue_drop(self, expr: ast.Expr) -> None:
        self.rvalue(expr)
        self.emit("DROP")

    def statement(self, stmt) -> None:
        if isinstance(stmt, ast.Block):
            for inner in stmt.stmts:
                self.statement(inner)
        elif isinstance(stmt, ast.DeclStmt):
            for decl in stmt.decls:
                if decl.init is not None:
                    self.emit("LOCAL", decl.sym.offset)
                    self.rvalue(decl.init)
                    self.convert(decl.init.ctype, decl.sym.ctype)
                    self.emit("ST", load_kind(decl.sym.ctype))
        elif isinstance(stmt, ast.ExprStmt):
            self.bpcheck(stmt.expr.coord)
            self.rvalue_drop(stmt.expr)
        elif isinstance(stmt, ast.EmptyStmt):
            self.bpcheck(stmt.coord)
        elif isinstance(stmt, ast.IfStmt):
            self.bpcheck(stmt.cond.coord)
            self.rvalue(stmt.cond)
            otherwise = Label()
            self.emit("JZ", otherwise)
            self.statement(stmt.then)
            if stmt.els is not None:
                done = Label()
                self.emit("JMP", done)
                self.asm.place(otherwise)
                self.statement(stmt.els)
                self.asm.place(done)
            else:
                self.asm.place(otherwise)
        elif isinstance(stmt, ast.WhileStmt):
            top = Label()
            done = Label()
            self.asm.place(top)
            self.bpcheck(stmt.cond.coord)
            self.rvalue(stmt.cond)
            self.emit("JZ", done)
            self.statement(stmt.body)
            self.emit("JMP", top)
            self.asm.place(done)
        elif isinstance(stmt, ast.ForStmt):
            if stmt.init is not None:
                self.bpcheck(stmt.init.coord)
                self.rvalue_drop(stmt.init)
            top = Label()
            done = Label()
            self.asm.place(top)
            if stmt.cond is not None:
                self.bpcheck(stmt.cond.coord)
                self.rvalue(stmt.cond)
                self.emit("JZ", done)
            self.statement(stmt.body)
            if stmt.step is not None:
                self.bpcheck(stmt.step.coord)
                self.rvalue_drop(stmt.step)
            self.emit("JMP", top)
            self.asm.place(done)
        elif isinstance(stmt, ast.ReturnStmt):
            if stmt.expr is not None:
                self.bpcheck(stmt.expr.coord)
                self.rvalue(stmt.expr)
                ret = unqual(self.info.sym.ctype).ret
                self.convert(stmt.expr.ctype, ret)
                if self.instrument:
                    self.emit("SPOP")
                self.emit("RETV")
            else:
                if self.instrument:
                    self.emit("SPOP")
                self.emit("RET0")
        else:
            raise CodegenError(f"unhandled statement {stmt!r}")

    def compile(self) -> Assembler:
        info = self.info
        if self.instrument:
            self.emit("SPUSH", info.sym.uid, self.unit.uname)
            entry_idx = self.point_index(info.node.body.coord)
            self.emit("BPCHK", entry_idx)
            self.cur_point = entry_idx
        for stmt in info.node.body.stmts:
            self.statement(stmt)
        if self.instrument:
            self.emit("SPOP")
        self.emit("RET0")
        return self.asm


def decay_ct(ct: CType) -> CType:
    u = unqual(ct)
    if isinstance(u, ArrayCT):
        return PtrCT(u.elem)
    return u


def decayed_ref(ct: CType) -> CType:
    u = decay_ct(ct)
    if not isinstance(u, PtrCT):
        raise CodegenError(f"expected a pointer, got {u}")
    return u.ref


class _UnitCompiler:
    def __init__(self, sem: SemaUnit, plan: StopPlan, uname: int, instrument: bool):
        self.sem = sem
        self.plan = plan
        self.uname = uname
        self.instrument = instrument
        self.point_by_coord = {(p.src.y, p.src.x): p.index for p in plan.points}
        self.global_offsets: dict[int, int] = {}   # id(sym) -> data offset
        self.data = bytearray()
        self.data_relocs: list[int] = []
        self.strings: dict[bytes, int] = {}
        self.func_index: dict[int, int] = {}       # id(sym) -> local index
        self.defined_funcs = [f for f in sem.functions]

    def global_offset(self, sym: SemSym) -> int:
        return self.global_offsets[id(sym)]

    def string_offset(self, data: bytes) -> int:
        if data not in self.strings:
            offset = len(self.data)
            self.data.extend(data)
            self.data.append(0)
            self.strings[data] = offset
        return self.strings[data]

    def func_ref(self, sym: SemSym) -> Reloc:
        if id(sym) in self.func_index:
            return Reloc(0, "func", value=self.func_index[id(sym)])
        return Reloc(0, "xfunc", name=sym.name)

    def layout_globals(self) -> None:
        for sym in self.sem.file_syms:
            if sym.kind not in ("global", "static") or sym.is_function():
                continue
            u = unqual(sym.ctype)
            offset = _align(len(self.data), max(1, u.align))
            self.data.extend(b"\0" * (offset - len(self.data)))
            self.global_offsets[id(sym)] = offset
            self.data.extend(b"\0" * u.size)
        # initializers
        for decl in self.sem.ast.decls:
            if not isinstance(decl, ast.Decl) or decl.init is None or decl.sym is None:
                continue
            sym = decl.sym
            if id(sym) not in self.global_offsets:
                continue
            offset = self.global_offsets[id(sym)]
            u = unqual(sym.ctype)
            init = decl.init
            if isinstance(init, ast.StrLit):
                if isinstance(u, ArrayCT):
                    self.data[offset:offset + len(init.data)] = init.data
                else:
                    pool = self.string_offset(init.data)
                    struct.pack_into("<I", self.data, offset, pool)
                    self.data_relocs.append(offset)
            elif isinstance(init, ast.FloatLit):
                if u.size == 4:
                    struct.pack_into("<f", self.data, offset, init.value)
                else:
                    struct.pack_into("<d", self.data, offset, init.value)
            elif isinstance(init, ast.IntLit):
                raw = init.value & ((1 << (8 * u.size)) - 1)
                self.data[offset:offset + u.size] = raw.to_bytes(u.size, "little")

    def compile(self, symfile_name: str) -> ObjectModule:
        frame_info: list[tuple[int, list[ParamSlot]]] = []
        for info in self.sem.functions:
            frame_info.append(layout_frame(info))
        vector_syms = plan_vector(self.sem)
        self.layout_globals()
        symmodule = build_symmodule(self.sem, self.plan, self.uname)

        for i, info in enumerate(self.sem.functions):
            self.func_index[id(info.sym)] = i

        code = bytearray()
        code_relocs: list[Reloc] = []
        functions: list[FuncEntry] = []
        for info, (frame_size, slots) in zip(self.sem.functions, frame_info):
            entry = len(code)
            asm = _FuncCompiler(self, info).compile()
            body, relocs = asm.assemble(entry)
            code.extend(body)
            code_relocs.extend(relocs)
            functions.append(FuncEntry(
                name=info.sym.name, uid=info.sym.uid, uname=self.uname,
                entry=entry, frame_size=frame_size, params=slots,
                is_static=info.sym.kind == "static"))

        vector: list[VecEntry] = []
        for sym in vector_syms:
            if sym.is_function():
                if id(sym) in self.func_index:
                    vector.append(VecEntry("func", value=self.func_index[id(sym)]))
                else:
                    vector.append(VecEntry("xfunc", name=sym.name))
            else:
                vector.append(VecEntry("data", value=self.global_offset(sym)))

        exports: dict[str, tuple[str, int]] = {}
        for sym in self.sem.file_syms:
            if sym.kind != "global":
                continue
            if sym.is_function():
                if id(sym) in self.func_index:
                    exports[sym.name] = ("func", self.func_index[id(sym)])
            else:
                exports[sym.name] = ("data", self.global_offset(sym))

        return ObjectModule(
            uname=self.uname,
            source_file=self.sem.ast.file,
            code=bytes(code),
            code_relocs=code_relocs,
            data=bytes(self.data),
            data_relocs=self.data_relocs,
            functions=functions,
            vector=vector,
            spoint_count=len(self.plan.points),
            symfile_name=symfile_name,
            exports=exports,
            symmodule=symmodule,
        )


def unit_name(file: str, source: str | bytes, nonce: str = "") -> int:
    """Deterministic 32-bit unit name: a digest of the file name, the
    source text, and an optional nonce; never zero (zero terminates the
    shadow-frame chain)."""
    import hashlib
    if isinstance(source, str):
        source = source.encode("utf-8")
    h = hashlib.blake2s(digest_size=4)
    h.update(file.encode("utf-8"))
    h.update(b"\0")
    h.update(source)
    if nonce:
        h.update(b"\0" + nonce.encode("utf-8"))
    value = int.from_bytes(h.digest(), "big")
    return value or 1


def compile_unit(sem: SemaUnit, plan: StopPlan, uname: int, *,
                 instrument: bool = True,
                 symfile_name: str | None = None) -> ObjectModule:
    if symfile_name is None:
        symfile_name = f"{uname:08x}.sym"
    return _UnitCompiler(sem, plan, uname, instrument).compile(symfile_name)
