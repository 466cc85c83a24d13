"""Symbol-table model: types, symbols, modules, and visibility queries.

A compilation unit's debug information is a single immutable record tree.
A SymModule owns a flat sequence of items (symbols and types) keyed by
small integer uids, the uid of the last file-scope global/static symbol,
and the table of stopping points.  Symbols link to the previous visible
declaration through their ``uplink`` uid; following uplinks from any
symbol enumerates every identifier visible at that symbol's point of
declaration, so the symbols of a unit form an inverted tree.

uid 0 is reserved to mean "none" wherever a uid is optional (uplink,
spoint tail, module globals).  Real uids start at 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence, Union


class SymtabError(Exception):
    """Base class for symbol-table failures."""


class ConstructionError(SymtabError):
    """A record was built with fields that violate its own invariants."""


class ValidationError(SymtabError):
    """A structurally well-formed module violates cross-item invariants."""


class LookupError_(SymtabError):
    """A uid or name query could not be satisfied."""


@dataclass(frozen=True)
class Coordinate:
    """Source position: file name, 1-based byte column x, 1-based line y.

    A coordinate with empty file and/or zero x and/or zero y is a wildcard
    pattern; wildcards are legal as query patterns only and never stored
    in a module.
    """

    file: str
    x: int
    y: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ConstructionError(f"negative coordinate component ({self.x},{self.y})")

    def is_real(self) -> bool:
        return bool(self.file) and self.x >= 1 and self.y >= 1

    def matches(self, candidate: "Coordinate") -> bool:
        """Wildcard match: empty file / zero x / zero y match anything."""
        if self.file and self.file != candidate.file:
            return False
        if self.x and self.x != candidate.x:
            return False
        if self.y and self.y != candidate.y:
            return False
        return True

    def __str__(self) -> str:
        return f"{self.file or '*'}:{self.y or '*'}.{self.x or '*'}"


WILDCARD = Coordinate("", 0, 0)


@dataclass(frozen=True)
class EnumItem:
    id: str
    value: int


@dataclass(frozen=True)
class FieldRec:
    """One struct/union member: byte offset plus bitfield position.

    bitsize and lsb are both zero for plain members and both nonzero for
    bit fields.
    """

    id: str
    type: int
    offset: int
    bitsize: int
    lsb: int

    def __post_init__(self):
        if self.offset < 0 or self.bitsize < 0 or self.lsb < 0:
            raise ConstructionError(f"negative field layout in {self.id!r}")
        if self.bitsize == 0 and self.lsb != 0:
            # lsb is the raw shift count, so a bit field packed at bit 0 has
            # lsb 0; bitsize alone marks bit fields.  lsb without bitsize is
            # meaningless.
            raise ConstructionError(f"field {self.id!r} has lsb without bitsize")


# ---------------------------------------------------------------------------
# Types.  All carry size and align in bytes.


@dataclass(frozen=True)
class TypeNode:
    size: int
    align: int

    def __post_init__(self):
        if self.size < 0:
            raise ConstructionError("type size must be >= 0")
        if self.align < 1:
            raise ConstructionError("type align must be >= 1")


@dataclass(frozen=True)
class IntType(TypeNode):
    pass


@dataclass(frozen=True)
class UnsignedType(TypeNode):
    pass


@dataclass(frozen=True)
class FloatType(TypeNode):
    pass


@dataclass(frozen=True)
class VoidType(TypeNode):
    def __post_init__(self):
        super().__post_init__()
        if self.size != 0:
            raise ConstructionError("void has size 0")


@dataclass(frozen=True)
class PointerType(TypeNode):
    type: int


@dataclass(frozen=True)
class EnumType(TypeNode):
    tag: str
    ids: tuple[EnumItem, ...]

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "ids", tuple(self.ids))
        names = [e.id for e in self.ids]
        if len(set(names)) != len(names):
            raise ConstructionError(f"duplicate enumerator in enum {self.tag!r}")


@dataclass(frozen=True)
class StructType(TypeNode):
    tag: str
    fields: tuple[FieldRec, ...]

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "fields", tuple(self.fields))


@dataclass(frozen=True)
class UnionType(TypeNode):
    tag: str
    fields: tuple[FieldRec, ...]

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "fields", tuple(self.fields))


@dataclass(frozen=True)
class ArrayType(TypeNode):
    type: int
    nelems: int

    def __post_init__(self):
        super().__post_init__()
        if self.nelems < 0:
            raise ConstructionError("array nelems must be >= 0")


@dataclass(frozen=True)
class FunctionType(TypeNode):
    type: int
    formals: tuple[int, ...]

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "formals", tuple(self.formals))


@dataclass(frozen=True)
class ConstType(TypeNode):
    type: int


@dataclass(frozen=True)
class VolatileType(TypeNode):
    type: int


# Tags in grammar order; shared by the serializer and the tests.
TYPE_CONSTRUCTORS: tuple[type, ...] = (
    IntType, UnsignedType, FloatType, VoidType, PointerType, EnumType,
    StructType, UnionType, ArrayType, FunctionType, ConstType, VolatileType,
)


# ---------------------------------------------------------------------------
# Symbols.  Attributes common to all constructors come first so that
# Symbol subclasses read Sym(id, uid, module, src, type, uplink, extra...).


@dataclass(frozen=True)
class Symbol:
    id: str
    uid: int
    module: int
    src: Coordinate
    type: int
    uplink: int

    def __post_init__(self):
        if self.uid < 1:
            raise ConstructionError(f"symbol {self.id!r} needs uid >= 1")
        if self.type < 1:
            raise ConstructionError(f"symbol {self.id!r} needs a type uid")
        if self.uplink < 0:
            raise ConstructionError(f"symbol {self.id!r} has negative uplink")


@dataclass(frozen=True)
class StaticSym(Symbol):
    index: int

    def __post_init__(self):
        super().__post_init__()
        if self.index < 0:
            raise ConstructionError(f"static {self.id!r} has negative index")


@dataclass(frozen=True)
class GlobalSym(Symbol):
    index: int

    def __post_init__(self):
        super().__post_init__()
        if self.index < 0:
            raise ConstructionError(f"global {self.id!r} has negative index")


@dataclass(frozen=True)
class TypedefSym(Symbol):
    pass


@dataclass(frozen=True)
class LocalSym(Symbol):
    offset: int


@dataclass(frozen=True)
class ParamSym(Symbol):
    offset: int


@dataclass(frozen=True)
class EnumConstSym(Symbol):
    value: int


SYMBOL_CONSTRUCTORS: tuple[type, ...] = (
    StaticSym, GlobalSym, TypedefSym, LocalSym, ParamSym, EnumConstSym,
)


@dataclass(frozen=True)
class SPoint:
    """One stopping point: its source coordinate and the uid of the last
    symbol visible there (0 when nothing is in scope)."""

    src: Coordinate
    tail: int

    def __post_init__(self):
        if self.tail < 0:
            raise ConstructionError("spoint tail must be >= 0")


Node = Union[Symbol, TypeNode]


@dataclass(frozen=True)
class Item:
    uid: int
    node: Node

    def __post_init__(self):
        if self.uid < 1:
            raise ConstructionError("item uid must be >= 1")
        if not isinstance(self.node, (Symbol, TypeNode)):
            raise ConstructionError(f"item {self.uid} holds {type(self.node).__name__}")


@dataclass(frozen=True)
class SymModule:
    """Complete symbol table for one compilation unit."""

    file: str
    uname: int
    nuids: int
    items: tuple[Item, ...]
    globals: int
    spoints: tuple[SPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "spoints", tuple(self.spoints))
        if self.nuids < 0:
            raise ConstructionError("nuids must be >= 0")
        if self.globals < 0:
            raise ConstructionError("globals must be >= 0")
        if self.uname < 0 or self.uname > 0xFFFFFFFF:
            raise ConstructionError("uname must fit in 32 bits")

    @cached_property
    def by_uid(self) -> dict[int, Node]:
        return {it.uid: it.node for it in self.items}

    def symbol(self, uid: int) -> Symbol:
        node = self.by_uid.get(uid)
        if not isinstance(node, Symbol):
            raise LookupError_(f"uid {uid} is not a symbol in unit {self.file!r}")
        return node

    def type_node(self, uid: int) -> TypeNode:
        node = self.by_uid.get(uid)
        if not isinstance(node, TypeNode):
            raise LookupError_(f"uid {uid} is not a type in unit {self.file!r}")
        return node


# ---------------------------------------------------------------------------
# Whole-module validation.  Performed eagerly when a module is read from
# a pickle; also usable on hand-built modules.


def validate_module(m: SymModule) -> None:
    """Raise ValidationError unless every cross-item invariant holds."""

    seen: dict[int, Node] = {}
    for it in m.items:
        if it.uid in seen:
            raise ValidationError(f"duplicate uid {it.uid}")
        if it.uid > m.nuids:
            raise ValidationError(f"uid {it.uid} out of range 1..{m.nuids}")
        if isinstance(it.node, Symbol) and it.node.uid != it.uid:
            raise ValidationError(
                f"item uid {it.uid} disagrees with symbol uid {it.node.uid}")
        seen[it.uid] = it.node

    def want_type(uid: int, what: str) -> TypeNode:
        node = seen.get(uid)
        if node is None:
            raise ValidationError(f"dangling uid {uid} referenced by {what}")
        if not isinstance(node, TypeNode):
            raise ValidationError(f"{what} references uid {uid}, which is not a type")
        return node

    def want_symbol(uid: int, what: str) -> Symbol:
        node = seen.get(uid)
        if node is None:
            raise ValidationError(f"dangling uid {uid} referenced by {what}")
        if not isinstance(node, Symbol):
            raise ValidationError(f"{what} references uid {uid}, which is not a symbol")
        return node

    for uid, node in seen.items():
        if isinstance(node, Symbol):
            want_type(node.type, f"symbol {node.id!r}")
            if node.uplink:
                want_symbol(node.uplink, f"uplink of {node.id!r}")
            if not node.src.is_real():
                raise ValidationError(f"symbol {node.id!r} has a wildcard coordinate")
        elif isinstance(node, (PointerType, ConstType, VolatileType)):
            want_type(node.type, f"type uid {uid}")
        elif isinstance(node, ArrayType):
            elem = want_type(node.type, f"array uid {uid}")
            if node.size != node.nelems * elem.size:
                raise ValidationError(
                    f"array uid {uid} size {node.size} != {node.nelems} x {elem.size}")
        elif isinstance(node, FunctionType):
            want_type(node.type, f"function uid {uid} return")
            for f in node.formals:
                want_type(f, f"function uid {uid} formal")
        elif isinstance(node, (StructType, UnionType)):
            if node.size % node.align:
                raise ValidationError(
                    f"type uid {uid} size {node.size} not a multiple of align {node.align}")
            for f in node.fields:
                ft = want_type(f.type, f"field {f.id!r} of uid {uid}")
                if f.offset + ft.size > node.size:
                    raise ValidationError(
                        f"field {f.id!r} of uid {uid} overflows its record")
                if f.bitsize and f.lsb + f.bitsize > 8 * ft.size:
                    raise ValidationError(
                        f"bit field {f.id!r} of uid {uid} exceeds its storage unit")

    if m.globals:
        g = want_symbol(m.globals, "module globals")
        if not isinstance(g, (StaticSym, GlobalSym)):
            raise ValidationError(
                f"globals uid {m.globals} ({g.id!r}) is not a static or global")

    for i, sp in enumerate(m.spoints):
        if not sp.src.is_real():
            raise ValidationError(f"stopping point {i} has a wildcard coordinate")
        if sp.tail:
            want_symbol(sp.tail, f"stopping point {i} tail")

    # Uplink chains must terminate; a chain longer than the symbol count
    # implies a cycle.
    ok: set[int] = set()
    nsyms = sum(1 for n in seen.values() if isinstance(n, Symbol))
    for uid, node in seen.items():
        if not isinstance(node, Symbol):
            continue
        trail = []
        cur = uid
        while cur and cur not in ok:
            trail.append(cur)
            if len(trail) > nsyms:
                raise ValidationError(f"uplink cycle through uid {uid}")
            cur = seen[cur].uplink  # type: ignore[union-attr]
        ok.update(trail)


# ---------------------------------------------------------------------------
# Queries.


def visible_chain(m: SymModule, start: int) -> list[Symbol]:
    """The symbol named by ``start`` followed by its uplink ancestors.

    The result enumerates, innermost first, every identifier visible at
    the start symbol's declaration point.
    """
    sym = m.symbol(start)
    chain = [sym]
    guard = m.nuids + 1
    while sym.uplink:
        sym = m.symbol(sym.uplink)
        chain.append(sym)
        if len(chain) > guard:
            raise ValidationError(f"uplink cycle while walking from uid {start}")
    return chain


def globals_chain(m: SymModule) -> list[Symbol]:
    """All global/static symbols of m, reachable from its globals tail."""
    if not m.globals:
        return []
    return [s for s in visible_chain(m, m.globals) if isinstance(s, (StaticSym, GlobalSym))]


def lookup_name(
    name: str,
    context: tuple[SymModule, int],
    all_modules: Iterable[SymModule] = (),
) -> Symbol | None:
    """Resolve ``name`` the way the debugger does when stopped.

    The visible chain of the context symbol is searched first (innermost
    declaration wins); failing that, every *other* module's globals chain
    is searched for a global or static of that name.  Absence is a value,
    not an error.
    """
    ctx_module, ctx_uid = context
    if ctx_uid:
        for sym in visible_chain(ctx_module, ctx_uid):
            if sym.id == name:
                return sym
    for mod in all_modules:
        if mod is ctx_module or mod.uname == ctx_module.uname:
            continue
        for sym in globals_chain(mod):
            if sym.id == name:
                return sym
    return None


def find_spoints(m: SymModule, pattern: Coordinate) -> list[tuple[int, SPoint]]:
    """All stopping points whose coordinate the pattern matches.

    Empty file, zero x, and zero y in the pattern are wildcards; indices
    are the positions in the module's spoints sequence.
    """
    return [(i, sp) for i, sp in enumerate(m.spoints) if pattern.matches(sp.src)]


def type_name(m: SymModule, uid: int) -> str:
    """Human-readable rendering of a type uid, for diagnostics."""
    t = m.type_node(uid)
    if isinstance(t, IntType):
        return {1: "char", 2: "short", 4: "int"}.get(t.size, f"int{t.size * 8}")
    if isinstance(t, UnsignedType):
        return "unsigned"
    if isinstance(t, FloatType):
        return "double" if t.size == 8 else "float"
    if isinstance(t, VoidType):
        return "void"
    if isinstance(t, PointerType):
        return type_name(m, t.type) + " *"
    if isinstance(t, EnumType):
        return f"enum {t.tag}" if t.tag else "enum"
    if isinstance(t, StructType):
        return f"struct {t.tag}" if t.tag else "struct"
    if isinstance(t, UnionType):
        return f"union {t.tag}" if t.tag else "union"
    if isinstance(t, ArrayType):
        return f"{type_name(m, t.type)}[{t.nelems}]"
    if isinstance(t, FunctionType):
        return f"{type_name(m, t.type)}()"
    if isinstance(t, ConstType):
        return "const " + type_name(m, t.type)
    if isinstance(t, VolatileType):
        return "volatile " + type_name(m, t.type)
    return "?"


def strip_qualifiers(m: SymModule, uid: int) -> TypeNode:
    """The underlying type with const/volatile wrappers removed."""
    t = m.type_node(uid)
    while isinstance(t, (ConstType, VolatileType)):
        t = m.type_node(t.type)
    return t
