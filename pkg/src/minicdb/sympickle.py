"""Binary pickle format for symbol-table modules.

Layout of a ``.sym`` file:

  * magic: ASCII ``SYMPKL1\\0`` (8 bytes)
  * one ``module`` production, encoded as below
  * CRC-32 of everything before it (4 bytes little-endian), then EOF

Encoding rules:

  * unsigned integers: LEB128, 7 bits per byte, high bit = continuation
  * signed integers (enumerator values, frame offsets): zigzag, then LEB128
  * identifier: LEB128 byte length, then UTF-8 bytes
  * sequence: LEB128 element count, then the elements
  * product type: fields in grammar order
  * sum type: LEB128 constructor tag (1-based, grammar order), then the
    constructor's own fields, then the attributes shared by the type

Reading validates eagerly: magic, checksum, structure, then every
cross-item invariant, and finally that EOF follows the pickle.
"""

from __future__ import annotations

import io
import zlib
from typing import BinaryIO

from .symtab import (
    ArrayType, ConstType, ConstructionError, Coordinate, EnumItem, EnumConstSym,
    EnumType, FieldRec, FloatType, FunctionType, GlobalSym, IntType, Item,
    LocalSym, ParamSym, PointerType, SPoint, StaticSym, StructType, SymModule,
    Symbol, SymtabError, TypeNode, TypedefSym, UnionType, UnsignedType,
    VoidType, VolatileType, validate_module,
)

MAGIC = b"SYMPKL1\0"
_MAX_VARINT_BYTES = 10


class PickleError(SymtabError):
    """Base class for malformed pickle streams."""


class BadMagicError(PickleError):
    pass


class TruncatedError(PickleError):
    pass


class TrailingDataError(PickleError):
    pass


class MalformedError(PickleError):
    pass


class ChecksumError(PickleError):
    pass


_TYPE_TAGS: dict[type, int] = {
    IntType: 1, UnsignedType: 2, FloatType: 3, VoidType: 4, PointerType: 5,
    EnumType: 6, StructType: 7, UnionType: 8, ArrayType: 9, FunctionType: 10,
    ConstType: 11, VolatileType: 12,
}
_SYM_TAGS: dict[type, int] = {
    StaticSym: 1, GlobalSym: 2, TypedefSym: 3, LocalSym: 4, ParamSym: 5,
    EnumConstSym: 6,
}


def _zigzag(n: int) -> int:
    return (n << 1) if n >= 0 else -(n << 1) - 1


def _unzigzag(u: int) -> int:
    return (u >> 1) ^ -(u & 1)


class Meter:
    """Attributes emitted bytes to the innermost active category.

    Categories used by the writer: ``module`` (header, counts, checksum),
    ``identifiers``, ``symbols``, ``types``, ``coordinates``.
    """

    def __init__(self):
        self.by_category: dict[str, int] = {}
        self._stack: list[str] = []

    def _add(self, n: int) -> None:
        if self._stack:
            cat = self._stack[-1]
            self.by_category[cat] = self.by_category.get(cat, 0) + n

    def total(self) -> int:
        return sum(self.by_category.values())


class _Out:
    """Byte sink wrapper tracking count, checksum, and the meter stack."""

    def __init__(self, sink: BinaryIO, meter: Meter | None):
        self.sink = sink
        self.meter = meter or Meter()
        self.crc = 0
        self.count = 0

    def write(self, data: bytes) -> None:
        self.sink.write(data)
        self.crc = zlib.crc32(data, self.crc)
        self.count += len(data)
        self.meter._add(len(data))

    def write_raw(self, data: bytes) -> None:
        # Outside the checksum: the trailer itself.
        self.sink.write(data)
        self.count += len(data)
        self.meter._add(len(data))

    def uint(self, v: int) -> None:
        if v < 0:
            raise ConstructionError(f"unsigned field holds {v}")
        out = bytearray()
        while True:
            b = v & 0x7F
            v >>= 7
            if v:
                out.append(b | 0x80)
            else:
                out.append(b)
                break
        self.write(bytes(out))

    def sint(self, v: int) -> None:
        self.uint(_zigzag(v))

    def ident(self, s: str) -> None:
        data = s.encode("utf-8")
        self.uint(len(data))
        self.write(data)

    class _Cat:
        def __init__(self, out: "_Out", name: str):
            self.out, self.name = out, name

        def __enter__(self):
            self.out.meter._stack.append(self.name)

        def __exit__(self, *exc):
            self.out.meter._stack.pop()

    def cat(self, name: str) -> "_Out._Cat":
        return _Out._Cat(self, name)


def _write_coordinate(out: _Out, c: Coordinate) -> None:
    with out.cat("coordinates"):
        out.ident(c.file)
        out.uint(c.x)
        out.uint(c.y)


def _write_type(out: _Out, t: TypeNode) -> None:
    out.uint(_TYPE_TAGS[type(t)])
    if isinstance(t, (PointerType, ConstType, VolatileType)):
        out.uint(t.type)
    elif isinstance(t, EnumType):
        with out.cat("identifiers"):
            out.ident(t.tag)
        out.uint(len(t.ids))
        for e in t.ids:
            with out.cat("identifiers"):
                out.ident(e.id)
            out.sint(e.value)
    elif isinstance(t, (StructType, UnionType)):
        with out.cat("identifiers"):
            out.ident(t.tag)
        out.uint(len(t.fields))
        for f in t.fields:
            with out.cat("identifiers"):
                out.ident(f.id)
            out.uint(f.type)
            out.sint(f.offset)
            out.uint(f.bitsize)
            out.uint(f.lsb)
    elif isinstance(t, ArrayType):
        out.uint(t.type)
        out.uint(t.nelems)
    elif isinstance(t, FunctionType):
        out.uint(t.type)
        out.uint(len(t.formals))
        for f in t.formals:
            out.uint(f)
    out.uint(t.size)
    out.uint(t.align)


def _write_symbol(out: _Out, s: Symbol) -> None:
    out.uint(_SYM_TAGS[type(s)])
    if isinstance(s, (StaticSym, GlobalSym)):
        out.uint(s.index)
    elif isinstance(s, (LocalSym, ParamSym)):
        out.sint(s.offset)
    elif isinstance(s, EnumConstSym):
        out.sint(s.value)
    with out.cat("identifiers"):
        out.ident(s.id)
    out.uint(s.uid)
    out.uint(s.module)
    _write_coordinate(out, s.src)
    out.uint(s.type)
    out.uint(s.uplink)


def write_module(m: SymModule, sink: BinaryIO, *, meter: Meter | None = None) -> int:
    """Serialize a validated module; returns the number of bytes written.

    Output is a pure function of the module value: the same module always
    yields identical bytes.
    """
    validate_module(m)
    return _write_unchecked(m, sink, meter=meter)


def _write_unchecked(m: SymModule, sink: BinaryIO, *, meter: Meter | None = None) -> int:
    out = _Out(sink, meter)
    with out.cat("module"):
        out.write(MAGIC)
        out.ident(m.file)
        out.uint(m.uname)
        out.uint(m.nuids)
        out.uint(len(m.items))
        for it in m.items:
            if isinstance(it.node, Symbol):
                with out.cat("symbols"):
                    out.uint(1)
                    _write_symbol(out, it.node)
                    out.uint(it.uid)
            else:
                with out.cat("types"):
                    out.uint(2)
                    _write_type(out, it.node)
                    out.uint(it.uid)
        out.uint(m.globals)
        out.uint(len(m.spoints))
        for sp in m.spoints:
            with out.cat("coordinates"):
                _write_coordinate(out, sp.src)
                out.uint(sp.tail)
        out.write_raw(out.crc.to_bytes(4, "little"))
    return out.count


def encode_module(m: SymModule) -> bytes:
    buf = io.BytesIO()
    write_module(m, buf)
    return buf.getvalue()


def measure_module(m: SymModule) -> Meter:
    """Serialize to nowhere, returning per-category byte counts."""
    meter = Meter()
    write_module(m, io.BytesIO(), meter=meter)
    return meter


class _In:
    def __init__(self, data: bytes, pos: int):
        self.data = data
        self.pos = pos

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(
                f"pickle ends at byte {len(self.data)}, needed {self.pos + n}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def uint(self) -> int:
        result = 0
        shift = 0
        for i in range(_MAX_VARINT_BYTES):
            b = self.take(1)[0]
            result |= (b & 0x7F) << shift
            if not b & 0x80:
                return result
            shift += 7
        raise MalformedError(f"oversized varint at byte {self.pos}")

    def sint(self) -> int:
        return _unzigzag(self.uint())

    def ident(self) -> str:
        n = self.uint()
        data = self.take(n)
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedError(f"identifier at byte {self.pos} is not UTF-8") from exc


def _read_coordinate(src: _In) -> Coordinate:
    file = src.ident()
    x = src.uint()
    y = src.uint()
    return Coordinate(file, x, y)


def _read_type(src: _In) -> TypeNode:
    tag = src.uint()
    if tag in (1, 2, 3, 4):
        cls = (IntType, UnsignedType, FloatType, VoidType)[tag - 1]
        size, align = src.uint(), src.uint()
        return cls(size, align)
    if tag in (5, 11, 12):
        cls = {5: PointerType, 11: ConstType, 12: VolatileType}[tag]
        ref = src.uint()
        size, align = src.uint(), src.uint()
        return cls(size, align, ref)
    if tag == 6:
        enum_tag = src.ident()
        ids = tuple(
            EnumItem(src.ident(), src.sint()) for _ in range(src.uint()))
        size, align = src.uint(), src.uint()
        return EnumType(size, align, enum_tag, ids)
    if tag in (7, 8):
        cls = StructType if tag == 7 else UnionType
        rec_tag = src.ident()
        fields = tuple(
            FieldRec(src.ident(), src.uint(), src.sint(), src.uint(), src.uint())
            for _ in range(src.uint()))
        size, align = src.uint(), src.uint()
        return cls(size, align, rec_tag, fields)
    if tag == 9:
        ref, nelems = src.uint(), src.uint()
        size, align = src.uint(), src.uint()
        return ArrayType(size, align, ref, nelems)
    if tag == 10:
        ret = src.uint()
        formals = tuple(src.uint() for _ in range(src.uint()))
        size, align = src.uint(), src.uint()
        return FunctionType(size, align, ret, formals)
    raise MalformedError(f"unknown type constructor tag {tag}")


def _read_symbol(src: _In) -> Symbol:
    tag = src.uint()
    if tag not in (1, 2, 3, 4, 5, 6):
        raise MalformedError(f"unknown symbol constructor tag {tag}")
    extra: tuple = ()
    if tag in (1, 2):
        extra = (src.uint(),)
    elif tag in (4, 5, 6):
        extra = (src.sint(),)
    ident = src.ident()
    uid = src.uint()
    module = src.uint()
    coord = _read_coordinate(src)
    type_uid = src.uint()
    uplink = src.uint()
    cls = (StaticSym, GlobalSym, TypedefSym, LocalSym, ParamSym, EnumConstSym)[tag - 1]
    return cls(ident, uid, module, coord, type_uid, uplink, *extra)


def decode_module(data: bytes) -> SymModule:
    """Parse and validate one module pickle; trailing bytes are an error."""
    if len(data) < len(MAGIC):
        if MAGIC.startswith(data):
            raise TruncatedError("pickle shorter than its magic header")
        raise BadMagicError("not a symbol pickle")
    if data[:len(MAGIC)] != MAGIC:
        raise BadMagicError("not a symbol pickle")
    src = _In(data, len(MAGIC))
    try:
        file = src.ident()
        uname = src.uint()
        nuids = src.uint()
        items = []
        for _ in range(src.uint()):
            kind = src.uint()
            if kind == 1:
                node: TypeNode | Symbol = _read_symbol(src)
            elif kind == 2:
                node = _read_type(src)
            else:
                raise MalformedError(f"unknown item tag {kind}")
            items.append(Item(src.uint(), node))
        globals_uid = src.uint()
        spoints = []
        for _ in range(src.uint()):
            coord = _read_coordinate(src)
            spoints.append(SPoint(coord, src.uint()))
        module = SymModule(file, uname, nuids, tuple(items), globals_uid, tuple(spoints))
    except ConstructionError as exc:
        raise MalformedError(f"invalid field value: {exc}") from exc
    body_end = src.pos
    trailer = src.take(4)
    if int.from_bytes(trailer, "little") != zlib.crc32(data[:body_end]):
        raise ChecksumError("pickle checksum mismatch")
    if src.pos != len(data):
        raise TrailingDataError(
            f"{len(data) - src.pos} unexpected bytes after the pickle")
    validate_module(module)
    return module


def read_module(source: BinaryIO | bytes) -> SymModule:
    """Read exactly one module pickle from a stream or byte string."""
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    return decode_module(bytes(data))


def load_symfile(path) -> SymModule:
    with open(path, "rb") as fh:
        return read_module(fh)


def save_symfile(m: SymModule, path) -> int:
    with open(path, "wb") as fh:
        return write_module(m, fh)
