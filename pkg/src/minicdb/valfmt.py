"""Type-directed rendering of raw target bytes.

Bit fields display as the raw field bits shifted down (no sign
extension): a field (bitsize 3, lsb 2) over byte v shows (v >> 2) & 7.
"""

from __future__ import annotations

import struct

from .symtab import (
    ArrayType, ConstType, EnumType, FloatType, FunctionType, IntType,
    PointerType, StructType, SymModule, TypeNode, UnionType, UnsignedType,
    VoidType, VolatileType,
)


class FormatError(Exception):
    pass


def _unwrap(t: TypeNode, module: SymModule) -> TypeNode:
    while isinstance(t, (ConstType, VolatileType)):
        t = module.type_node(t.type)
    return t


def _int_value(data: bytes, signed: bool) -> int:
    return int.from_bytes(data, "little", signed=signed)


def _field_bits(unit: int, bitsize: int, lsb: int) -> int:
    return (unit >> lsb) & ((1 << bitsize) - 1)


def _char_text(data: bytes) -> str:
    text = data.split(b"\0", 1)[0]
    out = []
    for b in text:
        if 32 <= b < 127 and b not in (34, 92):
            out.append(chr(b))
        else:
            out.append(f"\\x{b:02x}")
    return "".join(out)


def format_value(t: TypeNode, data: bytes, module: SymModule) -> str:
    """Render ``data`` as a value of type ``t`` from ``module``."""
    t = _unwrap(t, module)
    if isinstance(t, VoidType):
        raise FormatError("void has no values")
    if not isinstance(t, FunctionType) and len(data) != t.size:
        raise FormatError(f"need {t.size} bytes, got {len(data)}")
    if isinstance(t, IntType):
        return str(_int_value(data, signed=True))
    if isinstance(t, UnsignedType):
        return str(_int_value(data, signed=False))
    if isinstance(t, FloatType):
        value = struct.unpack("<f" if t.size == 4 else "<d", data)[0]
        return f"{value:g}"
    if isinstance(t, PointerType):
        return f"0x{_int_value(data, signed=False):08x}"
    if isinstance(t, FunctionType):
        return f"0x{_int_value(data, signed=False):08x}"
    if isinstance(t, EnumType):
        value = _int_value(data, signed=True)
        for item in t.ids:
            if item.value == value:
                return item.id
        return str(value)
    if isinstance(t, (StructType, UnionType)):
        parts = []
        for fld in t.fields:
            ft = module.type_node(fld.type)
            if fld.bitsize:
                unit = _int_value(data[fld.offset:fld.offset + ft.size], signed=False)
                parts.append(f"{fld.id} = {_field_bits(unit, fld.bitsize, fld.lsb)}")
            else:
                chunk = data[fld.offset:fld.offset + ft.size]
                parts.append(f"{fld.id} = {format_value(ft, chunk, module)}")
        return "{" + ", ".join(parts) + "}"
    if isinstance(t, ArrayType):
        elem = module.type_node(t.type)
        elems = []
        for i in range(t.nelems):
            chunk = data[i * elem.size:(i + 1) * elem.size]
            elems.append(format_value(elem, chunk, module))
        text = "{" + ", ".join(elems) + "}"
        if isinstance(_unwrap(elem, module), IntType) and elem.size == 1:
            text += f' "{_char_text(data)}"'
        return text
    raise FormatError(f"cannot format {type(t).__name__}")


def value_tree(t: TypeNode, data: bytes, module: SymModule) -> dict:
    """Structured form of format_value for machine consumers; the ``text``
    of every node equals the format_value rendering of that node."""
    t = _unwrap(t, module)
    node: dict = {"text": format_value(t, data, module),
                  "kind": type(t).__name__.removesuffix("Type").lower()}
    if isinstance(t, (StructType, UnionType)):
        children = []
        for fld in t.fields:
            ft = module.type_node(fld.type)
            if fld.bitsize:
                unit = _int_value(data[fld.offset:fld.offset + ft.size], signed=False)
                children.append({
                    "name": fld.id,
                    "node": {"text": str(_field_bits(unit, fld.bitsize, fld.lsb)),
                             "kind": "bitfield"},
                })
            else:
                chunk = data[fld.offset:fld.offset + ft.size]
                children.append({"name": fld.id, "node": value_tree(ft, chunk, module)})
        node["children"] = children
    elif isinstance(t, ArrayType):
        elem = module.type_node(t.type)
        node["children"] = [
            {"name": str(i),
             "node": value_tree(elem, data[i * elem.size:(i + 1) * elem.size], module)}
            for i in range(t.nelems)]
    return node
