"""Object-file container (.obj): the linkable form of one compiled unit.

Holds the unit's bytecode and relocation tables, its initialized data,
the function table, the address-vector plan, the stopping-point count,
and the relative name of the external symbol file written alongside it.
"""

from __future__ import annotations

from pathlib import Path

from .binio import FormatError, Packer, Unpacker
from .codegen import FuncEntry, ObjectModule, ParamSlot, VecEntry
from .isa import Reloc

MAGIC = b"NOBJ1\0\0\0"


def dump_object(om: ObjectModule) -> bytes:
    p = Packer()
    p.buf.write(MAGIC)
    p.u32(om.uname)
    p.text(om.source_file)
    p.text(om.symfile_name)
    p.u32(om.spoint_count)
    p.blob(om.code)
    p.u32(len(om.code_relocs))
    for r in om.code_relocs:
        p.u32(r.offset)
        p.text(r.kind)
        p.text(r.name)
    p.blob(om.data)
    p.u32(len(om.data_relocs))
    for off in om.data_relocs:
        p.u32(off)
    p.u32(len(om.functions))
    for f in om.functions:
        p.text(f.name)
        p.u32(f.uid)
        p.u32(f.uname)
        p.u32(f.entry)
        p.u32(f.frame_size)
        p.u8(1 if f.is_static else 0)
        p.u32(len(f.params))
        for slot in f.params:
            p.u32(slot.offset)
            p.u8(slot.kind)
    p.u32(len(om.vector))
    for v in om.vector:
        p.text(v.kind)
        p.u32(v.value)
        p.text(v.name)
    p.u32(len(om.exports))
    for name, (kind, value) in om.exports.items():
        p.text(name)
        p.text(kind)
        p.u32(value)
    return p.getvalue()


def load_object(data: bytes) -> ObjectModule:
    if not data.startswith(MAGIC):
        raise FormatError("not an object file")
    u = Unpacker(data[len(MAGIC):])
    uname = u.u32()
    source_file = u.text()
    symfile_name = u.text()
    spoint_count = u.u32()
    code = u.blob()
    code_relocs = [Reloc(u.u32(), u.text(), u.text()) for _ in range(u.u32())]
    data_img = u.blob()
    data_relocs = [u.u32() for _ in range(u.u32())]
    functions = []
    for _ in range(u.u32()):
        name = u.text()
        uid = u.u32()
        funame = u.u32()
        entry = u.u32()
        frame_size = u.u32()
        is_static = bool(u.u8())
        params = [ParamSlot(u.u32(), u.u8()) for _ in range(u.u32())]
        functions.append(FuncEntry(name, uid, funame, entry, frame_size,
                                   params, is_static))
    vector = [VecEntry(u.text(), u.u32(), u.text())
              for _ in range(u.u32())]
    exports = {}
    for _ in range(u.u32()):
        name = u.text()
        kind = u.text()
        value = u.u32()
        exports[name] = (kind, value)
    u.done()
    return ObjectModule(
        uname=uname, source_file=source_file, code=code,
        code_relocs=code_relocs, data=data_img, data_relocs=data_relocs,
        functions=functions, vector=vector, spoint_count=spoint_count,
        symfile_name=symfile_name, exports=exports)


def save_object(om: ObjectModule, path: str | Path) -> None:
    Path(path).write_bytes(dump_object(om))


def read_object(path: str | Path) -> ObjectModule:
    return load_object(Path(path).read_bytes())
