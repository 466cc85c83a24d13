"""Executable image (.nxe): the loadable form of a linked program.

Memory map (little-endian, 32-bit addresses):

    0x00000000 .. 0x00000fff   unmapped; loads and stores here fault
    0x00001000                 shadow-stack top cell (4 bytes)
    0x00001004                 base sentinel frame (20 bytes, all zero)
    0x00001018 ..              unit data images, each 8-aligned
    ...                        free memory
    0x00100000                 stack top; the stack grows down

Function "addresses" live in their own range: 0x08000000 + table index.
The image also carries the module-record bytes served as address space 2,
the breakpoint-flag count, and the map from unit name to symbol file.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .binio import FormatError, Packer, Unpacker
from .codegen import FuncEntry, ParamSlot

MAGIC = b"NXEIMG1\0"

DATA_BASE = 0x1000
MEM_SIZE = 0x100000
STACK_TOP = MEM_SIZE
TOS_CELL = DATA_BASE
SENTINEL = DATA_BASE + 4
UNIT_DATA_BASE = SENTINEL + 20
FUNC_ADDR_BASE = 0x08000000


def func_address(index: int) -> int:
    return FUNC_ADDR_BASE + index


def func_index(address: int) -> int | None:
    if address < FUNC_ADDR_BASE:
        return None
    return address - FUNC_ADDR_BASE


@dataclass
class ExecutableImage:
    code: bytes
    data: bytes                    # initial bytes at DATA_BASE
    functions: list[FuncEntry]     # entry offsets absolute within code
    records: bytes                 # address space 2: module records
    bpflags_len: int
    manifest: list[tuple[int, str]]   # (uname, symfile name), link order
    entry_func: int | None         # index into functions, None = no entry
    mem_size: int = MEM_SIZE
    stack_top: int = STACK_TOP

    def function_named(self, name: str) -> FuncEntry | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None


def dump_image(img: ExecutableImage) -> bytes:
    p = Packer()
    p.buf.write(MAGIC)
    p.u32(img.mem_size)
    p.u32(img.stack_top)
    p.u32(img.bpflags_len)
    p.u32(img.entry_func + 1 if img.entry_func is not None else 0)
    p.blob(img.code)
    p.blob(img.data)
    p.blob(img.records)
    p.u32(len(img.functions))
    for f in img.functions:
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
    p.u32(len(img.manifest))
    for uname, symfile in img.manifest:
        p.u32(uname)
        p.text(symfile)
    return p.getvalue()


def load_image(data: bytes) -> ExecutableImage:
    if not data.startswith(MAGIC):
        raise FormatError("not an executable image")
    u = Unpacker(data[len(MAGIC):])
    mem_size = u.u32()
    stack_top = u.u32()
    bpflags_len = u.u32()
    entry_plus1 = u.u32()
    code = u.blob()
    data_img = u.blob()
    records = u.blob()
    functions = []
    for _ in range(u.u32()):
        name = u.text()
        uid = u.u32()
        uname = u.u32()
        entry = u.u32()
        frame_size = u.u32()
        is_static = bool(u.u8())
        params = [ParamSlot(u.u32(), u.u8()) for _ in range(u.u32())]
        functions.append(FuncEntry(name, uid, uname, entry, frame_size,
                                   params, is_static))
    manifest = [(u.u32(), u.text()) for _ in range(u.u32())]
    u.done()
    return ExecutableImage(
        code=code, data=data_img, functions=functions, records=records,
        bpflags_len=bpflags_len, manifest=manifest,
        entry_func=entry_plus1 - 1 if entry_plus1 else None,
        mem_size=mem_size, stack_top=stack_top)


def save_image(img: ExecutableImage, path: str | Path) -> None:
    Path(path).write_bytes(dump_image(img))


def read_image(path: str | Path) -> ExecutableImage:
    return load_image(Path(path).read_bytes())
