"""Link object modules into an executable image.

The linker concatenates unit code behind a startup stub, places unit
data images above the shadow-stack cell and sentinel, resolves every
relocation, emits the module-record table served as address space 2,
and sizes the breakpoint-flag array to the largest per-unit stopping
point count.
"""

from __future__ import annotations

import argparse
import shutil
import struct
import sys
from pathlib import Path

from .binio import Packer
from .codegen import FuncEntry, ObjectModule, VecEntry
from .image import (
    ExecutableImage, FUNC_ADDR_BASE, MEM_SIZE, STACK_TOP, UNIT_DATA_BASE,
    func_address, save_image,
)
from .isa import Assembler, OPCODES, patch_u32
from .objfile import read_object


class LinkError(Exception):
    pass


def _align(v: int, a: int) -> int:
    return v + (-v) % a


def emit_module_record(om: ObjectModule, addresses: list[int]) -> bytes:
    """The in-image record for one unit: uname, vector length, and the
    resolved address vector."""
    if len(addresses) != len(om.vector):
        raise LinkError(f"unit {om.source_file}: unresolved address vector")
    p = Packer()
    p.u32(om.uname)
    p.u32(len(addresses))
    for a in addresses:
        p.u32(a)
    return p.getvalue()


def _build_stub(entry_index: int | None, entry: FuncEntry | None) -> bytes:
    asm = Assembler()
    if entry_index is None:
        asm.emit("PUSH", 0)
    else:
        if len(entry.params) == 2:
            asm.emit("ARGC")
            asm.emit("ARGV")
        elif len(entry.params) != 0:
            raise LinkError(
                f"entry function {entry.name!r} must take zero or two parameters")
        asm.emit("CALL", entry_index)
    asm.emit("HALT")
    code, relocs = asm.assemble(0)
    assert not relocs
    return code


def link(objects: list[ObjectModule], entry: str | None = "main") -> ExecutableImage:
    if not objects:
        raise LinkError("nothing to link")

    by_uname: dict[int, ObjectModule] = {}
    for om in objects:
        if om.uname in by_uname:
            raise LinkError(
                f"unit name collision {om.uname:#010x}: "
                f"{by_uname[om.uname].source_file} and {om.source_file}")
        by_uname[om.uname] = om

    # External name table; duplicates are an error naming both units.
    exports: dict[str, tuple[ObjectModule, str, int]] = {}
    for om in objects:
        for name, (kind, value) in om.exports.items():
            if name in exports:
                raise LinkError(
                    f"duplicate external name {name!r} in "
                    f"{exports[name][0].source_file} and {om.source_file}")
            exports[name] = (om, kind, value)

    # Function table layout.
    func_base: dict[int, int] = {}
    all_functions: list[FuncEntry] = []
    for om in objects:
        func_base[om.uname] = len(all_functions)
        all_functions.extend(om.functions)

    def resolve_xfunc(name: str, referrer: ObjectModule) -> int:
        hit = exports.get(name)
        if hit is None or hit[1] != "func":
            raise LinkError(
                f"undefined symbol {name!r} (referenced by {referrer.source_file})")
        om, _, local = hit
        return func_base[om.uname] + local

    # Entry function: must exist in exactly one unit.
    entry_index: int | None = None
    entry_fn: FuncEntry | None = None
    if entry is not None:
        hits = [(om, i) for om in objects
                for i, f in enumerate(om.functions) if f.name == entry]
        if not hits:
            raise LinkError(f"entry function {entry!r} is not defined by any unit")
        if len(hits) > 1:
            names = " and ".join(om.source_file for om, _ in hits)
            raise LinkError(f"entry function {entry!r} defined in {names}")
        om, local = hits[0]
        entry_index = func_base[om.uname] + local
        entry_fn = om.functions[local]
    stub = _build_stub(entry_index, entry_fn)

    # Code layout: stub first, then each unit.
    code_base: dict[int, int] = {}
    offset = len(stub)
    for om in objects:
        code_base[om.uname] = offset
        offset += len(om.code)

    # Data layout.
    data_base: dict[int, int] = {}
    data_end = UNIT_DATA_BASE
    for om in objects:
        data_end = _align(data_end, 8)
        data_base[om.uname] = data_end
        data_end += len(om.data)
    if data_end >= STACK_TOP // 2:
        raise LinkError("data image does not fit in target memory")

    # Patch and place.
    code = bytearray(stub)
    data = bytearray()
    for om in objects:
        body = bytearray(om.code)
        for r in om.code_relocs:
            raw = struct.unpack_from("<I", body, r.offset)[0]
            if r.kind == "code":
                value = raw + code_base[om.uname]
            elif r.kind == "data":
                value = raw + data_base[om.uname]
            elif r.kind == "func":
                value = func_base[om.uname] + raw
            elif r.kind == "xfunc":
                value = resolve_xfunc(r.name, om)
            else:
                raise LinkError(f"unknown relocation kind {r.kind!r}")
            patch_u32(body, r.offset, value)
        code.extend(body)

        unit_data = bytearray(om.data)
        for off in om.data_relocs:
            raw = struct.unpack_from("<I", unit_data, off)[0]
            patch_u32(unit_data, off, raw + data_base[om.uname])
        pad = data_base[om.uname] - UNIT_DATA_BASE - len(data)
        data.extend(b"\0" * pad)
        data.extend(unit_data)

    # Rebase function entries to final code offsets.
    final_functions: list[FuncEntry] = []
    for om in objects:
        for f in om.functions:
            final_functions.append(FuncEntry(
                f.name, f.uid, f.uname, f.entry + code_base[om.uname],
                f.frame_size, f.params, f.is_static))

    # Address vectors and module records, in link order, null-terminated.
    records = Packer()
    for om in objects:
        addresses = []
        for v in om.vector:
            if v.kind == "data":
                addresses.append(data_base[om.uname] + v.value)
            elif v.kind == "func":
                addresses.append(func_address(func_base[om.uname] + v.value))
            elif v.kind == "xfunc":
                hit = exports.get(v.name)
                if hit is None or hit[1] != "func":
                    addresses.append(0)    # declared, never defined, never called
                else:
                    addresses.append(func_address(func_base[hit[0].uname] + hit[2]))
            else:
                raise LinkError(f"unknown vector entry kind {v.kind!r}")
        records.buf.write(emit_module_record(om, addresses))
    records.u32(0)

    bpflags_len = max((om.spoint_count for om in objects), default=0)

    manifest = [(om.uname, om.symfile_name) for om in objects]
    sentinel_pad = b"\0" * (UNIT_DATA_BASE - 0x1000)
    return ExecutableImage(
        code=bytes(code),
        data=sentinel_pad + bytes(data),
        functions=final_functions,
        records=records.getvalue(),
        bpflags_len=bpflags_len,
        manifest=manifest,
        entry_func=entry_index,
        mem_size=MEM_SIZE,
        stack_top=STACK_TOP,
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nld", description="link object modules into an executable image")
    parser.add_argument("objects", nargs="+", help="input .obj files")
    parser.add_argument("-o", "--output", required=True, help="output .nxe file")
    parser.add_argument("--entry", default="main",
                        help="entry function name, or 'none' (default: main)")
    args = parser.parse_args(argv)

    entry = None if args.entry == "none" else args.entry
    out_path = Path(args.output)
    try:
        objects = []
        for name in args.objects:
            objects.append((Path(name), read_object(name)))
        image = link([om for _, om in objects], entry=entry)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        save_image(image, out_path)
        # Symbol files travel next to the image under their manifest names.
        for path, om in objects:
            src = path.parent / om.symfile_name
            dst = out_path.parent / om.symfile_name
            if src.resolve() != dst.resolve():
                if not src.exists():
                    raise LinkError(f"missing symbol file {src}")
                shutil.copyfile(src, dst)
    except (LinkError, OSError) as exc:
        print(f"nld: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
