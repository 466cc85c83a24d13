"""Bytecode instruction set for the stack VM.

Encoding: one opcode byte followed by fixed-width little-endian operands.
Operand formats: ``i`` 32-bit, ``f`` 64-bit float, ``b`` one byte.
Evaluation happens on an internal operand stack; locals and parameters
live in simulated memory at fp-relative offsets, so the debugger can read
them with plain fetches.

Debug-support opcodes: ``BPCHK n`` records n as the current stopping
point and traps when its flag is armed; ``SETIP n`` records n before a
call; ``SPUSH``/``SPOP`` link and unlink the frame's shadow record.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

# kind codes for LD/ST
K_I8, K_U8, K_I16, K_U16, K_W32, K_F32, K_F64 = range(7)

_KIND_SIZE = {K_I8: 1, K_U8: 1, K_I16: 2, K_U16: 2, K_W32: 4, K_F32: 4, K_F64: 8}


def kind_size(kind: int) -> int:
    return _KIND_SIZE[kind]


_OPS: list[tuple[str, str]] = [
    ("HALT", ""),
    ("PUSH", "i"), ("PUSHF", "f"),
    ("DUP", ""), ("DROP", ""), ("SWAP", ""),
    ("STASH", ""), ("UNSTASH", ""),
    ("LOCAL", "i"),
    ("LD", "b"), ("ST", "b"),
    ("ADD", ""), ("SUB", ""), ("MUL", ""),
    ("DIVS", ""), ("DIVU", ""), ("REMS", ""), ("REMU", ""), ("NEG", ""),
    ("AND", ""), ("OR", ""), ("XOR", ""), ("NOTB", ""),
    ("SHL", ""), ("SHRS", ""), ("SHRU", ""),
    ("NOTL", ""), ("BOOL", ""),
    ("EQ", ""), ("NE", ""),
    ("LTS", ""), ("LES", ""), ("GTS", ""), ("GES", ""),
    ("LTU", ""), ("LEU", ""), ("GTU", ""), ("GEU", ""),
    ("FADD", ""), ("FSUB", ""), ("FMUL", ""), ("FDIV", ""), ("FNEG", ""),
    ("FEQ", ""), ("FNE", ""), ("FLT", ""), ("FLE", ""), ("FGT", ""), ("FGE", ""),
    ("I2F", ""), ("U2F", ""), ("F2I", ""), ("F2U", ""), ("FSINGLE", ""),
    ("JMP", "i"), ("JZ", "i"), ("JNZ", "i"),
    ("CALL", "i"), ("RET0", ""), ("RETV", ""),
    ("BPCHK", "i"), ("SETIP", "i"),
    ("SPUSH", "ii"), ("SPOP", ""),
    ("GETC", ""), ("PUTC", ""), ("PRINTI", ""),
    ("ARGC", ""), ("ARGV", ""),
]

OPCODES: dict[str, int] = {name: code for code, (name, _) in enumerate(_OPS)}
OP_NAMES: dict[int, str] = {code: name for name, code in OPCODES.items()}
OP_FORMAT: dict[int, str] = {code: fmt for code, (_, fmt) in enumerate(_OPS)}


class Label:
    """Forward-referenceable jump target inside one function."""

    __slots__ = ("offset",)

    def __init__(self):
        self.offset: int | None = None


@dataclass(frozen=True)
class Reloc:
    """A 32-bit operand the linker must patch.

    kind 'code': add the unit's code base (jump targets).
    kind 'data': add the unit's data base.
    kind 'func': replace a unit-local function index with its final one.
    kind 'xfunc': replace with the index of the named external function.

    ``value`` is only meaningful when a Reloc is handed to the assembler
    as an operand: it is the number written into the slot before linking.
    """

    offset: int
    kind: str
    name: str = ""
    value: int = 0


class Assembler:
    """Collects symbolic instructions for one function and assembles them
    to bytes at a unit-relative base offset."""

    def __init__(self):
        self.instrs: list[tuple] = []

    def emit(self, op: str, *args) -> None:
        self.instrs.append((op, *args))

    def label(self) -> Label:
        lab = Label()
        self.instrs.append(lab)
        return lab

    def place(self, lab: Label) -> None:
        self.instrs.append(lab)

    def assemble(self, base: int) -> tuple[bytes, list[Reloc]]:
        # first pass: lay out offsets
        offset = base
        for item in self.instrs:
            if isinstance(item, Label):
                item.offset = offset
                continue
            op = item[0]
            fmt = _OPS[OPCODES[op]][1]
            offset += 1 + sum(8 if f == "f" else (1 if f == "b" else 4) for f in fmt)
        out = bytearray()
        relocs: list[Reloc] = []
        for item in self.instrs:
            if isinstance(item, Label):
                continue
            op, *args = item
            code = OPCODES[op]
            fmt = _OPS[code][1]
            out.append(code)
            for f, arg in zip(fmt, args):
                here = base + len(out)
                if isinstance(arg, Label):
                    if arg.offset is None:
                        raise AssertionError(f"unplaced label in {op}")
                    relocs.append(Reloc(here, "code"))
                    arg = arg.offset
                elif isinstance(arg, Reloc):
                    relocs.append(Reloc(here, arg.kind, arg.name))
                    arg = arg.value
                if f == "i":
                    out += struct.pack("<I", arg & 0xFFFFFFFF)
                elif f == "f":
                    out += struct.pack("<d", float(arg))
                elif f == "b":
                    out.append(arg & 0xFF)
            if len(fmt) != len(args):
                raise AssertionError(f"{op} wants {len(fmt)} operands, got {len(args)}")
        return bytes(out), relocs


@dataclass(frozen=True)
class Decoded:
    offset: int
    op: int
    args: tuple

    @property
    def name(self) -> str:
        return OP_NAMES[self.op]


def decode_stream(code: bytes) -> list[Decoded]:
    """Decode a whole code blob; offsets index the raw bytes."""
    out = []
    pos = 0
    while pos < len(code):
        op = code[pos]
        if op not in OP_NAMES:
            raise ValueError(f"bad opcode {op:#x} at {pos:#x}")
        fmt = OP_FORMAT[op]
        args = []
        apos = pos + 1
        for f in fmt:
            if f == "i":
                args.append(struct.unpack_from("<I", code, apos)[0])
                apos += 4
            elif f == "f":
                args.append(struct.unpack_from("<d", code, apos)[0])
                apos += 8
            else:
                args.append(code[apos])
                apos += 1
        out.append(Decoded(pos, op, tuple(args)))
        pos = apos
    return out


def patch_u32(code: bytearray, offset: int, value: int) -> None:
    struct.pack_into("<I", code, offset, value & 0xFFFFFFFF)


def read_u32(code: bytes, offset: int) -> int:
    return struct.unpack_from("<I", code, offset)[0]
