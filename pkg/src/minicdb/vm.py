"""Simulated target: a little-endian stack VM executing linked images.

The target half of the debugger lives here: the VM exposes exactly what
the wire protocol needs — run control (``resume``), byte access to its
address spaces (0 target memory, 1 breakpoint flags, 2 module records),
and the address of the top shadow frame.  Traps raise break events when
a stopping point's flag is armed; faults and exits surface the same way.

Everything above this layer sees only events and fetch/store; no
instruction-level detail leaks out.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import BinaryIO, Optional

from .image import (
    DATA_BASE, ExecutableImage, FUNC_ADDR_BASE, SENTINEL, TOS_CELL, func_index,
)
from .isa import (
    Decoded, K_F32, K_F64, K_I8, K_I16, K_U8, K_U16, K_W32, OPCODES,
    decode_stream, kind_size,
)
from .codegen import SHADOW_DOWN, SHADOW_FUNC, SHADOW_IP, SHADOW_MODULE

_MASK = 0xFFFFFFFF


class FaultKind(IntEnum):
    DIVIDE = 1
    MEMORY = 2
    BADCALL = 3


class VmError(Exception):
    """Misuse of the VM's control surface (not a target fault)."""


class SpaceError(VmError):
    """Unknown or read-only address space."""


@dataclass(frozen=True)
class VmEvent:
    kind: str                 # 'break' | 'fault' | 'exit'
    spoint: int = 0
    uname: int = 0
    fault: Optional[FaultKind] = None
    code: int = 0


class _Fault(Exception):
    def __init__(self, kind: FaultKind):
        self.kind = kind


@dataclass
class _Frame:
    ret: int
    saved_fp: int
    saved_sp: int
    func: object       # FuncEntry


def _s32(v: int) -> int:
    return v - 0x100000000 if v & 0x80000000 else v


def _sdiv(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


class TargetVM:
    def __init__(self, image: ExecutableImage, args: list[str] | None = None,
                 stdin: BinaryIO | None = None, stdout: BinaryIO | None = None):
        import io
        self.image = image
        self.stdin = stdin if stdin is not None else io.BytesIO(b"")
        self.stdout = stdout if stdout is not None else io.BytesIO()
        self.memory = bytearray(image.mem_size)
        self.memory[DATA_BASE:DATA_BASE + len(image.data)] = image.data
        self.flags = bytearray(image.bpflags_len)
        self.records = bytes(image.records)
        self.instrs = decode_stream(image.code)
        self.index_of = {d.offset: i for i, d in enumerate(self.instrs)}
        self.stack: list = []          # evaluation stack
        self.frames: list[_Frame] = []
        self.pc = 0
        self.fp = SENTINEL
        self.sp = image.stack_top
        self.status = "startup"
        self.exit_code = 0
        self.last_fault = FaultKind.MEMORY
        self.shadow_used = False
        self._store_u32(TOS_CELL, SENTINEL)
        self.data_end = DATA_BASE + len(image.data)
        self._load_args(args or [])

    # -- loading --------------------------------------------------------------

    def _load_args(self, args: list[str]) -> None:
        pos = (self.data_end + 3) & ~3
        ptrs = []
        for a in args:
            raw = a.encode("utf-8") + b"\0"
            self.memory[pos:pos + len(raw)] = raw
            ptrs.append(pos)
            pos += len(raw)
        pos = (pos + 3) & ~3
        self.argv_addr = pos
        for p in ptrs + [0]:
            self._store_u32(pos, p)
            pos += 4
        self.argc = len(args)
        self.data_end = pos

    # -- raw memory helpers (internal; no fault checks) -------------------------

    def _load_u32(self, addr: int) -> int:
        return struct.unpack_from("<I", self.memory, addr)[0]

    def _store_u32(self, addr: int, value: int) -> None:
        struct.pack_into("<I", self.memory, addr, value & _MASK)

    # -- target accesses (fault-checked) -----------------------------------------

    def _check(self, addr: int, size: int) -> None:
        if addr < DATA_BASE or addr + size > len(self.memory):
            raise _Fault(FaultKind.MEMORY)

    def _mem_load(self, addr: int, kind: int):
        size = kind_size(kind)
        self._check(addr, size)
        raw = self.memory[addr:addr + size]
        if kind == K_I8:
            return struct.unpack("<b", raw)[0] & _MASK
        if kind == K_U8:
            return raw[0]
        if kind == K_I16:
            return struct.unpack("<h", raw)[0] & _MASK
        if kind == K_U16:
            return struct.unpack("<H", raw)[0]
        if kind == K_W32:
            return struct.unpack("<I", raw)[0]
        if kind == K_F32:
            return struct.unpack("<f", raw)[0]
        return struct.unpack("<d", raw)[0]

    def _mem_store(self, addr: int, kind: int, value) -> None:
        size = kind_size(kind)
        self._check(addr, size)
        if kind in (K_I8, K_U8):
            self.memory[addr] = int(value) & 0xFF
        elif kind in (K_I16, K_U16):
            struct.pack_into("<H", self.memory, addr, int(value) & 0xFFFF)
        elif kind == K_W32:
            struct.pack_into("<I", self.memory, addr, int(value) & _MASK)
        elif kind == K_F32:
            struct.pack_into("<f", self.memory, addr, float(value))
        else:
            struct.pack_into("<d", self.memory, addr, float(value))

    # -- debugger-facing surface ---------------------------------------------------

    def tos(self) -> int:
        return self._load_u32(TOS_CELL)

    def _space(self, space: int) -> tuple:
        if space == 0:
            return self.memory, True
        if space == 1:
            return self.flags, True
        if space == 2:
            return self.records, False
        raise SpaceError(f"unknown address space {space}")

    def fetch(self, space: int, addr: int, nbytes: int) -> bytes:
        if addr < 0 or nbytes < 0:
            raise SpaceError("negative address or length")
        blob, _ = self._space(space)
        if addr >= len(blob):
            return b""
        return bytes(blob[addr:addr + nbytes])

    def store(self, space: int, addr: int, data: bytes) -> int:
        if addr < 0:
            raise SpaceError("negative address")
        blob, writable = self._space(space)
        if not writable:
            raise SpaceError(f"address space {space} is read-only")
        if addr >= len(blob):
            return 0
        n = min(len(data), len(blob) - addr)
        blob[addr:addr + n] = data[:n]
        return n

    def current_uname(self) -> int:
        if self.frames:
            return self.frames[-1].func.uname
        return 0

    def current_ip(self) -> int:
        if self.fp == SENTINEL or self.fp + SHADOW_IP + 4 > len(self.memory):
            return 0
        return self._load_u32(self.fp + SHADOW_IP)

    # -- execution ---------------------------------------------------------------------

    def resume(self) -> VmEvent:
        if self.status == "exited":
            raise VmError("target has exited")
        if self.status == "running":
            raise VmError("target is already running")
        if self.status == "faulted":
            # Continuing a faulted target terminates it.
            self.status = "exited"
            self.exit_code = 128 + int(self.last_fault)
            return VmEvent("exit", code=self.exit_code)
        self.status = "running"
        try:
            return self._run()
        except _Fault as fault:
            self.status = "faulted"
            self.last_fault = fault.kind
            return VmEvent("fault", spoint=self.current_ip(),
                           uname=self.current_uname(), fault=fault.kind)

    def run(self) -> int:
        """Run to completion with no debugger attached."""
        while True:
            ev = self.resume()
            if ev.kind == "exit":
                return ev.code
            if ev.kind == "fault":
                continue        # next resume turns it into an exit
            # an armed flag with no debugger: ignore and keep going

    def _push(self, v) -> None:
        self.stack.append(v)

    def _pop(self):
        return self.stack.pop()

    def _binop_int(self, fn) -> None:
        b = self._pop()
        a = self._pop()
        self._push(fn(a, b) & _MASK)

    def _cmp(self, fn, signed: bool) -> None:
        b = self._pop()
        a = self._pop()
        if signed:
            a, b = _s32(a), _s32(b)
        self._push(1 if fn(a, b) else 0)

    def _fbin(self, fn) -> None:
        b = self._pop()
        a = self._pop()
        self._push(fn(float(a), float(b)))

    def _fcmp(self, fn) -> None:
        b = self._pop()
        a = self._pop()
        self._push(1 if fn(float(a), float(b)) else 0)

    def _run(self) -> VmEvent:
        OP = OPCODES
        scratch = getattr(self, "_scratch", 0)
        while True:
            instr = self.instrs[self.pc]
            op = instr.op
            args = instr.args
            self.pc += 1

            if op == OP["BPCHK"]:
                n = args[0]
                self._store_u32(self.fp + SHADOW_IP, n)
                if n < len(self.flags) and self.flags[n]:
                    self.status = "stopped"
                    self._scratch = scratch
                    return VmEvent("break", spoint=n, uname=self.current_uname())
                continue
            if op == OP["PUSH"]:
                self._push(args[0])
            elif op == OP["PUSHF"]:
                self._push(args[0])
            elif op == OP["DUP"]:
                self._push(self.stack[-1])
            elif op == OP["DROP"]:
                self._pop()
            elif op == OP["SWAP"]:
                self.stack[-1], self.stack[-2] = self.stack[-2], self.stack[-1]
            elif op == OP["STASH"]:
                scratch = self._pop()
            elif op == OP["UNSTASH"]:
                self._push(scratch)
            elif op == OP["LOCAL"]:
                self._push((self.fp + args[0]) & _MASK)
            elif op == OP["LD"]:
                addr = self._pop()
                self._push(self._mem_load(addr, args[0]))
            elif op == OP["ST"]:
                value = self._pop()
                addr = self._pop()
                self._mem_store(addr, args[0], value)
            elif op == OP["ADD"]:
                self._binop_int(lambda a, b: a + b)
            elif op == OP["SUB"]:
                self._binop_int(lambda a, b: a - b)
            elif op == OP["MUL"]:
                self._binop_int(lambda a, b: a * b)
            elif op == OP["DIVS"]:
                b = self._pop()
                a = self._pop()
                if b == 0:
                    raise _Fault(FaultKind.DIVIDE)
                self._push(_sdiv(_s32(a), _s32(b)) & _MASK)
            elif op == OP["DIVU"]:
                b = self._pop()
                a = self._pop()
                if b == 0:
                    raise _Fault(FaultKind.DIVIDE)
                self._push((a // b) & _MASK)
            elif op == OP["REMS"]:
                b = self._pop()
                a = self._pop()
                if b == 0:
                    raise _Fault(FaultKind.DIVIDE)
                sa, sb = _s32(a), _s32(b)
                self._push((sa - sb * _sdiv(sa, sb)) & _MASK)
            elif op == OP["REMU"]:
                b = self._pop()
                a = self._pop()
                if b == 0:
                    raise _Fault(FaultKind.DIVIDE)
                self._push((a % b) & _MASK)
            elif op == OP["NEG"]:
                self._push((-self._pop()) & _MASK)
            elif op == OP["AND"]:
                self._binop_int(lambda a, b: a & b)
            elif op == OP["OR"]:
                self._binop_int(lambda a, b: a | b)
            elif op == OP["XOR"]:
                self._binop_int(lambda a, b: a ^ b)
            elif op == OP["NOTB"]:
                self._push((~self._pop()) & _MASK)
            elif op == OP["SHL"]:
                self._binop_int(lambda a, b: a << (b & 31))
            elif op == OP["SHRS"]:
                b = self._pop()
                a = self._pop()
                self._push((_s32(a) >> (b & 31)) & _MASK)
            elif op == OP["SHRU"]:
                self._binop_int(lambda a, b: a >> (b & 31))
            elif op == OP["NOTL"]:
                self._push(1 if not self._pop() else 0)
            elif op == OP["BOOL"]:
                self._push(1 if self._pop() else 0)
            elif op == OP["EQ"]:
                self._cmp(lambda a, b: a == b, False)
            elif op == OP["NE"]:
                self._cmp(lambda a, b: a != b, False)
            elif op == OP["LTS"]:
                self._cmp(lambda a, b: a < b, True)
            elif op == OP["LES"]:
                self._cmp(lambda a, b: a <= b, True)
            elif op == OP["GTS"]:
                self._cmp(lambda a, b: a > b, True)
            elif op == OP["GES"]:
                self._cmp(lambda a, b: a >= b, True)
            elif op == OP["LTU"]:
                self._cmp(lambda a, b: a < b, False)
            elif op == OP["LEU"]:
                self._cmp(lambda a, b: a <= b, False)
            elif op == OP["GTU"]:
                self._cmp(lambda a, b: a > b, False)
            elif op == OP["GEU"]:
                self._cmp(lambda a, b: a >= b, False)
            elif op == OP["FADD"]:
                self._fbin(lambda a, b: a + b)
            elif op == OP["FSUB"]:
                self._fbin(lambda a, b: a - b)
            elif op == OP["FMUL"]:
                self._fbin(lambda a, b: a * b)
            elif op == OP["FDIV"]:
                b = self._pop()
                a = self._pop()
                a, b = float(a), float(b)
                if b == 0.0:
                    if a == 0.0 or a != a:
                        self._push(float("nan"))
                    else:
                        sign = math.copysign(1.0, a) * math.copysign(1.0, b)
                        self._push(sign * float("inf"))
                else:
                    self._push(a / b)
            elif op == OP["FNEG"]:
                self._push(-float(self._pop()))
            elif op == OP["FEQ"]:
                self._fcmp(lambda a, b: a == b)
            elif op == OP["FNE"]:
                self._fcmp(lambda a, b: a != b)
            elif op == OP["FLT"]:
                self._fcmp(lambda a, b: a < b)
            elif op == OP["FLE"]:
                self._fcmp(lambda a, b: a <= b)
            elif op == OP["FGT"]:
                self._fcmp(lambda a, b: a > b)
            elif op == OP["FGE"]:
                self._fcmp(lambda a, b: a >= b)
            elif op == OP["I2F"]:
                self._push(float(_s32(self._pop())))
            elif op == OP["U2F"]:
                self._push(float(self._pop()))
            elif op == OP["F2I"]:
                self._push(int(float(self._pop())) & _MASK)
            elif op == OP["F2U"]:
                self._push(int(float(self._pop())) & _MASK)
            elif op == OP["FSINGLE"]:
                self._push(struct.unpack("<f", struct.pack("<f", float(self._pop())))[0])
            elif op == OP["JMP"]:
                self.pc = self.index_of[args[0]]
            elif op == OP["JZ"]:
                if not self._pop():
                    self.pc = self.index_of[args[0]]
            elif op == OP["JNZ"]:
                if self._pop():
                    self.pc = self.index_of[args[0]]
            elif op == OP["CALL"]:
                self._call(args[0])
            elif op == OP["RET0"]:
                self._ret(0)
            elif op == OP["RETV"]:
                self._ret(self._pop())
            elif op == OP["SETIP"]:
                self._store_u32(self.fp + SHADOW_IP, args[0])
            elif op == OP["SPUSH"]:
                self.shadow_used = True
                self._store_u32(self.fp + SHADOW_DOWN, self.tos())
                self._store_u32(self.fp + SHADOW_FUNC, args[0])
                self._store_u32(self.fp + SHADOW_MODULE, args[1])
                self._store_u32(TOS_CELL, self.fp)
            elif op == OP["SPOP"]:
                self._store_u32(TOS_CELL, self._load_u32(self.fp + SHADOW_DOWN))
            elif op == OP["GETC"]:
                ch = self.stdin.read(1)
                self._push(ch[0] if ch else 0xFFFFFFFF)
            elif op == OP["PUTC"]:
                v = self._pop()
                self.stdout.write(bytes([int(v) & 0xFF]))
                self._push(v)
            elif op == OP["PRINTI"]:
                v = self._pop()
                self.stdout.write(str(_s32(int(v))).encode("ascii"))
                self._push(0)
            elif op == OP["ARGC"]:
                self._push(self.argc)
            elif op == OP["ARGV"]:
                self._push(self.argv_addr)
            elif op == OP["HALT"]:
                self.exit_code = _s32(self._pop()) & 0xFF
                self.status = "exited"
                if self.shadow_used and self.tos() != SENTINEL:
                    raise VmError("shadow stack unbalanced at exit")
                return VmEvent("exit", code=self.exit_code)
            else:
                raise VmError(f"unknown opcode {instr.name}")

    def _call(self, index: int) -> None:
        functions = self.image.functions
        if index >= len(functions):
            raise _Fault(FaultKind.BADCALL)
        callee = functions[index]
        new_sp = self.sp - callee.frame_size
        if new_sp < self.data_end:
            raise _Fault(FaultKind.MEMORY)
        new_fp = new_sp
        values = [self._pop() for _ in range(len(callee.params))]
        values.reverse()
        saved_fp, saved_sp = self.fp, self.sp
        self.fp, self.sp = new_fp, new_sp
        for slot, value in zip(callee.params, values):
            self._mem_store(new_fp + slot.offset, slot.kind, value)
        self.frames.append(_Frame(self.pc, saved_fp, saved_sp, callee))
        self.pc = self.index_of[callee.entry]

    def _ret(self, value) -> None:
        frame = self.frames.pop()
        self.fp = frame.saved_fp
        self.sp = frame.saved_sp
        self.pc = frame.ret
        self._push(value)
