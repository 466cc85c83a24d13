"""Debugger-side nub: symbol files, breakpoints, frames, and values.

This half owns every symbol file named by the image's manifest and talks
to the target half exclusively through a Channel.  Its surface mirrors
the seven-operation target interface: init (event loop with startup and
fault callbacks), src (stopping-point enumeration), set/remove
(coordinate breakpoints), fetch/store (address spaces), frame (shadow
stack traversal), plus name resolution on top.

Breakpoint flags are shared across units by index, so the target traps
whenever an index is armed anywhere; arrivals that match no registered
(unit, index) pair are dismissed here by resuming immediately, and the
debugger never observes them.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .codegen import SHADOW_DOWN, SHADOW_FUNC, SHADOW_IP, SHADOW_MODULE, SHADOW_UP
from .comm import Channel, Message, MsgKind, ProtocolError, TransportClosed
from .image import ExecutableImage, SENTINEL
from .symtab import (
    Coordinate, EnumConstSym, FunctionType, GlobalSym, LocalSym, ParamSym,
    StaticSym, SymModule, Symbol, TypeNode, TypedefSym, lookup_name,
    visible_chain,
)
from .sympickle import load_symfile

FILE_BYTES = 32
NAME_BYTES = 32

FaultNames = {1: "divide", 2: "memory", 3: "badcall"}


class NubError(Exception):
    pass


class MatchError(NubError):
    def __init__(self, message: str, candidates: list["NubCoord"] | None = None):
        super().__init__(message)
        self.candidates = candidates or []


class FrameError(NubError):
    def __init__(self, message: str, depth: int):
        super().__init__(message)
        self.depth = depth


class NotStopped(NubError):
    pass


class StopSession(Exception):
    """Raised inside a callback to tear the whole session down."""


def _fix(name: str | bytes, width: int) -> bytes:
    raw = name.encode("utf-8") if isinstance(name, str) else bytes(name)
    return raw[:width].ljust(width, b"\0")


@dataclass(frozen=True)
class NubCoord:
    """Source coordinate at the nub boundary: fixed 32-byte file name,
    16-bit line and column.  Empty file or zero x/y act as wildcards."""

    file: bytes
    x: int
    y: int

    def __post_init__(self):
        if len(self.file) != FILE_BYTES:
            raise NubError("file field must be exactly 32 bytes")
        if not (0 <= self.x <= 0xFFFF and 0 <= self.y <= 0xFFFF):
            raise NubError("coordinate components must fit in 16 bits")

    @classmethod
    def make(cls, file: str = "", x: int = 0, y: int = 0) -> "NubCoord":
        return cls(_fix(file, FILE_BYTES), x, y)

    @classmethod
    def of(cls, coord: Coordinate) -> "NubCoord":
        return cls.make(coord.file, min(coord.x, 0xFFFF), min(coord.y, 0xFFFF))

    def file_text(self) -> str:
        return self.file.split(b"\0", 1)[0].decode("utf-8", "replace")

    def is_exact(self) -> bool:
        return self.file != b"\0" * FILE_BYTES and self.x > 0 and self.y > 0

    def matches(self, coord: Coordinate) -> bool:
        if self.file != b"\0" * FILE_BYTES and self.file != _fix(coord.file, FILE_BYTES):
            return False
        if self.x and self.x != coord.x:
            return False
        if self.y and self.y != coord.y:
            return False
        return True

    def __str__(self) -> str:
        return f"{self.file_text() or '*'}:{self.y or '*'}.{self.x or '*'}"


@dataclass(frozen=True)
class NubState:
    """What the debugger learns at a stop or from a stack frame."""

    name: bytes                      # 32-byte function name
    src: NubCoord
    fp: int                          # shadow frame address; 0 before main
    context: tuple[int, int]         # (uname, visibility tail uid)

    def name_text(self) -> str:
        return self.name.split(b"\0", 1)[0].decode("utf-8", "replace")


@dataclass(frozen=True)
class ValueView:
    type: TypeNode
    data: bytes
    module: SymModule
    symbol: Symbol


Callback = Callable[[NubState], None]


class NubServer:
    def __init__(self, channel: Channel, image: ExecutableImage,
                 image_dir: str | Path = "."):
        self.channel = channel
        self.image = image
        self.image_dir = Path(image_dir)
        self._symfiles: dict[int, SymModule] = {}
        self._records: Optional[list[tuple[int, list[int]]]] = None
        self._handlers: dict[tuple[int, int], Callback] = {}
        self._arm_count: dict[int, int] = {}
        self._stopped = False
        self.dismissed = 0
        self.exit_code: Optional[int] = None
        self.last_fault: Optional[int] = None

    # -- symbol files -------------------------------------------------------

    def module(self, uname: int) -> SymModule:
        if uname not in self._symfiles:
            for u, name in self.image.manifest:
                if u == uname:
                    self._symfiles[uname] = load_symfile(self.image_dir / name)
                    break
            else:
                raise NubError(f"no symbol file for unit {uname:#010x}")
        return self._symfiles[uname]

    def modules(self) -> list[SymModule]:
        return [self.module(u) for u, _ in self.image.manifest]

    # -- raw access ------------------------------------------------------------

    def _request(self, msg: Message) -> Message:
        reply = self.channel.request(msg)
        if reply.kind == MsgKind.ERROR:
            raise NubError(reply.error)
        return reply

    def fetch(self, space: int, addr: int, nbytes: int) -> bytes:
        self._require_stopped()
        return self._request(Message(MsgKind.FETCH, space=space, addr=addr,
                                     count=nbytes)).data

    def store(self, space: int, addr: int, data: bytes) -> int:
        self._require_stopped()
        if space == 1:
            reply = self._request(Message(MsgKind.FLAGS_WRITE, addr=addr,
                                          count=len(data), data=data))
        else:
            reply = self._request(Message(MsgKind.STORE, space=space, addr=addr,
                                          count=len(data), data=data))
        return reply.count

    def _require_stopped(self) -> None:
        if not self._stopped:
            raise NotStopped("target is not stopped")

    # -- module records ------------------------------------------------------------

    def records(self) -> list[tuple[int, list[int]]]:
        if self._records is None:
            blob = self.fetch(2, 0, 1 << 20)
            out = []
            pos = 0
            while pos + 4 <= len(blob):
                (uname,) = struct.unpack_from("<I", blob, pos)
                pos += 4
                if uname == 0:
                    break
                (count,) = struct.unpack_from("<I", blob, pos)
                pos += 4
                addrs = list(struct.unpack_from(f"<{count}I", blob, pos))
                pos += 4 * count
                out.append((uname, addrs))
            self._records = out
        return self._records

    def vector_address(self, uname: int, index: int) -> int:
        for u, addrs in self.records():
            if u == uname:
                if index >= len(addrs):
                    raise NubError(f"address vector of {uname:#010x} has no slot {index}")
                return addrs[index]
        raise NubError(f"no module record for unit {uname:#010x}")

    # -- stopping points --------------------------------------------------------------

    def src(self, pattern: NubCoord, apply: Callable, cl=None) -> None:
        """Invoke apply(i, src, cl) for every stopping point the pattern
        matches, across all units in link order."""
        for module in self.modules():
            for i, sp in enumerate(module.spoints):
                if pattern.matches(sp.src):
                    apply(i, NubCoord.of(sp.src), cl)

    def _match_exact(self, src: NubCoord) -> tuple[int, int]:
        if not src.is_exact():
            raise MatchError(f"breakpoints need an exact coordinate, got {src}")
        hits: list[tuple[int, int]] = []
        for module in self.modules():
            for i, sp in enumerate(module.spoints):
                if src.matches(sp.src):
                    hits.append((module.uname, i))
        if not hits:
            raise MatchError(f"no stopping point at {src}")
        if len(hits) > 1:
            raise MatchError(f"{src} is ambiguous across units")
        return hits[0]

    def set(self, src: NubCoord, onbreak: Callback) -> Optional[Callback]:
        self._require_stopped()
        uname, index = self._match_exact(src)
        key = (uname, index)
        previous = self._handlers.get(key)
        self._handlers[key] = onbreak
        if previous is None:
            count = self._arm_count.get(index, 0)
            if count == 0:
                self.store(1, index, b"\x01")
            self._arm_count[index] = count + 1
        return previous

    def remove(self, src: NubCoord) -> Optional[Callback]:
        self._require_stopped()
        try:
            uname, index = self._match_exact(src)
        except MatchError:
            return None
        previous = self._handlers.pop((uname, index), None)
        if previous is not None:
            count = self._arm_count.get(index, 0) - 1
            if count <= 0:
                self._arm_count.pop(index, None)
                self.store(1, index, b"\x00")
            else:
                self._arm_count[index] = count
        return previous

    def breakpoints(self) -> list[tuple[int, int]]:
        return sorted(self._handlers)

    # -- frames ------------------------------------------------------------------------

    def _walk_frames(self) -> list[tuple[int, int, int, int]]:
        """(frame address, func uid, uname, ip) from the top down; writes
        up-links into the frames it traverses."""
        tos = self._request(Message(MsgKind.FRAME_READ)).addr
        frames = []
        addr = tos
        newer = 0
        while addr and addr != SENTINEL:
            raw = self.fetch(0, addr, 20)
            if len(raw) < 20:
                raise NubError(f"unreadable shadow frame at {addr:#010x}")
            _up, down, func, module, ip = struct.unpack("<IIIII", raw)
            if module == 0:
                break
            if newer:
                self.store(0, addr + SHADOW_UP, struct.pack("<I", newer))
            frames.append((addr, func, module, ip))
            newer = addr
            addr = down
            if len(frames) > 65536:
                raise NubError("shadow frame chain does not terminate")
        return frames

    def frame(self, n: int) -> NubState:
        self._require_stopped()
        frames = self._walk_frames()
        if n < 0 or n >= len(frames):
            raise FrameError(f"frame {n} out of range, stack depth {len(frames)}",
                             depth=len(frames))
        addr, func_uid, uname, ip = frames[n]
        return self._frame_state(addr, func_uid, uname, ip)

    def stack_depth(self) -> int:
        self._require_stopped()
        return len(self._walk_frames())

    def _frame_state(self, addr: int, func_uid: int, uname: int, ip: int) -> NubState:
        module = self.module(uname)
        name = module.symbol(func_uid).id
        if ip < len(module.spoints):
            sp = module.spoints[ip]
            src = NubCoord.of(sp.src)
            tail = sp.tail
        else:
            src = NubCoord.make()
            tail = 0
        return NubState(_fix(name, NAME_BYTES), src, addr, (uname, tail))

    # -- values --------------------------------------------------------------------------

    def resolve_value(self, state: NubState, name: str) -> Optional[ValueView]:
        """The declared type and raw bytes of ``name`` as seen from
        ``state``; None when the name is not visible."""
        self._require_stopped()
        uname, tail = state.context
        module = self.module(uname)
        sym = lookup_name(name, (module, tail), self.modules())
        if sym is None:
            return None
        owner = self.module(sym.module)
        tnode = owner.type_node(sym.type)
        if isinstance(sym, TypedefSym):
            raise NubError(f"{name} names a type, not a value")
        if isinstance(sym, EnumConstSym):
            data = struct.pack("<i", sym.value)
            return ValueView(tnode, data, owner, sym)
        if isinstance(sym, (LocalSym, ParamSym)):
            if not state.fp:
                raise NubError(f"{name} lives in a frame, and there is none here")
            addr = (state.fp + sym.offset) & 0xFFFFFFFF
            data = self.fetch(0, addr, tnode.size)
        else:
            addr = self.vector_address(sym.module, sym.index)
            if isinstance(tnode, FunctionType):
                return ValueView(tnode, struct.pack("<I", addr), owner, sym)
            if addr == 0:
                raise NubError(f"{name} has no storage in this image")
            data = self.fetch(0, addr, tnode.size)
        if len(data) != tnode.size:
            raise NubError(f"could not read {tnode.size} bytes of {name}")
        return ValueView(tnode, data, owner, sym)

    def visible_names(self, state: NubState) -> list[Symbol]:
        """Innermost-first, shadowing applied; the variables pane."""
        uname, tail = state.context
        if not tail:
            return []
        module = self.module(uname)
        seen = set()
        out = []
        for sym in visible_chain(module, tail):
            if sym.id in seen:
                continue
            seen.add(sym.id)
            out.append(sym)
        return out

    # -- the session loop -----------------------------------------------------------------

    def init(self, startup: Callback | None = None,
             fault: Callable[[NubState, str], None] | None = None) -> Optional[int]:
        """Run the session: deliver the startup stop, dispatch breakpoint
        handlers, dismiss extraneous arrivals, and return the target's
        exit code (None if a callback tore the session down)."""
        try:
            while True:
                try:
                    event = self.channel.wait_event()
                except TransportClosed:
                    return None
                self._stopped = True
                try:
                    if event.kind == MsgKind.STARTUP_EVENT:
                        if startup is not None:
                            startup(self._startup_state())
                    elif event.kind == MsgKind.BREAK_EVENT:
                        handler = self._handlers.get((event.uname, event.spoint))
                        if handler is None:
                            self.dismissed += 1
                        else:
                            handler(self._stop_state(event))
                    elif event.kind == MsgKind.FAULT_EVENT:
                        self.last_fault = event.fault
                        if fault is not None:
                            fault(self._stop_state(event),
                                  FaultNames.get(event.fault, "fault"))
                    elif event.kind == MsgKind.EXIT_EVENT:
                        self.exit_code = event.code
                        return event.code
                    else:
                        raise ProtocolError(f"unexpected event {event.kind.name}")
                finally:
                    self._stopped = False
                self.channel.request(Message(MsgKind.CONTINUE))
        except StopSession:
            return None
        finally:
            self.channel.close()

    def _startup_state(self) -> NubState:
        if self.image.entry_func is None:
            return NubState(_fix("", NAME_BYTES), NubCoord.make(), 0, (0, 0))
        entry = self.image.functions[self.image.entry_func]
        module = self.module(entry.uname)
        sym = module.symbol(entry.uid)
        return NubState(_fix(sym.id, NAME_BYTES), NubCoord.of(sym.src), 0,
                        (entry.uname, sym.uid))

    def _stop_state(self, event: Message) -> NubState:
        tos = self._request(Message(MsgKind.FRAME_READ)).addr
        if tos == SENTINEL or tos == 0:
            # fault before any frame exists
            return NubState(_fix("", NAME_BYTES), NubCoord.make(), 0,
                            (event.uname, 0))
        raw = self.fetch(0, tos, 20)
        _up, _down, func_uid, uname, ip = struct.unpack("<IIIII", raw)
        return self._frame_state(tos, func_uid, uname, ip)
