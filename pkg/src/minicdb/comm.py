"""Transports between the debugger half and the target half.

Wire format: every message is a frame of

    u32 length (little-endian, counts kind byte + payload)
    u8  kind
    payload, fixed-width little-endian integers

Requests flow debugger -> target (FETCH, STORE, FLAGS_WRITE, FRAME_READ,
CONTINUE) and each is answered with a reply of the same kind or ERROR.
Events flow target -> debugger (STARTUP_EVENT, BREAK_EVENT, FAULT_EVENT,
EXIT_EVENT) and only while no request is outstanding, i.e. the target
speaks exactly once per stop.  The same contract is implemented twice:
in-process by direct calls, remote over a stream socket, so a debugger
cannot tell which configuration it is running in.

Flag writes are a distinguished kind rather than plain stores so the
target side can keep its breakpoint array outside target memory.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

from .vm import SpaceError, TargetVM, VmError


class MsgKind(IntEnum):
    FETCH = 1
    STORE = 2
    FLAGS_WRITE = 3
    BREAK_EVENT = 4
    FAULT_EVENT = 5
    STARTUP_EVENT = 6
    CONTINUE = 7
    FRAME_READ = 8
    EXIT_EVENT = 9
    ERROR = 10


class ProtocolError(Exception):
    pass


class TransportClosed(ProtocolError):
    pass


@dataclass(frozen=True)
class Message:
    kind: MsgKind
    space: int = 0
    addr: int = 0
    count: int = 0
    data: bytes = b""
    spoint: int = 0
    uname: int = 0
    fault: int = 0
    code: int = 0
    error: str = ""


def encode(msg: Message) -> bytes:
    k = msg.kind
    if k in (MsgKind.FETCH, MsgKind.STORE):
        payload = struct.pack("<III", msg.space, msg.addr, msg.count) + msg.data
    elif k == MsgKind.FLAGS_WRITE:
        payload = struct.pack("<II", msg.addr, msg.count) + msg.data
    elif k == MsgKind.BREAK_EVENT:
        payload = struct.pack("<II", msg.spoint, msg.uname)
    elif k == MsgKind.FAULT_EVENT:
        payload = struct.pack("<BII", msg.fault, msg.spoint, msg.uname)
    elif k == MsgKind.STARTUP_EVENT or k == MsgKind.CONTINUE:
        payload = b""
    elif k == MsgKind.FRAME_READ:
        payload = struct.pack("<I", msg.addr)
    elif k == MsgKind.EXIT_EVENT:
        payload = struct.pack("<i", msg.code)
    elif k == MsgKind.ERROR:
        raw = msg.error.encode("utf-8")
        payload = struct.pack("<BI", msg.fault, len(raw)) + raw
    else:
        raise ProtocolError(f"cannot encode kind {k!r}")
    body = bytes([k]) + payload
    return struct.pack("<I", len(body)) + body


def decode(frame: bytes) -> Message:
    if len(frame) < 5:
        raise ProtocolError("frame shorter than its header")
    (length,) = struct.unpack_from("<I", frame)
    if length != len(frame) - 4:
        raise ProtocolError("frame length disagrees with its payload")
    kind_byte = frame[4]
    try:
        k = MsgKind(kind_byte)
    except ValueError:
        raise ProtocolError(f"unknown message kind {kind_byte}")
    body = frame[5:]
    try:
        if k in (MsgKind.FETCH, MsgKind.STORE):
            space, addr, count = struct.unpack_from("<III", body)
            return Message(k, space=space, addr=addr, count=count, data=body[12:])
        if k == MsgKind.FLAGS_WRITE:
            addr, count = struct.unpack_from("<II", body)
            return Message(k, addr=addr, count=count, data=body[8:])
        if k == MsgKind.BREAK_EVENT:
            spoint, uname = struct.unpack("<II", body)
            return Message(k, spoint=spoint, uname=uname)
        if k == MsgKind.FAULT_EVENT:
            fault, spoint, uname = struct.unpack("<BII", body)
            return Message(k, fault=fault, spoint=spoint, uname=uname)
        if k in (MsgKind.STARTUP_EVENT, MsgKind.CONTINUE):
            if body:
                raise ProtocolError(f"{k.name} carries no payload")
            return Message(k)
        if k == MsgKind.FRAME_READ:
            (addr,) = struct.unpack("<I", body)
            return Message(k, addr=addr)
        if k == MsgKind.EXIT_EVENT:
            (code,) = struct.unpack("<i", body)
            return Message(k, code=code)
        if k == MsgKind.ERROR:
            fault, n = struct.unpack_from("<BI", body)
            raw = body[5:]
            if len(raw) != n:
                raise ProtocolError("error text length disagrees")
            return Message(k, fault=fault, error=raw.decode("utf-8"))
    except struct.error as exc:
        raise ProtocolError(f"truncated {k.name} payload") from exc
    raise ProtocolError(f"cannot decode kind {k!r}")


# ---------------------------------------------------------------------------
# Target side.


class TargetHost:
    """Answers debugger requests against a VM and produces events.

    The host is transport-agnostic: in-process channels call it directly
    and the remote serving loop pumps it over a socket.
    """

    def __init__(self, vm: TargetVM):
        self.vm = vm
        self.exited = False

    def startup_event(self) -> Message:
        return Message(MsgKind.STARTUP_EVENT)

    def handle(self, msg: Message) -> Message:
        """One request, one reply; CONTINUE acknowledges and the caller
        then drives run_until_event."""
        try:
            if msg.kind == MsgKind.FETCH:
                data = self.vm.fetch(msg.space, msg.addr, msg.count)
                return Message(MsgKind.FETCH, space=msg.space, addr=msg.addr,
                               count=len(data), data=data)
            if msg.kind == MsgKind.STORE:
                wrote = self.vm.store(msg.space, msg.addr, msg.data)
                return Message(MsgKind.STORE, space=msg.space, addr=msg.addr,
                               count=wrote)
            if msg.kind == MsgKind.FLAGS_WRITE:
                wrote = self.vm.store(1, msg.addr, msg.data)
                return Message(MsgKind.FLAGS_WRITE, addr=msg.addr, count=wrote)
            if msg.kind == MsgKind.FRAME_READ:
                return Message(MsgKind.FRAME_READ, addr=self.vm.tos())
            if msg.kind == MsgKind.CONTINUE:
                return Message(MsgKind.CONTINUE)
            return Message(MsgKind.ERROR, error=f"unexpected request {msg.kind.name}")
        except (SpaceError, VmError) as exc:
            return Message(MsgKind.ERROR, error=str(exc))

    def run_until_event(self) -> Message:
        ev = self.vm.resume()
        if ev.kind == "break":
            return Message(MsgKind.BREAK_EVENT, spoint=ev.spoint, uname=ev.uname)
        if ev.kind == "fault":
            return Message(MsgKind.FAULT_EVENT, fault=int(ev.fault),
                           spoint=ev.spoint, uname=ev.uname)
        self.exited = True
        return Message(MsgKind.EXIT_EVENT, code=ev.code)


# ---------------------------------------------------------------------------
# Debugger-side channels.


class Channel:
    """What the debugger half needs from a transport."""

    def request(self, msg: Message) -> Message:
        raise NotImplementedError

    def wait_event(self) -> Message:
        raise NotImplementedError

    def close(self) -> None:
        pass


class InProcessChannel(Channel):
    """Single-address-space configuration: requests are direct calls and
    waiting for an event runs the target inline."""

    def __init__(self, host: TargetHost):
        self.host = host
        self._continue = False
        self._started = False
        self._closed = False

    def request(self, msg: Message) -> Message:
        if self._closed:
            raise TransportClosed("session closed")
        if self.host.exited and msg.kind != MsgKind.CONTINUE:
            raise TransportClosed("target has exited")
        reply = self.host.handle(msg)
        if msg.kind == MsgKind.CONTINUE and reply.kind == MsgKind.CONTINUE:
            self._continue = True
        return reply

    def wait_event(self) -> Message:
        if self._closed:
            raise TransportClosed("session closed")
        if not self._started:
            self._started = True
            return self.host.startup_event()
        if self.host.exited:
            raise TransportClosed("target has exited")
        if not self._continue:
            raise ProtocolError("waiting for an event while the target is stopped")
        self._continue = False
        return self.host.run_until_event()

    def close(self) -> None:
        self._closed = True


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(n)
        if not chunk:
            raise TransportClosed("connection closed")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> Message:
    header = _read_exact(sock, 4)
    (length,) = struct.unpack("<I", header)
    if length == 0 or length > 1 << 24:
        raise ProtocolError(f"implausible frame length {length}")
    body = _read_exact(sock, length)
    return decode(header + body)


def write_frame(sock: socket.socket, msg: Message) -> None:
    sock.sendall(encode(msg))


class SocketChannel(Channel):
    """Two-process configuration over a stream socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 10.0) -> "SocketChannel":
        sock = socket.create_connection((host, port), timeout=timeout)
        sock.settimeout(None)
        return cls(sock)

    def request(self, msg: Message) -> Message:
        try:
            write_frame(self.sock, msg)
            return read_frame(self.sock)
        except OSError as exc:
            raise TransportClosed(str(exc)) from exc

    def wait_event(self) -> Message:
        try:
            return read_frame(self.sock)
        except OSError as exc:
            raise TransportClosed(str(exc)) from exc

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def serve_target(vm: TargetVM, conn: socket.socket) -> int:
    """Remote serving loop: emit the startup event, answer requests while
    stopped, run on CONTINUE, and report the exit.  Returns the target's
    exit code."""
    host = TargetHost(vm)
    try:
        write_frame(conn, host.startup_event())
        while True:
            # stopped: request/reply until CONTINUE
            while True:
                msg = read_frame(conn)
                reply = host.handle(msg)
                write_frame(conn, reply)
                if msg.kind == MsgKind.CONTINUE and reply.kind == MsgKind.CONTINUE:
                    break
            event = host.run_until_event()
            write_frame(conn, event)
            if event.kind == MsgKind.EXIT_EVENT:
                return event.code
    except TransportClosed:
        return vm.exit_code if vm.status == "exited" else 143
